"""Run the (paradigm x client count x permutation) matrix described by an ExperimentConfig."""

from __future__ import annotations

import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from . import data
from .config import ExperimentConfig, config_from_dict
from .data import SPLIT_NAMES, Dataset, SplitSet
from .errors import DriftBenchError
from .federation import RoundTrace, run_federated_phase
from .metrics import DriftReport, aggregate
from .model import init_model
from .schedule import PhaseMetrics, PhasePlan, enumerate_permutations, run_incremental
from .seeding import derive_seed

log = logging.getLogger(__name__)

_ALL_PERMUTATIONS = list(itertools.permutations(SPLIT_NAMES))


def build_dataset(cfg: ExperimentConfig) -> Dataset:
    d = cfg.dataset
    if d.source == "synthetic":
        ds = data.synthesize_dataset(d.num_classes, d.per_class, d.feature_dim,
                                     d.class_separation, d.seed, noise=d.noise)
    else:
        ds = data.load_dataset(d.path, d.source, label_mode=d.label_mode)
    if cfg.coarsen is not None:
        mapping = data.CIFAR100_FINE_TO_COARSE if cfg.coarsen == "cifar100" else cfg.coarsen
        ds = data.coarsen_labels(ds, mapping)
    return ds


def build_splits(cfg: ExperimentConfig, dataset: Dataset) -> SplitSet:
    p = cfg.partition
    return data.partition_noniid(dataset, 4, p.alpha, p.test_fraction, p.seed)


@dataclass
class CellResult:
    paradigm: str
    clients: int
    permutation: Tuple[str, ...]
    metrics: Optional[List[PhaseMetrics]] = None
    traces: List[List[RoundTrace]] = field(default_factory=list)
    error: Optional[str] = None

    @property
    def key(self) -> str:
        return f"{self.paradigm}_c{self.clients}_{''.join(self.permutation)}"


def run_cell(cfg: ExperimentConfig, dataset: Dataset, splitset: SplitSet, paradigm: str,
             clients: int, permutation) -> CellResult:
    """One incremental run. Failures are captured in ``CellResult.error``, never raised.

    Seeds depend on the permutation itself (its index among all 24), not on
    the paradigm, so the uniform and additive cells of one permutation train
    identical models.
    """
    plan = PhasePlan(tuple(permutation), paradigm)
    perm_key = _ALL_PERMUTATIONS.index(plan.permutation)
    fedcfg = cfg.federation.for_clients(clients)
    result = CellResult(paradigm, clients, plan.permutation)

    def trainer(model, train_ids):
        phase = len(result.traces)
        seed = derive_seed(cfg.federation.seed, perm_key, phase)
        model, traces = run_federated_phase(model, train_ids, dataset, fedcfg, seed)
        result.traces.append(traces)
        return model

    model0 = init_model(cfg.arch(dataset.feature_dim, dataset.num_classes), cfg.model.seed,
                        cfg.model.optimizer, cfg.model.hyper())
    try:
        result.metrics = run_incremental(model0, dataset, splitset, plan, trainer,
                                         cfg.attack.per_side_cap, derive_seed(cfg.attack.seed, perm_key),
                                         matching=cfg.attack.matching, nonmembers=cfg.attack.nonmembers)
    except DriftBenchError as exc:
        log.warning("cell %s failed: %s", result.key, exc)
        result.error = str(exc)
    return result


def matrix_cells(cfg: ExperimentConfig):
    perms = enumerate_permutations(cfg.schedule.permutation_count, cfg.schedule.seed)
    return [(paradigm, int(clients), perm)
            for paradigm in cfg.schedule.paradigms
            for clients in cfg.federation.client_counts
            for perm in perms]


_worker_state: Dict[str, tuple] = {}


def _worker_run(cfg_doc, cell):
    cfg = config_from_dict(cfg_doc)
    digest = cfg.digest()
    if digest not in _worker_state:
        ds = build_dataset(cfg)
        _worker_state.clear()
        _worker_state[digest] = (ds, build_splits(cfg, ds))
    ds, ss = _worker_state[digest]
    return run_cell(cfg, ds, ss, *cell)


def run_matrix(cfg: ExperimentConfig, dataset: Dataset, splitset: SplitSet,
               jobs: int = 1) -> List[CellResult]:
    """Every matrix cell, in matrix order regardless of ``jobs``."""
    cells = matrix_cells(cfg)
    if jobs <= 1:
        return [run_cell(cfg, dataset, splitset, *cell) for cell in cells]
    doc = cfg.to_dict()
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_worker_run, [doc] * len(cells), cells))


def reports_by_group(cfg: ExperimentConfig, results: List[CellResult]) -> List[DriftReport]:
    """One DriftReport per (paradigm, client count) with at least one successful permutation."""
    out = []
    for paradigm in cfg.schedule.paradigms:
        for clients in cfg.federation.client_counts:
            ok = [(PhasePlan(r.permutation, paradigm), r.metrics) for r in results
                  if r.paradigm == paradigm and r.clients == clients and r.metrics is not None]
            if ok:
                out.append(aggregate(ok, clients, cfg.digest()))
    return out
