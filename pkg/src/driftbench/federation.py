"""In-process FedAvg simulation.

Each round broadcasts the global model, trains a fresh copy on every client
shard, and replaces the global parameters with the shard-size weighted mean.
Adam moments live only inside a round; the aggregate always carries a reset
optimizer. Centralized training is the one-client case of the same loop.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .data import Dataset, shard_for_clients
from .errors import AggregationError, ConfigurationError, ShardError
from .model import ModelState, param_digest, reset_optimizer, train_epochs
from .seeding import derive_seed

_SHARD_KEY = 7_919  # seed-path component for shard assignment, distinct from round indices


@dataclass(frozen=True)
class FederationConfig:
    num_clients: int = 1
    rounds_per_phase: int = 5
    local_epochs: int = 2
    batch_size: int = 32

    def __post_init__(self):
        for name in ("num_clients", "rounds_per_phase", "local_epochs", "batch_size"):
            if int(getattr(self, name)) < 1:
                raise ConfigurationError(f"{name} must be at least 1")


@dataclass(frozen=True)
class ClientTrace:
    client_id: int
    shard_size: int
    param_digest: str


@dataclass(frozen=True)
class RoundTrace:
    round_index: int
    clients: Tuple[ClientTrace, ...]
    aggregated_digest: str

    def to_json(self) -> str:
        doc = {
            "round_index": self.round_index,
            "clients": [asdict(c) for c in self.clients],
            "aggregated_digest": self.aggregated_digest,
        }
        return json.dumps(doc, sort_keys=True)


def traces_to_jsonl(traces: Sequence[RoundTrace]) -> str:
    return "".join(t.to_json() + "\n" for t in traces)


def traces_from_jsonl(text: str) -> List[RoundTrace]:
    out = []
    for line in text.splitlines():
        if line.strip():
            doc = json.loads(line)
            clients = tuple(ClientTrace(**c) for c in doc["clients"])
            out.append(RoundTrace(doc["round_index"], clients, doc["aggregated_digest"]))
    return out


def local_train(global_model: ModelState, shard_ids, dataset: Dataset, fedcfg: FederationConfig,
                seed: int, epochs: int | None = None, client_id=None) -> ModelState:
    """Train a copy of ``global_model`` on one shard with fresh optimizer moments.

    ``epochs`` overrides ``fedcfg.local_epochs`` (0 returns an untouched copy).
    """
    if not len(shard_ids):
        who = "" if client_id is None else f" for client {client_id}"
        raise ShardError(f"empty shard{who}")
    local = reset_optimizer(global_model)
    shard = dataset.subset(sorted(int(i) for i in shard_ids))
    n_epochs = fedcfg.local_epochs if epochs is None else epochs
    return train_epochs(local, shard, n_epochs, fedcfg.batch_size, seed)


def _canonical_order(client_models, shard_sizes):
    keys = [(int(s), param_digest(m)) for m, s in zip(client_models, shard_sizes)]
    return sorted(range(len(keys)), key=lambda i: keys[i])


def fedavg(client_models: Sequence[ModelState], shard_sizes: Sequence[int]) -> ModelState:
    """Shard-size weighted mean of client parameters.

    Computed as ``ref + sum_i w_i (p_i - ref)`` over clients in a canonical
    order (shard size, then parameter digest), so the result is independent
    of the order the clients are passed in and identical inputs reproduce
    themselves bit for bit.
    """
    if not client_models or len(client_models) != len(shard_sizes):
        raise AggregationError("need one shard size per client model, and at least one client")
    if any(int(s) < 1 for s in shard_sizes):
        raise AggregationError("shard sizes must be positive")
    arch = client_models[0].arch
    if any(m.arch != arch for m in client_models):
        raise AggregationError("client models do not share one architecture")

    order = _canonical_order(client_models, shard_sizes)
    total = float(sum(int(s) for s in shard_sizes))
    weights = [int(shard_sizes[i]) / total for i in order]
    models = [client_models[i] for i in order]
    ref = models[0]

    params = []
    for layer in range(len(ref.params)):
        pair = []
        for j in range(2):
            base = ref.params[layer][j]
            acc = np.zeros_like(base)
            for w, m in zip(weights[1:], models[1:]):
                acc += w * (m.params[layer][j] - base)
            # keep base where nothing moved so a lone -0.0 is not turned into +0.0
            pair.append(np.where(acc == 0.0, base, base + acc))
        params.append(tuple(pair))
    out = ModelState(arch, params, ref.optimizer_state)
    return reset_optimizer(out)


def run_federated_phase(global_model: ModelState, split_train, dataset: Dataset,
                        fedcfg: FederationConfig, seed: int) -> Tuple[ModelState, List[RoundTrace]]:
    shards = shard_for_clients(split_train, fedcfg.num_clients, derive_seed(seed, _SHARD_KEY))
    traces = []
    model = global_model
    for r in range(fedcfg.rounds_per_phase):
        locals_, sizes, entries = [], [], []
        for c in sorted(shards.shards):
            ids = shards.shards[c]
            local = local_train(model, ids, dataset, fedcfg, derive_seed(seed, r, c), client_id=c)
            locals_.append(local)
            sizes.append(len(ids))
            entries.append(ClientTrace(c, len(ids), param_digest(local)))
        model = fedavg(locals_, sizes)
        traces.append(RoundTrace(r, tuple(entries), param_digest(model)))
    return model, traces


def centralized_phase(global_model: ModelState, split_train, dataset: Dataset,
                      fedcfg: FederationConfig, seed: int) -> ModelState:
    """Round-structured centralized training on the whole split.

    Runs ``rounds_per_phase`` blocks of ``local_epochs`` epochs, each with a
    reset optimizer and the round's shuffle seed. This is the comparator that
    a one-client federation must reproduce bit for bit.
    """
    data = dataset.subset(sorted(int(i) for i in split_train))
    model = global_model
    for r in range(fedcfg.rounds_per_phase):
        model = train_epochs(reset_optimizer(model), data, fedcfg.local_epochs, fedcfg.batch_size,
                             derive_seed(seed, r, 0))
    return reset_optimizer(model)
