"""Privacy-drift workbench: incremental and federated training with membership-inference auditing."""

__version__ = "0.1.0"
