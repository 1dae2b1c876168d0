"""Federated-learning orchestration: server, edge clients, compression,
scheduling, intent translation, and architecture/hyperparameter search."""

__version__ = "0.1.0"
