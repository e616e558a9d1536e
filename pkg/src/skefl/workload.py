"""Synthetic federated logistic-regression workload.

Generates a two-class Gaussian task that is linearly separable, partitions it
across clients with a heterogeneity knob (``alpha=1`` IID, ``alpha -> 0``
label-disjoint), trains local models with mini-batch SGD + momentum, and
provides the exact plaintext weighted average used as the reference for the
encrypted aggregation pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .errors import ConfigurationError
from .rng import derive_seed

CLASS_SEPARATION = 1.5
NOISE_SIGMA = 0.5
HOLDOUT_SAMPLES = 1000


@dataclass(frozen=True)
class ModelVector:
    """A flat model: feature weights followed by the bias term."""

    values: tuple

    def __len__(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)

    @classmethod
    def from_array(cls, arr) -> "ModelVector":
        return cls(tuple(float(v) for v in arr))

    @classmethod
    def zeros(cls, m: int) -> "ModelVector":
        return cls((0.0,) * m)


@dataclass(frozen=True)
class TrainParams:
    epochs: int = 10
    learning_rate: float = 0.05
    momentum: float = 0.8
    batch_size: int = 50


@dataclass
class SyntheticTask:
    """Per-client datasets plus a balanced holdout set."""

    dim: int
    client_features: List[np.ndarray]
    client_labels: List[np.ndarray]
    holdout_features: np.ndarray
    holdout_labels: np.ndarray

    @property
    def n_clients(self) -> int:
        return len(self.client_features)

    @property
    def model_length(self) -> int:
        return self.dim + 1

    @property
    def sample_counts(self) -> Tuple[int, ...]:
        return tuple(len(y) for y in self.client_labels)


def make_task(
    n_clients: int,
    samples_per_client: int,
    dim: int = 5,
    alpha: float = 1.0,
    seed: int = 0,
) -> SyntheticTask:
    """Build the synthetic task.

    Class means sit at +/- ``CLASS_SEPARATION`` along a random unit direction
    with isotropic Gaussian noise, so a linear model separates the classes
    comfortably.  ``alpha`` interpolates each client's positive-label rate
    between 0.5 (IID) and an alternating 0/1 extreme (disjoint).
    """
    if not 0.0 <= alpha <= 1.0:
        raise ConfigurationError("alpha must lie in [0, 1]")
    if n_clients < 1 or samples_per_client < 2 or dim < 1:
        raise ConfigurationError("degenerate task size")
    rng = np.random.default_rng(derive_seed(seed, "task"))
    direction = rng.normal(size=dim)
    direction /= np.linalg.norm(direction)
    mean_pos = CLASS_SEPARATION * direction
    mean_neg = -CLASS_SEPARATION * direction

    def draw(labels: np.ndarray) -> np.ndarray:
        noise = rng.normal(scale=NOISE_SIGMA, size=(len(labels), dim))
        means = np.where(labels[:, None] == 1, mean_pos, mean_neg)
        return means + noise

    client_features, client_labels = [], []
    for i in range(n_clients):
        extreme = float(i % 2)
        p_pos = alpha * 0.5 + (1.0 - alpha) * extreme
        labels = (rng.random(samples_per_client) < p_pos).astype(np.int64)
        client_labels.append(labels)
        client_features.append(draw(labels))
    holdout_labels = np.arange(HOLDOUT_SAMPLES) % 2
    holdout_features = draw(holdout_labels)
    return SyntheticTask(
        dim=dim,
        client_features=client_features,
        client_labels=client_labels,
        holdout_features=holdout_features,
        holdout_labels=holdout_labels,
    )


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def local_train(
    model: ModelVector,
    features: np.ndarray,
    labels: np.ndarray,
    params: TrainParams,
    seed: int,
) -> ModelVector:
    """Mini-batch SGD with momentum on the logistic loss.

    Deterministic given ``seed``; the caller derives one seed per
    (round, client) so encrypted and plaintext pipelines can replay the exact
    same batch order.
    """
    rng = np.random.default_rng(seed)
    w = model.as_array()[:-1].copy()
    b = float(model.values[-1])
    velocity_w = np.zeros_like(w)
    velocity_b = 0.0
    n = len(labels)
    for _ in range(params.epochs):
        order = rng.permutation(n)
        for start in range(0, n, params.batch_size):
            idx = order[start : start + params.batch_size]
            xb, yb = features[idx], labels[idx]
            err = _sigmoid(xb @ w + b) - yb
            grad_w = xb.T @ err / len(idx)
            grad_b = float(err.mean())
            velocity_w = params.momentum * velocity_w - params.learning_rate * grad_w
            velocity_b = params.momentum * velocity_b - params.learning_rate * grad_b
            w = w + velocity_w
            b = b + velocity_b
    return ModelVector.from_array(np.concatenate([w, [b]]))


def accuracy(model: ModelVector, features: np.ndarray, labels: np.ndarray) -> float:
    arr = model.as_array()
    scores = features @ arr[:-1] + arr[-1]
    return float(((scores >= 0).astype(np.int64) == labels).mean())


def fedavg_oracle(models: Sequence[ModelVector], counts: Sequence[int]) -> ModelVector:
    """Exact plaintext weighted average: sum_i (N_i / N) * model_i."""
    if len(models) != len(counts) or not models:
        raise ConfigurationError("one sample count per model required")
    total = float(sum(counts))
    acc = np.zeros(len(models[0]), dtype=np.float64)
    for model, count in zip(models, counts):
        acc += (count / total) * model.as_array()
    return ModelVector.from_array(acc)


def fedavg_trajectory(
    task: SyntheticTask,
    rounds: int,
    params: TrainParams,
    seed: int,
) -> List[ModelVector]:
    """Plaintext FedAvg reference run: returns the global model after each
    round, starting from zeros, with per-(round, client) training streams
    derived from ``seed`` exactly as the encrypted pipeline derives them."""
    global_model = ModelVector.zeros(task.model_length)
    trajectory = []
    counts = task.sample_counts
    for round_no in range(1, rounds + 1):
        locals_ = [
            local_train(
                global_model,
                task.client_features[i],
                task.client_labels[i],
                params,
                derive_seed(seed, "train", round_no, i + 1),
            )
            for i in range(task.n_clients)
        ]
        global_model = fedavg_oracle(locals_, counts)
        trajectory.append(global_model)
    return trajectory
