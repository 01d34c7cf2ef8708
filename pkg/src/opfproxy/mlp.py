"""One-hidden-layer perceptron trained by mini-batch gradient descent.

Hidden units use ``tanh``. The output is linear with squared loss
(``loss="mse"``, mean of ``0.5 * (yhat - y)**2``) or a sigmoid with binary
cross-entropy (``loss="bce"``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Mlp", "MlpSchedule", "init_mlp", "loss_and_grad", "train_mlp"]


@dataclass(frozen=True)
class MlpSchedule:
    hidden: int = 10
    epochs: int = 200
    batch_size: int = 32
    learning_rate: float = 0.01
    decay: float = 0.5
    decay_every: int = 50

    def __post_init__(self):
        if self.hidden < 1 or self.epochs < 0 or self.batch_size < 1 or self.decay_every < 1:
            raise ValueError(f"invalid MLP schedule {self}")
        if not (self.learning_rate > 0 and 0 < self.decay <= 1):
            raise ValueError("learning_rate must be > 0 and decay in (0, 1]")


@dataclass
class Mlp:
    W1: np.ndarray  # (d, h)
    b1: np.ndarray  # (h,)
    w2: np.ndarray  # (h,)
    b2: float
    loss: str  # "mse" | "bce"

    def params(self) -> list[np.ndarray]:
        return [self.W1, self.b1, self.w2, np.array([self.b2])]

    def output(self, X: np.ndarray) -> np.ndarray:
        """Network output: raw value for ``mse``, probability for ``bce``."""
        z = np.tanh(X @ self.W1 + self.b1) @ self.w2 + self.b2
        if self.loss == "bce":
            return 1.0 / (1.0 + np.exp(-z))
        return z

    def output_one(self, x: np.ndarray) -> float:
        z = float(np.tanh(x @ self.W1 + self.b1) @ self.w2) + self.b2
        if self.loss == "bce":
            # Sign of z decides the class; avoid exp overflow for large |z|.
            return 1.0 / (1.0 + np.exp(-z)) if z > -700 else 0.0
        return z


def init_mlp(d: int, hidden: int, loss: str, rng: np.random.Generator) -> Mlp:
    """Weights uniform in +-1/sqrt(fan_in)."""
    if loss not in ("mse", "bce"):
        raise ValueError(f"unknown loss {loss!r}")
    r1 = 1.0 / np.sqrt(d)
    r2 = 1.0 / np.sqrt(hidden)
    return Mlp(
        W1=rng.uniform(-r1, r1, size=(d, hidden)),
        b1=rng.uniform(-r1, r1, size=hidden),
        w2=rng.uniform(-r2, r2, size=hidden),
        b2=float(rng.uniform(-r2, r2)),
        loss=loss,
    )


def loss_and_grad(net: Mlp, X: np.ndarray, y: np.ndarray):
    """Mean batch loss and its gradient ``(dW1, db1, dw2, db2)``."""
    n = len(X)
    h = np.tanh(X @ net.W1 + net.b1)
    z = h @ net.w2 + net.b2
    if net.loss == "bce":
        # log(1 + e^z) - y z, written stably.
        loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
        dz = (1.0 / (1.0 + np.exp(-z)) - y) / n
    else:
        r = z - y
        loss = float(0.5 * np.mean(r * r))
        dz = r / n
    dw2 = h.T @ dz
    db2 = float(dz.sum())
    dh = np.outer(dz, net.w2) * (1.0 - h * h)
    dW1 = X.T @ dh
    db1 = dh.sum(axis=0)
    return loss, (dW1, db1, dw2, db2)


def train_mlp(X: np.ndarray, y: np.ndarray, loss: str, schedule: MlpSchedule, rng: np.random.Generator) -> Mlp:
    """Shuffled mini-batch gradient descent; the step halves every ``decay_every`` epochs."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    net = init_mlp(d, schedule.hidden, loss, rng)
    W1, b1, w2, b2 = net.W1, net.b1, net.w2, net.b2
    bs = schedule.batch_size
    bce = loss == "bce"
    for epoch in range(schedule.epochs):
        lr = schedule.learning_rate * schedule.decay ** (epoch // schedule.decay_every)
        perm = rng.permutation(n)
        for start in range(0, n, bs):
            idx = perm[start:start + bs]
            xb, yb = X[idx], y[idx]
            h = np.tanh(xb @ W1 + b1)
            z = h @ w2 + b2
            if bce:
                dz = (1.0 / (1.0 + np.exp(-z)) - yb) / len(idx)
            else:
                dz = (z - yb) / len(idx)
            dh = np.outer(dz, w2) * (1.0 - h * h)
            w2 -= lr * (h.T @ dz)
            b2 -= lr * float(dz.sum())
            W1 -= lr * (xb.T @ dh)
            b1 -= lr * dh.sum(axis=0)
    net.b2 = b2
    return net
