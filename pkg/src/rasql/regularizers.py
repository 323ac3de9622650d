"""Policy regularizers on the action simplex and their convex conjugates.

Each regularizer exposes ``omega(p)``, the conjugate ``conjugate(q)`` (the
maximum of ``<p, q> - omega(p)`` over the simplex) and its maximizer
``gradient(q)``. Array methods act on the last axis, so a whole Q-table can
be passed at once. ``conjugate_row`` is a scalar fast path for the learners'
inner loops.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, softmax, xlogy

SIMPLEX_TOL = 1e-9


def _as_distribution(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if np.any(p < -SIMPLEX_TOL):
        raise ValueError(f"distribution has a negative entry: {p.min()}")
    p = np.clip(p, 0.0, None)
    total = p.sum(axis=-1, keepdims=True)
    if np.any(np.abs(total - 1.0) > SIMPLEX_TOL):
        raise ValueError("distribution does not sum to 1 within 1e-9")
    return p / total


def _finite(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if not np.all(np.isfinite(q)):
        raise ValueError("Q values must be finite")
    return q


@dataclass(frozen=True)
class Entropy:
    """Negative-entropy regularizer ``(1/beta) sum p log p``."""

    beta: float = 1.0

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")

    @property
    def strong_convexity(self) -> float:
        # w.r.t. the l1 norm (Pinsker)
        return 1.0 / self.beta

    def omega(self, p) -> np.ndarray | float:
        p = _as_distribution(p)
        return xlogy(p, p).sum(axis=-1) / self.beta

    def conjugate(self, q) -> np.ndarray | float:
        q = _finite(q)
        return logsumexp(self.beta * q, axis=-1) / self.beta

    def gradient(self, q) -> np.ndarray:
        q = _finite(q)
        return softmax(self.beta * q, axis=-1)

    def conjugate_row(self, q) -> float:
        m = max(q)
        b = self.beta
        return m + math.log(math.fsum(math.exp(b * (x - m)) for x in q)) / b

    def to_dict(self) -> dict:
        return {"kind": "entropy", "beta": self.beta}


@dataclass(frozen=True)
class KL:
    """KL regularizer ``(1/beta) sum p log(p / ref)`` against a reference policy."""

    beta: float
    ref: tuple

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        ref = np.asarray(self.ref, dtype=float)
        if ref.ndim != 1 or np.any(ref <= 0) or abs(ref.sum() - 1.0) > 1e-12:
            raise ValueError("ref must be a strictly positive probability vector")
        object.__setattr__(self, "ref", tuple(float(x) for x in ref))
        object.__setattr__(self, "_log_ref", np.log(ref))

    @property
    def strong_convexity(self) -> float:
        return 1.0 / self.beta

    def omega(self, p) -> np.ndarray | float:
        p = _as_distribution(p)
        return (xlogy(p, p) - p * self._log_ref).sum(axis=-1) / self.beta

    def conjugate(self, q) -> np.ndarray | float:
        q = _finite(q)
        return logsumexp(self.beta * q + self._log_ref, axis=-1) / self.beta

    def gradient(self, q) -> np.ndarray:
        q = _finite(q)
        return softmax(self.beta * q + self._log_ref, axis=-1)

    def conjugate_row(self, q) -> float:
        m = max(q)
        b = self.beta
        return m + math.log(math.fsum(w * math.exp(b * (x - m))
                                      for w, x in zip(self.ref, q))) / b

    def to_dict(self) -> dict:
        return {"kind": "kl", "beta": self.beta, "ref": list(self.ref)}


@dataclass(frozen=True)
class Unregularized:
    """Zero regularizer: its conjugate is the hard max (plain Q-learning).

    Not strongly convex, so ``gradient`` picks the first maximizer and the
    greedy policy is deterministic.
    """

    @property
    def strong_convexity(self) -> float:
        return 0.0

    def omega(self, p) -> np.ndarray | float:
        p = _as_distribution(p)
        return np.zeros(p.shape[:-1]) if p.ndim > 1 else 0.0

    def conjugate(self, q) -> np.ndarray | float:
        return _finite(q).max(axis=-1)

    def gradient(self, q) -> np.ndarray:
        q = _finite(q)
        out = np.zeros_like(q)
        np.put_along_axis(out, q.argmax(axis=-1)[..., None], 1.0, axis=-1)
        return out

    def conjugate_row(self, q) -> float:
        return max(q)

    def to_dict(self) -> dict:
        return {"kind": "none"}


Regularizer = Entropy | KL | Unregularized


def omega(reg: Regularizer, p):
    return reg.omega(p)


def omega_conjugate(reg: Regularizer, q):
    return reg.conjugate(q)


def grad_omega_conjugate(reg: Regularizer, q):
    return reg.gradient(q)


def make_regularizer(spec: dict) -> Regularizer:
    """Build from a config mapping ``{kind, beta, ref?}``."""
    kind = spec.get("kind", "entropy").lower()
    if kind == "entropy":
        return Entropy(float(spec.get("beta", 1.0)))
    if kind == "kl":
        return KL(float(spec.get("beta", 1.0)), tuple(spec["ref"]))
    if kind in ("none", "max", "unregularized"):
        return Unregularized()
    raise ValueError(f"unknown regularizer kind {kind!r}")
