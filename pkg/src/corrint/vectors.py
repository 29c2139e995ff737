"""Truncated model of a separable Banach space and its dual.

Points of the space and of its dual are both represented by length-``d``
float64 coordinate vectors against a biorthogonal system: coordinate ``m``
of a primal vector is the value the ``m``-th dual basis functional takes on
it, and symmetrically on the dual side.  Basis vectors are unit in every
supported norm flavor, so normalizing denominators in series constructions
are literal ones.

Besides the three norm flavors, the module carries the two weighted-l1
metrics used for weak and weak-star convergence diagnostics: both weigh the
``m``-th coordinate gap by ``2**-(m+1)`` (0-based indexing; the weight
convention only scales absolute metric values, never convergence verdicts).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import PreconditionError

NORM_SUM = "sum"       # l1
NORM_EUCLID = "euclid"  # l2
NORM_MAX = "max"       # l-infinity
_FLAVORS = (NORM_SUM, NORM_EUCLID, NORM_MAX)

TOPOLOGY_NORM = "norm"
TOPOLOGY_WEAK = "weak"            # rho_w diagnostics (primal reading)
TOPOLOGY_WEAK_STAR = "weak_star"  # d_w diagnostics (dual reading)
_TOPOLOGIES = (TOPOLOGY_NORM, TOPOLOGY_WEAK, TOPOLOGY_WEAK_STAR)


@dataclass(frozen=True)
class Workspace:
    """Ambient truncation: dimension, norm flavor, and convergence topology."""

    d: int
    norm_flavor: str = NORM_EUCLID
    topology: str = TOPOLOGY_NORM

    def __post_init__(self):
        if self.d < 1:
            raise PreconditionError(f"truncation dimension must be >= 1, got {self.d}")
        if self.norm_flavor not in _FLAVORS:
            raise PreconditionError(f"unknown norm flavor {self.norm_flavor!r}")
        if self.topology not in _TOPOLOGIES:
            raise PreconditionError(f"unknown topology tag {self.topology!r}")

    def check(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.d,):
            raise PreconditionError(f"expected vector of shape ({self.d},), got {v.shape}")
        return v

    def metric_mode(self) -> tuple[int, np.ndarray]:
        """(kernel mode, coordinate weights) for the workspace topology."""
        if self.topology in (TOPOLOGY_WEAK, TOPOLOGY_WEAK_STAR):
            return _kernels.MODE_WSUM, half_weights(self.d)
        return norm_mode(self.norm_flavor, self.d)


def zero_vector(d: int) -> np.ndarray:
    return np.zeros(d)


def basis_vector(n: int, d: int) -> np.ndarray:
    if not 0 <= n < d:
        raise IndexError(f"basis index {n} outside truncation of dimension {d}")
    v = np.zeros(d)
    v[n] = 1.0
    return v


def dual_pairing(m: int, v: np.ndarray) -> float:
    """Value of the m-th biorthogonal functional on v (its m-th coordinate)."""
    v = np.asarray(v, dtype=float)
    if not 0 <= m < v.shape[0]:
        raise IndexError(f"dual index {m} outside truncation of dimension {v.shape[0]}")
    return float(v[m])


def norm(v: np.ndarray, flavor: str = NORM_EUCLID) -> float:
    v = np.asarray(v, dtype=float)
    if flavor == NORM_SUM:
        return float(np.sum(np.abs(v)))
    if flavor == NORM_EUCLID:
        return float(np.sqrt(np.sum(v * v)))
    if flavor == NORM_MAX:
        return float(np.max(np.abs(v))) if v.size else 0.0
    raise PreconditionError(f"unknown norm flavor {flavor!r}")


def half_weights(d: int) -> np.ndarray:
    """Coordinate weights 2**-(m+1), m = 0..d-1."""
    return 0.5 ** (np.arange(d, dtype=float) + 1.0)


def rho_w(v: np.ndarray, w: np.ndarray) -> float:
    """Weak-convergence metric: weighted l1 gap against the dual basis."""
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    return float(np.sum(half_weights(v.shape[0]) * np.abs(v - w)))


def d_w(v: np.ndarray, w: np.ndarray) -> float:
    """Weak-star metric on the dual side; same arithmetic at truncation."""
    return rho_w(v, w)


def norm_mode(flavor: str, d: int) -> tuple[int, np.ndarray]:
    """(kernel mode, weights) pair implementing a norm flavor."""
    ones = np.ones(d)
    if flavor == NORM_SUM:
        return _kernels.MODE_WSUM, ones
    if flavor == NORM_EUCLID:
        return _kernels.MODE_EUCLID, ones
    if flavor == NORM_MAX:
        return _kernels.MODE_MAX, ones
    raise PreconditionError(f"unknown norm flavor {flavor!r}")


def vectors_to_json(vs) -> list[list[float]]:
    return [[float(x) for x in np.asarray(v)] for v in vs]
