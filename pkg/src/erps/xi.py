"""Laws for the global action-valued variable ``xi`` (zero mean, variance hbar^2)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidXi

MEAN_TOL = 1e-12
VAR_RTOL = 1e-9
KINDS = ("two_point", "gaussian", "custom_discrete")


@dataclass(frozen=True, eq=False)
class XiDistribution:
    """A law ``chi(xi)`` held as weighted atoms.

    For ``kind="gaussian"`` the atoms are a Gauss-Hermite discretization
    used for deterministic quadrature, and :meth:`sample` draws from the
    continuous normal law instead.
    """

    kind: str
    values: np.ndarray
    weights: np.ndarray
    hbar: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidXi(f"unknown xi kind {self.kind!r}; expected one of {KINDS}")
        values = np.array(self.values, dtype=float)
        weights = np.array(self.weights, dtype=float)
        values.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "hbar", float(self.hbar))
        if values.ndim != 1 or values.shape != weights.shape or values.size == 0:
            raise InvalidXi("values and weights must be equal-length 1D arrays")
        if not (np.all(np.isfinite(values)) and np.all(np.isfinite(weights))):
            raise InvalidXi("atoms must be finite")
        if np.any(weights < 0):
            raise InvalidXi("weights must be nonnegative")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise InvalidXi(f"weights must sum to 1, got {weights.sum()!r}")
        if abs(self.mean) > MEAN_TOL * max(1.0, self.hbar):
            raise InvalidXi(f"xi must have zero mean, got {self.mean!r}")
        if abs(self.variance - self.hbar**2) > VAR_RTOL * self.hbar**2:
            raise InvalidXi(f"xi must have variance hbar^2 = {self.hbar**2!r}, got {self.variance!r}")

    @classmethod
    def two_point(cls, hbar=1.0):
        """``chi = (delta(xi - hbar) + delta(xi + hbar)) / 2``."""
        return cls("two_point", [hbar, -hbar], [0.5, 0.5], hbar)

    @classmethod
    def gaussian(cls, hbar=1.0, n_atoms=16):
        nodes, w = np.polynomial.hermite_e.hermegauss(n_atoms)
        w = w / w.sum()
        nodes = 0.5 * (nodes - nodes[::-1])
        nodes = nodes / np.sqrt(np.sum(w * nodes**2))
        return cls("gaussian", hbar * nodes, w, hbar)

    @classmethod
    def custom_discrete(cls, values, weights, hbar=1.0):
        return cls("custom_discrete", values, weights, hbar)

    @classmethod
    def from_spec(cls, spec, hbar=1.0):
        """Parse a CLI-style spec: ``two_point``, ``gaussian[:n]`` or ``custom:v1/w1,v2/w2,...``."""
        if spec is None or spec == "two_point":
            return cls.two_point(hbar)
        if spec.startswith("gaussian"):
            _, _, n = spec.partition(":")
            return cls.gaussian(hbar, int(n) if n else 16)
        if spec.startswith("custom:"):
            pairs = [item.split("/") for item in spec[len("custom:"):].split(",")]
            return cls.custom_discrete([float(v) for v, _ in pairs], [float(w) for _, w in pairs], hbar)
        raise InvalidXi(f"cannot parse xi spec {spec!r}")

    @property
    def mean(self):
        return float(np.dot(self.weights, self.values))

    @property
    def variance(self):
        return float(np.dot(self.weights, self.values**2)) - self.mean**2

    @property
    def atoms(self):
        return list(zip(self.values.tolist(), self.weights.tolist()))

    def sample(self, rng, size):
        if self.kind == "gaussian":
            return rng.normal(0.0, self.hbar, size)
        return rng.choice(self.values, size=size, p=self.weights)
