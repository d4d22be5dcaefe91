"""Model container shared by the integrator, flows and experiments."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spectral import Basis, LocalPolynomial


class NumericalAbort(RuntimeError):
    """Raised when a simulation or solver leaves its safe operating range."""


@dataclass(frozen=True, eq=False)
class NoiseConfig:
    """Forcing directions ``g_1..g_d`` stored as rows of a ``(d, M)`` array."""

    directions: np.ndarray

    def __post_init__(self):
        G = np.array(self.directions, dtype=float)
        if G.ndim != 2:
            raise ValueError("noise directions must be a (d, M) array")
        if not np.all(np.isfinite(G)):
            raise ValueError("noise directions must be finite")
        G.setflags(write=False)
        object.__setattr__(self, "directions", G)

    @property
    def d(self) -> int:
        return self.directions.shape[0]

    @classmethod
    def none(cls, M: int) -> "NoiseConfig":
        return cls(np.zeros((0, M)))


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """``du = -L u dt + N(u) dt + G dW`` on a truncated circle basis.

    ``f`` already contains the shift moved out of ``L``; ``s`` is the
    exponent of the ambient space ``H_s`` used for norms and adjoints.
    """

    basis: Basis
    f: LocalPolynomial
    noise: NoiseConfig
    s: float = 0.0
    nu: float = 1.0
    eta: float = 0.0
    name: str = "model"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.noise.directions.shape[1] != self.basis.M:
            raise ValueError("noise directions do not match the basis size")
        if self.s < 0:
            raise ValueError("base-space exponent must be nonnegative")
        if self.f.s != self.s:
            object.__setattr__(self, "f", LocalPolynomial(self.f.coefficients, self.s))

    @property
    def M(self) -> int:
        return self.basis.M

    @property
    def d(self) -> int:
        return self.noise.d

    @property
    def G(self) -> np.ndarray:
        """Rows are the forcing directions; noise enters as ``dW @ G``."""
        return self.noise.directions

    @property
    def weights(self) -> np.ndarray:
        return self.basis.weights(self.s)

    def norm(self, u) -> np.ndarray:
        """``H_s`` norm."""
        return np.sqrt(self.basis.inner(u, u, self.s))

    def with_noise(self, G) -> "ModelSpec":
        return ModelSpec(self.basis, self.f, NoiseConfig(G), self.s, self.nu, self.eta, self.name, dict(self.meta))

    def with_f(self, f: LocalPolynomial) -> "ModelSpec":
        return ModelSpec(self.basis, f, self.noise, self.s, self.nu, self.eta, self.name, dict(self.meta))
