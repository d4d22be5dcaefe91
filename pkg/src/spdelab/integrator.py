"""Exponential-Euler simulation of Galerkin mild solutions with additive noise.

The step is

    u_{i+1} = e^{-L dt} u_i + phi1(dt) N(u_i) + G dW_i,   phi1 = (1 - e^{-L dt}) / L,

so increment ``i`` enters at ``t_{i+1}`` and is then damped exactly by the
semigroup in later steps.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .model import ModelSpec, NoiseConfig, NumericalAbort
from .spectral import Basis, eval_N

DEFAULT_CEILING = 1e8


@dataclass(frozen=True, eq=False)
class BrownianPath:
    """Increments ``dW[i, k] ~ N(0, dt)`` regenerated exactly from the seed."""

    seed: int
    S: int
    dt: float
    increments: np.ndarray

    @property
    def d(self) -> int:
        return self.increments.shape[1]

    @property
    def T(self) -> float:
        return self.S * self.dt

    def values(self) -> np.ndarray:
        """Path ``W(t_i)``, shape ``(S + 1, d)``, with ``W(0) = 0``."""
        W = np.zeros((self.S + 1, self.d))
        np.cumsum(self.increments, axis=0, out=W[1:])
        return W

    def split(self, i: int) -> tuple["BrownianPath", "BrownianPath"]:
        """Two consecutive paths covering steps ``[0, i)`` and ``[i, S)``."""
        return (
            BrownianPath(self.seed, i, self.dt, self.increments[:i]),
            BrownianPath(self.seed, self.S - i, self.dt, self.increments[i:]),
        )

    def shifted(self, v: np.ndarray) -> "BrownianPath":
        """Path ``W + v`` for a shift given by its per-step increments."""
        return BrownianPath(self.seed, self.S, self.dt, self.increments + v)


def brownian_increments(seed, S: int, dt: float, d: int) -> np.ndarray:
    if S < 0 or d < 0:
        raise ValueError("step and channel counts must be nonnegative")
    if dt <= 0:
        raise ValueError("dt must be positive")
    rng = np.random.default_rng(seed)
    return rng.standard_normal((S, d)) * np.sqrt(dt)


def sample_brownian(seed: int, S: int, dt: float, d: int) -> BrownianPath:
    """Deterministic Brownian increments for ``(seed, S, dt, d)``."""
    inc = brownian_increments(seed, S, dt, d)
    inc.setflags(write=False)
    return BrownianPath(int(seed), S, float(dt), inc)


def path_seed(seed: int, sample: int) -> tuple[int, int]:
    """Seed of the ``sample``-th member of an ensemble rooted at ``seed``."""
    return (int(seed), int(sample))


def step_factors(basis: Basis, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Diagonals of ``e^{-L dt}`` and ``phi1(dt)``."""
    lam = basis.eigenvalues
    E = np.exp(-lam * dt)
    return E, -np.expm1(-lam * dt) / lam


def _check(u: np.ndarray, ceiling: float, i: int) -> None:
    n = np.sqrt(np.max(np.sum(u * u, axis=-1)))
    if not np.isfinite(n) or n > ceiling:
        raise NumericalAbort(f"state norm {n:.3e} exceeded ceiling {ceiling:.1e} at step {i}")


def _substeps(model: ModelSpec, u: np.ndarray, dt: float) -> int:
    """Deterministic sub-step count keeping ``dt_sub * |f'(u)|`` below 1/2."""
    basis = model.basis
    P = basis.grid_size(max(model.f.degree, 1))
    slope = np.max(np.abs(model.f.derivative()(basis.to_grid(u, P))))
    return max(1, int(np.ceil(2.0 * dt * slope)))


def integrate(
    model: ModelSpec,
    u0: np.ndarray,
    increments: np.ndarray,
    dt: float,
    ceiling: float = DEFAULT_CEILING,
    adaptive_substeps: bool = False,
) -> np.ndarray:
    """Batched exponential-Euler integration.

    Parameters
    ----------
    u0 : array (..., M)
    increments : array (..., S, d)
        Brownian increments, one row per step.
    adaptive_substeps : bool
        Split the deterministic part of each step into sub-steps sized by
        the current state. Meant for stiff transients from huge initial
        data; with it off the scheme is exactly the one above.

    Returns
    -------
    array (..., S + 1, M)
    """
    basis, f = model.basis, model.f
    u = np.array(u0, dtype=float)
    increments = np.asarray(increments, dtype=float)
    S = increments.shape[-2]
    batch = np.broadcast_shapes(u.shape[:-1], increments.shape[:-2])
    u = np.broadcast_to(u, batch + (basis.M,)).copy()
    noise = increments @ model.G if model.d else np.zeros(batch + (S, basis.M))
    E, phi1 = step_factors(basis, dt)
    out = np.empty(batch + (S + 1, basis.M))
    out[..., 0, :] = u
    nonlinear = not f.is_zero()
    for i in range(S):
        if adaptive_substeps and nonlinear:
            n = _substeps(model, u, dt)
            if n > 1:
                Es, ps = step_factors(basis, dt / n)
                for _ in range(n):
                    u = Es * u + ps * eval_N(basis, u, f)
                u = u + noise[..., i, :]
                _check(u, ceiling, i)
                out[..., i + 1, :] = u
                continue
        u = E * u + noise[..., i, :]
        if nonlinear:
            u = u + phi1 * eval_N(basis, out[..., i, :], f)
        _check(u, ceiling, i)
        out[..., i + 1, :] = u
    return out


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States ``u_0..u_S`` on the grid ``t_i = t0 + i dt`` and their noise."""

    model: ModelSpec
    path: BrownianPath
    states: np.ndarray
    t0: float = 0.0

    @property
    def S(self) -> int:
        return self.path.S

    @property
    def dt(self) -> float:
        return self.path.dt

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.S + 1)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def simulate(
    u0: np.ndarray,
    path: BrownianPath,
    model: ModelSpec,
    ceiling: float = DEFAULT_CEILING,
    adaptive_substeps: bool = False,
    t0: float = 0.0,
) -> Trajectory:
    """Integrate one path; see :func:`integrate`."""
    if path.d != model.d:
        raise ValueError(f"path has {path.d} channels, model has {model.d}")
    u0 = np.asarray(u0, dtype=float)
    if u0.shape != (model.M,):
        raise ValueError("initial condition has the wrong shape")
    states = integrate(model, u0, path.increments, path.dt, ceiling, adaptive_substeps)
    states.setflags(write=False)
    return Trajectory(model, path, states, t0)


def stochastic_convolution(
    basis: Basis, noise: NoiseConfig, path: BrownianPath, s_idx: int, t_idx: int
) -> np.ndarray:
    """``sum_{s <= i < t} e^{-L (t - i - 1) dt} G dW_i``."""
    if s_idx > t_idx:
        raise ValueError("s_idx must not exceed t_idx")
    if not 0 <= s_idx <= t_idx <= path.S:
        raise IndexError("interval outside the path")
    if noise.d == 0 or s_idx == t_idx:
        return np.zeros(basis.M)
    lags = (t_idx - 1 - np.arange(s_idx, t_idx))[:, None] * path.dt
    forced = path.increments[s_idx:t_idx] @ noise.directions
    return np.sum(np.exp(-basis.eigenvalues * lags) * forced, axis=0)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def trajectory_to_csv(traj: Trajectory) -> str:
    """Columns ``t, c_1..c_M``; floats round-trip exactly."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + [f"c_{k + 1}" for k in range(traj.model.M)])
    for t, u in zip(traj.times, traj.states):
        w.writerow([_fmt(t)] + [_fmt(x) for x in u])
    return buf.getvalue()


def path_to_csv(path: BrownianPath) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step"] + [f"dW_{k + 1}" for k in range(path.d)])
    for i, row in enumerate(path.increments):
        w.writerow([i] + [_fmt(x) for x in row])
    return buf.getvalue()


def _read_numeric(text: str) -> np.ndarray:
    rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].startswith("#")]
    return np.array([[float(x) for x in r] for r in rows[1:]], dtype=float)


def states_from_csv(text: str) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`trajectory_to_csv`: ``(times, states)``."""
    a = _read_numeric(text)
    return a[:, 0], a[:, 1:]


def increments_from_csv(text: str) -> np.ndarray:
    a = _read_numeric(text)
    return a[:, 1:]
