"""Rothe time slicing with the relaxed energy, and the outer fixed point.

Each time slice minimizes::

    E(v) = sum(alpha * Psi**(|grad v|)) + m/(2T) * ||v - u_prev||^2
           + ||(v - f) / w_j||^2 / 2

over ``v`` in ``[l, d]`` by projected gradient descent. The convex
envelope makes each slice problem convex. ``fixed_point`` then feeds the
resulting trajectory back in as the weight ``w`` of the fidelity term.

Meant for small grids (1D up to 512 cells, 2D up to 64x64) used to check
estimates, not for denoising real images.
"""
import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import grid
from .flux import ConvexEnvelope, FluxParams, convexify, psi_star, q_star, radial_profile

MAX_1D = 512
MAX_2D = 64


@dataclass(frozen=True)
class RotheConfig:
    m: int = 8
    T: float = 1.0
    inner_tol: float = 1e-9  # sup-norm of the projected-gradient map
    inner_max: int = 10_000
    armijo_shrink: float = 0.5
    step_grow: float = 2.0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")
        if not self.inner_tol > 0:
            raise ValueError("inner_tol must be positive")
        if not 0 < self.armijo_shrink < 1:
            raise ValueError("armijo_shrink must lie in (0, 1)")

    @property
    def coupling(self):
        return self.m / self.T


@dataclass(frozen=True)
class EnergyBreakdown:
    gradient_term: float
    coupling_term: float
    fidelity_term: float

    @property
    def total(self):
        return self.gradient_term + self.coupling_term + self.fidelity_term


def envelope_for_range(params: FluxParams, low, high, ndim=1, n=50_001) -> ConvexEnvelope:
    """Envelope sampled far enough to cover every gradient of a field in ``[low, high]``."""
    s_max = max(50.0, math.sqrt(ndim) * (high - low) * 1.05)
    return convexify(radial_profile(params, s_max, n))


def _check_desk(v):
    if v.ndim == 1 and v.size > MAX_1D:
        raise ValueError(f"1D grids are limited to {MAX_1D} cells here")
    if v.ndim == 2 and max(v.shape) > MAX_2D:
        raise ValueError(f"2D grids are limited to {MAX_2D}x{MAX_2D} here")
    if v.ndim not in (1, 2):
        raise ValueError("only 1D and 2D grids are supported")


def truncate(v, low, high):
    """Pointwise clamp to ``[low, high]``."""
    if not low < high:
        raise ValueError(f"truncation needs low < high, got [{low}, {high}]")
    return np.clip(np.asarray(v, dtype=float), low, high)


def gradient_energy(v, alpha, env):
    return float(np.sum(alpha * psi_star(grid.gradient_magnitude(v), env)))


def energy(v, u_prev, w_j, f, alpha, env: ConvexEnvelope, cfg: RotheConfig,
           low=None) -> EnergyBreakdown:
    """Per-term value of the relaxed slice energy; ``low`` defaults to ``min(f)``."""
    v = np.asarray(v, dtype=float)
    w_j = np.asarray(w_j, dtype=float)
    low = float(np.min(f)) if low is None else low
    if np.any(w_j < low) or low <= 0:
        raise ValueError("w_j must stay at or above the positive lower bound l")
    return EnergyBreakdown(
        gradient_energy(v, alpha, env),
        0.5 * cfg.coupling * float(np.sum((v - u_prev) ** 2)),
        0.5 * float(np.sum(((v - f) / w_j) ** 2)),
    )


def _gradient(v, u_prev, inv_w2, f, alpha, env, coupling):
    parts = [grid.forward_diff(v, axis) for axis in range(v.ndim)]
    mag = np.sqrt(sum(g**2 for g in parts))
    safe = np.where(mag > 0, mag, 1.0)
    scale = np.where(mag > 0, q_star(mag, env) / safe, 0.0)
    div = grid.divergence_nd([scale * g for g in parts], alpha)
    return -div + coupling * (v - u_prev) + (v - f) * inv_w2


def minimize_slice(u_prev, w_j, f, alpha, env: ConvexEnvelope, cfg: RotheConfig,
                   bounds=None) -> np.ndarray:
    """Minimize the relaxed slice energy over ``[l, d]``, starting from ``u_prev``.

    Projected gradient descent with backtracking on a curvature test that
    guarantees descent for the convex relaxed energy. The result never has
    more energy than ``u_prev``.
    """
    u_prev = np.asarray(u_prev, dtype=float)
    f = np.asarray(f, dtype=float)
    w_j = np.broadcast_to(np.asarray(w_j, dtype=float), f.shape)
    alpha = np.broadcast_to(np.asarray(alpha, dtype=float), f.shape)
    _check_desk(f)
    low, high = (float(f.min()), float(f.max())) if bounds is None else bounds
    if np.any(w_j < low) or low <= 0:
        raise ValueError("w_j must stay at or above the positive lower bound l")
    inv_w2 = 1.0 / w_j**2
    coupling = cfg.coupling

    def total(v):
        e = (gradient_energy(v, alpha, env) + 0.5 * coupling * np.sum((v - u_prev) ** 2)
             + 0.5 * np.sum((v - f) ** 2 * inv_w2))
        if not np.isfinite(e):
            raise FloatingPointError("slice energy is not finite")
        return float(e)

    def grad(v):
        return _gradient(v, u_prev, inv_w2, f, alpha, env, coupling)

    v = truncate(u_prev, low, high)
    g = grad(v)
    t = 1.0 / (coupling + float(np.max(inv_w2)) + 8.0 * float(np.max(alpha)))
    for _ in range(cfg.inner_max):
        while True:
            trial = np.clip(v - t * g, low, high)
            diff = trial - v
            g_trial = grad(trial)
            # for convex E this curvature test forces E(trial) <= E(v) - |diff|^2/(2t),
            # and unlike comparing energies it does not drown in rounding near the optimum
            if float(np.sum((g_trial - g) * diff)) <= float(np.sum(diff**2)) / (2 * t):
                break
            t *= cfg.armijo_shrink
            if t < 1e-300:
                raise FloatingPointError("line search failed to find a descent step")
        v, g = trial, g_trial
        if float(np.max(np.abs(diff))) / t <= cfg.inner_tol:
            break
        t *= cfg.step_grow
    if total(v) > total(truncate(u_prev, low, high)):
        # only reachable through rounding when u_prev is already optimal
        return truncate(u_prev, low, high)
    return v


@dataclass
class RotheTrajectory:
    slices: np.ndarray  # (m + 1, *grid) with slices[0] = f
    T: float
    start_energies: list = field(default_factory=list)  # E(u_{j-1}; u_{j-1})
    end_energies: list = field(default_factory=list)  # E(u_j; u_{j-1})
    gradient_energies: list = field(default_factory=list)  # sum(alpha Psi**(|grad u_j|)), j = 0..m

    @property
    def m(self):
        return self.slices.shape[0] - 1

    @property
    def apriori_sum(self):
        """``(m/T) * sum_j ||u_j - u_{j-1}||^2``."""
        steps = np.diff(self.slices, axis=0)
        return float(self.m / self.T * np.sum(steps**2))

    def _locate(self, t):
        if not 0 <= t <= self.T:
            raise ValueError(f"t must lie in [0, {self.T}]")
        h = self.T / self.m
        j = min(max(math.ceil(t / h - 1e-12), 1), self.m)
        return j, (t - (j - 1) * h) / h

    def u_at(self, t):
        """Piecewise-linear interpolant through the slices."""
        j, lam = self._locate(t)
        return self.slices[j - 1] + lam * (self.slices[j] - self.slices[j - 1])

    def v_at(self, t):
        """Piecewise-constant interpolant: ``u_j`` on ``((j-1)h, jh]``."""
        if t == 0:
            return self.slices[0]
        return self.slices[self._locate(t)[0]]


def rothe_sweep(f, w, alpha, env: ConvexEnvelope, cfg: RotheConfig, bounds=None) -> RotheTrajectory:
    """Chain of slice minimizations from ``u_0 = f``.

    ``w`` is either one grid (constant in time) or ``m`` grids holding
    ``w(., jT/m)`` for ``j = 1..m``.
    """
    f = np.asarray(f, dtype=float)
    _check_desk(f)
    low, high = (float(f.min()), float(f.max())) if bounds is None else bounds
    w = np.asarray(w, dtype=float)
    if w.shape == f.shape:
        w = np.broadcast_to(w, (cfg.m, *f.shape))
    if w.shape != (cfg.m, *f.shape):
        raise ValueError(f"w must have shape {f.shape} or {(cfg.m, *f.shape)}, got {w.shape}")
    if np.any(w < low) or np.any(w > high):
        raise ValueError("w must lie in [l, d]")
    alpha = np.broadcast_to(np.asarray(alpha, dtype=float), f.shape)

    slices = [f.copy()]
    traj = RotheTrajectory(np.empty(0), cfg.T)
    traj.gradient_energies.append(gradient_energy(f, alpha, env))
    for j in range(1, cfg.m + 1):
        prev = slices[-1]
        traj.start_energies.append(energy(prev, prev, w[j - 1], f, alpha, env, cfg, low))
        u = minimize_slice(prev, w[j - 1], f, alpha, env, cfg, (low, high))
        traj.end_energies.append(energy(u, prev, w[j - 1], f, alpha, env, cfg, low))
        traj.gradient_energies.append(gradient_energy(u, alpha, env))
        slices.append(u)
    traj.slices = np.stack(slices)
    return traj


def measured_c0(traj: RotheTrajectory) -> float:
    """Smallest ``C0 >= 0`` meeting the per-slice iteration inequality

    ``G_j + m/(4T) ||u_j - u_{j-1}||^2 <= (1 + C0/m) G_{j-1} + C0/m``

    with ``G_j`` the gradient energy of slice ``j``.
    """
    m, g = traj.m, traj.gradient_energies
    steps = np.sum(np.diff(traj.slices, axis=0) ** 2, axis=tuple(range(1, traj.slices.ndim)))
    need = [m * (g[j] + m / (4 * traj.T) * steps[j - 1] - g[j - 1]) / (g[j - 1] + 1.0)
            for j in range(1, m + 1)]
    return max(0.0, max(need))


def apriori_bound(g0, c0):
    """``(C0 e^C0 + 1) G_0 + C0 e^C0 + C0``, a bound on ``m/(4T) sum ||u_j - u_{j-1}||^2``."""
    ec = c0 * math.exp(c0)
    return (ec + 1.0) * g0 + ec + c0


@dataclass
class FixedPointResult:
    trajectory: RotheTrajectory
    iterations: int
    distances: list
    converged: bool


def fixed_point(f, alpha, env: ConvexEnvelope, cfg: RotheConfig, outer_tol=1e-6,
                outer_max=50, bounds=None) -> FixedPointResult:
    """Iterate ``w -> u_w`` starting from ``w = f`` at every slice time.

    The distance between successive ``w`` is the discrete ``L^2(Q_T)`` norm
    over slice times ``jT/m``. Failure to converge is reported through
    ``converged=False``.
    """
    f = np.asarray(f, dtype=float)
    if np.any(f <= 0):
        raise ValueError("f must be strictly positive")
    w = np.broadcast_to(f, (cfg.m, *f.shape)).copy()
    distances = []
    traj = None
    for k in range(1, outer_max + 1):
        traj = rothe_sweep(f, w, alpha, env, cfg, bounds)
        new_w = traj.slices[1:]
        dist = math.sqrt(cfg.T / cfg.m * float(np.sum((new_w - w) ** 2)))
        distances.append(dist)
        w = new_w.copy()
        if dist < outer_tol:
            return FixedPointResult(traj, k, distances, True)
    return FixedPointResult(traj, outer_max, distances, False)


def write_energy_csv(traj: RotheTrajectory, path):
    """Per-slice energy breakdown at each minimizer, plus the starting energy."""
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["slice", "gradient_term", "coupling_term", "fidelity_term", "total", "start_total"])
        for j, (start, end) in enumerate(zip(traj.start_energies, traj.end_energies), 1):
            out.writerow([j, repr(end.gradient_term), repr(end.coupling_term),
                          repr(end.fidelity_term), repr(end.total), repr(start.total)])
