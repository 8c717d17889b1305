"""Potential, flux and convexified flux of the forward-backward model.

The flux is ``q(xi) = xi/(1+|xi|^2) + delta*|xi|^(p-2)*xi``. It is radial,
``q(xi) = Q(|xi|) xi/|xi|`` with scalar flux ``Q(s) = s/(1+s^2) + delta*s^(p-1)``,
and its potential is ``Psi(s) = log(1+s^2)/2 + (delta/p)*s^p``.

For small ``delta`` the scalar flux is not monotone, so ``Psi`` is not
convex. The lower convex envelope ``Psi**`` replaces ``Psi`` by a bitangent
line on each non-convex stretch; its slope ``q**`` is the monotone flux
used by the relaxed variational scheme.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import bisect, brentq

CONTACT_RTOL = 1e-8


@dataclass(frozen=True)
class FluxParams:
    p: float = 2.0
    delta: float = 0.1

    def __post_init__(self):
        if not 1.0 < self.p <= 2.0:
            raise ValueError(f"p must lie in (1, 2], got {self.p}")
        if not self.delta > 0.0:
            raise ValueError(f"delta must be positive, got {self.delta}")


def _nonneg(s):
    s = np.asarray(s, dtype=float)
    if np.any(s < 0) or np.any(np.isnan(s)):
        raise ValueError("gradient magnitude must be nonnegative")
    return s


def _scalar_out(x, like):
    return float(x) if np.ndim(like) == 0 else x


def potential_psi(s, params: FluxParams):
    """Radial potential ``Psi(s)``, anchored so that ``Psi(0) = 0``."""
    s_arr = _nonneg(s)
    out = 0.5 * np.log1p(s_arr**2) + (params.delta / params.p) * s_arr**params.p
    return _scalar_out(out, s)


def scalar_flux(s, params: FluxParams):
    """``Psi'(s) = s/(1+s^2) + delta*s^(p-1)``."""
    s_arr = _nonneg(s)
    out = s_arr / (1.0 + s_arr**2) + params.delta * s_arr ** (params.p - 1.0)
    return _scalar_out(out, s)


def scalar_flux_slope(s, params: FluxParams):
    """``Psi''(s)``. Infinite at ``s = 0`` when ``p < 2``."""
    s_arr = _nonneg(s)
    p = params.p
    with np.errstate(divide="ignore"):
        tail = params.delta * (p - 1.0) * s_arr ** (p - 2.0) if p < 2 else params.delta
    out = (1.0 - s_arr**2) / (1.0 + s_arr**2) ** 2 + tail
    return _scalar_out(out, s)


def flux_q(xi, params: FluxParams):
    """Vector flux ``q(xi)``; ``xi`` has the vector components on its last axis."""
    xi = np.asarray(xi, dtype=float)
    norm = np.linalg.norm(xi, axis=-1, keepdims=True)
    safe = np.where(norm > 0, norm, 1.0)
    weight = 1.0 / (1.0 + norm**2) + params.delta * safe ** (params.p - 2.0)
    return np.where(norm > 0, weight * xi, 0.0)


def scalar_flux_min_slope(params: FluxParams, s_max=10.0, n=100_001):
    """Minimum of ``Psi''`` over a uniform grid on ``[0, s_max]``.

    Returns ``(min_slope, argmin)``. The flux is monotone (forward
    diffusion only) iff ``min_slope >= 0``.
    """
    if s_max <= 0 or n < 2:
        raise ValueError("need s_max > 0 and at least two samples")
    s = np.linspace(0.0, s_max, int(n))
    slope = scalar_flux_slope(s, params)
    k = int(np.argmin(slope))
    return float(slope[k]), float(s[k])


def forward_backward_threshold(p=2.0, s_max=10.0, n=100_001, lo=1e-6, hi=1.0, xtol=1e-7):
    """Smallest ``delta`` for which the scalar flux is monotone, by bisection."""

    def min_slope(delta):
        return scalar_flux_min_slope(FluxParams(p, delta), s_max, n)[0]

    return bisect(min_slope, lo, hi, xtol=xtol)


@dataclass(frozen=True)
class RadialProfile:
    """Samples of ``Psi`` on a uniform grid starting at ``s = 0``.

    ``params`` is kept when the profile comes from the closed form; the
    envelope then refines bitangent points and evaluates slopes exactly.
    """

    s_values: np.ndarray
    psi_values: np.ndarray
    params: FluxParams | None = None

    def __post_init__(self):
        s = np.asarray(self.s_values, dtype=float)
        psi = np.asarray(self.psi_values, dtype=float)
        object.__setattr__(self, "s_values", s)
        object.__setattr__(self, "psi_values", psi)
        if s.ndim != 1 or s.shape != psi.shape:
            raise ValueError("s_values and psi_values must be 1D of equal length")
        if s.size < 2:
            raise ValueError("a profile needs at least two samples")
        if s[0] != 0.0 or psi[0] != 0.0:
            raise ValueError("profile must start at (0, 0)")
        ds = np.diff(s)
        if np.any(ds <= 0):
            raise ValueError("s_values must be strictly increasing")
        if not np.allclose(ds, ds[0], rtol=1e-6, atol=0.0):
            raise ValueError("s_values must be uniformly spaced")

    @property
    def s_max(self):
        return float(self.s_values[-1])

    @property
    def n_samples(self):
        return int(self.s_values.size)

    def derivative(self):
        if self.params is not None:
            return scalar_flux(self.s_values, self.params)
        return np.gradient(self.psi_values, self.s_values)


def radial_profile(params: FluxParams, s_max=50.0, n=50_001) -> RadialProfile:
    s = np.linspace(0.0, s_max, int(n))
    return RadialProfile(s, potential_psi(s, params), params)


@dataclass(frozen=True)
class AffineSegment:
    """Bitangent piece ``Psi**(s) = intercept + slope*s`` on ``[start, stop]``."""

    start: float
    stop: float
    slope: float
    intercept: float
    first: int  # sample index of the left hull vertex
    last: int  # sample index of the right hull vertex
    refined: bool = False


@dataclass(frozen=True)
class ConvexEnvelope:
    base: RadialProfile
    env_values: np.ndarray
    slopes: np.ndarray
    contact_mask: np.ndarray
    segments: tuple = ()
    hull_indices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    @property
    def affine_segments(self):
        """Index ranges ``(first, last)`` of the hull vertices bounding each segment."""
        return [(seg.first, seg.last) for seg in self.segments]

    @property
    def s_max(self):
        return self.base.s_max


def lower_hull_indices(x, y):
    """Vertices of the lower convex hull of points sorted by ``x`` (monotone chain)."""
    hull = []
    for k in range(len(x)):
        while len(hull) >= 2:
            i, j = hull[-2], hull[-1]
            cross = (x[j] - x[i]) * (y[k] - y[i]) - (y[j] - y[i]) * (x[k] - x[i])
            if cross <= 0:
                hull.pop()
            else:
                break
        hull.append(k)
    return np.asarray(hull, dtype=int)


def _refine_bitangent(profile, first, last):
    """Solve ``Psi'(a) = Psi'(b) = (Psi(b)-Psi(a))/(b-a)`` near a discrete hull edge."""
    params = profile.params
    s = profile.s_values
    d = profile.derivative()
    if last == s.size - 1:
        return _refine_end_tangent(profile, first)
    peak = first + int(np.argmax(d[first : last + 1]))
    valley = peak + int(np.argmin(d[peak : last + 1]))
    left_lo = s[max(first - 1, 0)]
    right_hi = s[min(last + 1, s.size - 1)]

    def tangent_at(k, lo, hi):
        return brentq(lambda t: scalar_flux(t, params) - k, lo, hi, xtol=1e-15, rtol=1e-15)

    def gap(k):
        a = tangent_at(k, left_lo, s[peak])
        b = tangent_at(k, s[valley], right_hi)
        return (potential_psi(b, params) - k * b) - (potential_psi(a, params) - k * a)

    k_lo = max(scalar_flux(left_lo, params), d[valley])
    k_hi = min(d[peak], scalar_flux(right_hi, params))
    try:
        k = brentq(gap, k_lo, k_hi, xtol=1e-15, rtol=1e-15)
        a = tangent_at(k, left_lo, s[peak])
        b = tangent_at(k, s[valley], right_hi)
    except ValueError:
        return None
    return a, b, k, potential_psi(a, params) - k * a


def _refine_end_tangent(profile, first):
    """Tangent from the last sample back to ``Psi``, for a segment cut off by ``s_max``."""
    params = profile.params
    s = profile.s_values
    b = s[-1]
    psi_b = potential_psi(b, params)

    def gap(a):
        return scalar_flux(a, params) * (b - a) - (psi_b - potential_psi(a, params))

    try:
        a = brentq(gap, s[max(first - 1, 0)], s[min(first + 1, s.size - 2)], xtol=1e-15, rtol=1e-15)
    except ValueError:
        return None
    k = scalar_flux(a, params)
    return a, b, k, potential_psi(a, params) - k * a


def convexify(profile: RadialProfile, tol_contact=CONTACT_RTOL) -> ConvexEnvelope:
    """Lower convex envelope of a sampled radial potential.

    The even extension to negative ``s`` only adds the admissible slope 0 at
    the origin, so the hull is taken over ``s >= 0`` directly.
    """
    s, psi = profile.s_values, profile.psi_values
    if s.size < 2:
        raise ValueError("need at least two samples to convexify")
    hull = lower_hull_indices(s, psi)
    env = np.interp(s, s[hull], psi[hull])
    near = np.abs(env - psi) <= tol_contact * (1.0 + np.abs(psi))

    edge_slopes = np.diff(psi[hull]) / np.diff(s[hull])
    # slope of the hull edge each sample sits on; a vertex takes its left edge
    edge_of = np.clip(np.searchsorted(s[hull], s, side="left") - 1, 0, len(edge_slopes) - 1)
    slopes = edge_slopes[edge_of]

    segments = []
    for e in range(len(hull) - 1):
        i0, i1 = int(hull[e]), int(hull[e + 1])
        if i1 - i0 > 1 and not np.all(near[i0 + 1 : i1]):
            segments.append(
                AffineSegment(s[i0], s[i1], edge_slopes[e], psi[i0] - edge_slopes[e] * s[i0], i0, i1)
            )

    if profile.params is None:
        contact = near
        if s[0] == 0.0:
            slopes[0] = 0.0
    else:
        env = psi.copy()
        slopes = profile.derivative()
        contact = np.ones(s.size, dtype=bool)
        refined = []
        for seg in segments:
            sol = _refine_bitangent(profile, seg.first, seg.last)
            if sol is not None:
                a, b, k, c = sol
                seg = AffineSegment(a, b, k, c, seg.first, seg.last, refined=True)
            refined.append(seg)
            inside = (s > seg.start) & (s < seg.stop)
            env[inside] = seg.intercept + seg.slope * s[inside]
            # a vertex takes its left edge; matters when a segment is cut off by s_max
            slopes[inside | (s == seg.stop)] = seg.slope
            contact[inside] = False
        segments = refined
    return ConvexEnvelope(profile, env, slopes, contact, tuple(segments), hull)


def _in_range(s, env):
    s_arr = _nonneg(s)
    if np.any(s_arr > env.s_max * (1 + 1e-12)):
        raise ValueError(f"s exceeds the envelope range [0, {env.s_max}]")
    return s_arr


def q_star(s, env: ConvexEnvelope):
    """Slope of the convex envelope at ``s``.

    Exact when the envelope carries closed-form parameters, otherwise the
    sampled slopes are interpolated linearly.
    """
    s_arr = _in_range(s, env)
    params = env.base.params
    if params is None:
        out = np.interp(s_arr, env.base.s_values, env.slopes)
    else:
        out = scalar_flux(s_arr, params)
        for seg in env.segments:
            out = np.where((s_arr > seg.start) & (s_arr <= seg.stop), seg.slope, out)
    return _scalar_out(out, s)


def psi_star(s, env: ConvexEnvelope):
    """Value of the convex envelope ``Psi**`` at ``s``."""
    s_arr = _in_range(s, env)
    params = env.base.params
    if params is None:
        out = np.interp(s_arr, env.base.s_values, env.env_values)
    else:
        out = potential_psi(s_arr, params)
        for seg in env.segments:
            inside = (s_arr > seg.start) & (s_arr < seg.stop)
            out = np.where(inside, seg.intercept + seg.slope * s_arr, out)
    return _scalar_out(out, s)


@dataclass(frozen=True)
class StructureReport:
    gamma1: float
    gamma2: float
    holds: bool
    worst_point: float
    shifted_lower_holds: bool  # max(g1*s^p - 1, 0) <= Psi, Psi**
    strict_lower_holds: bool  # g1*s^p <= Psi, Psi**


def verify_structure(profile: RadialProfile, env: ConvexEnvelope, params: FluxParams,
                     gamma_candidates=None) -> StructureReport:
    """Scan candidate constants for the p-growth bounds on the sample grid.

    Conditions checked for ``s > 0``::

        max(g1 s^p - 1, 0) <= Psi(s)   <= g2 s^p + 1,   |Psi'(s)| <= g2 s^(p-1)
        g1 s^p             <= Psi**(s) <= g2 s^p + 1,   |q**(s)|  <= g2 s^(p-1) + 1

    ``gamma2`` is the smallest candidate meeting the upper bounds and
    ``gamma1`` the largest candidate not above ``gamma2`` meeting the lower
    ones.
    """
    if gamma_candidates is None:
        gamma_candidates = np.geomspace(1e-4, 1e4, 80_001)
    cand = np.unique(np.asarray(gamma_candidates, dtype=float))
    p = params.p
    s = profile.s_values[1:]
    sp, sp1 = s**p, s ** (p - 1.0)
    psi = profile.psi_values[1:]
    dpsi = profile.derivative()[1:]
    envv = env.env_values[1:]
    qs = env.slopes[1:]

    g2_needed = max(
        np.max((psi - 1) / sp),
        np.max(np.abs(dpsi) / sp1),
        np.max((envv - 1) / sp),
        np.max((np.abs(qs) - 1) / sp1),
    )
    g1_allowed = np.min(np.minimum((psi + 1) / sp, envv / sp)) if np.all(psi >= 0) else -np.inf
    rtol = 1e-12
    ok2 = cand[cand >= g2_needed * (1 - rtol)]
    gamma2 = float(ok2[0]) if ok2.size else float(cand[-1])
    ok1 = cand[(cand <= gamma2) & (cand <= g1_allowed * (1 + rtol))]
    gamma1 = float(ok1[-1]) if ok1.size else float(cand[0])
    holds = bool(ok2.size and ok1.size and gamma1 > 0)

    margin = np.minimum.reduce([
        (gamma2 * sp + 1 - psi) / (1 + gamma2 * sp),
        (gamma2 * sp1 - np.abs(dpsi)) / (gamma2 * sp1),
        (gamma2 * sp + 1 - envv) / (1 + gamma2 * sp),
        (gamma2 * sp1 + 1 - np.abs(qs)) / (1 + gamma2 * sp1),
        (psi - np.maximum(gamma1 * sp - 1, 0.0)) / (1 + psi),
        (envv - gamma1 * sp) / (1 + envv),
    ])
    worst = float(s[int(np.argmin(margin))])
    slack = 1e-12

    def lower_form(shifted):
        shift = 1.0 if shifted else 0.0
        bound = np.maximum(gamma1 * sp - shift, 0.0)
        return bool(np.all(psi - bound >= -slack) and np.all(envv - bound >= -slack))

    return StructureReport(float(gamma1), float(gamma2), holds, worst,
                           lower_form(True), lower_form(False))


def write_envelope_tables(env: ConvexEnvelope, psi_path, slope_path, stride=1):
    """Two-column text tables ``(s, Psi**)`` and ``(s, q**)`` for plotting."""
    s = env.base.s_values[::stride]
    np.savetxt(psi_path, np.column_stack([s, env.env_values[::stride]]), header="s psi_star")
    np.savetxt(slope_path, np.column_stack([s, env.slopes[::stride]]), header="s q_star")
