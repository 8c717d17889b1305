"""Difference operators on a pixel grid with mirrored (Neumann) ghost cells.

Arrays are indexed ``u[row, col]``. The x direction runs along columns
(axis 1) and the y direction along rows (axis 0). The grid spacing is 1.

Ghost values are read by clamping indices, so the pixel just outside the
frame equals the nearest pixel inside it. Forward differences therefore
vanish on the last column/row and backward differences on the first.
"""
from dataclasses import dataclass

import numpy as np

X_AXIS = 1
Y_AXIS = 0


@dataclass(frozen=True)
class FluxField:
    """Per-cell x- and y-fluxes, same shape as the grid they came from."""

    cx: np.ndarray
    cy: np.ndarray

    def __post_init__(self):
        if self.cx.shape != self.cy.shape:
            raise ValueError(
                f"flux components differ in shape: {self.cx.shape} vs {self.cy.shape}"
            )


def forward_diff(u, axis):
    """``u[k+1] - u[k]`` along ``axis``, zero on the last slice."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    lo = [slice(None)] * u.ndim
    hi = [slice(None)] * u.ndim
    lo[axis] = slice(None, -1)
    hi[axis] = slice(1, None)
    out[tuple(lo)] = u[tuple(hi)] - u[tuple(lo)]
    return out


def backward_diff(u, axis):
    """``u[k] - u[k-1]`` along ``axis``, zero on the first slice."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    lo = [slice(None)] * u.ndim
    hi = [slice(None)] * u.ndim
    lo[axis] = slice(None, -1)
    hi[axis] = slice(1, None)
    out[tuple(hi)] = u[tuple(hi)] - u[tuple(lo)]
    return out


def forward_x(u):
    return forward_diff(u, X_AXIS)


def forward_y(u):
    return forward_diff(u, Y_AXIS)


def backward_x(u):
    return backward_diff(u, X_AXIS)


def backward_y(u):
    return backward_diff(u, Y_AXIS)


def _read(u, row, col):
    rows, cols = u.shape
    return u[min(max(row, 0), rows - 1), min(max(col, 0), cols - 1)]


def _check_cell(u, row, col):
    rows, cols = u.shape
    if not (0 <= row < rows and 0 <= col < cols):
        raise IndexError(f"cell ({row}, {col}) outside a {rows}x{cols} grid")


def diff_forward_x(u, row, col):
    """Single-cell forward x-difference with ghost reads."""
    _check_cell(u, row, col)
    return float(_read(u, row, col + 1) - _read(u, row, col))


def diff_backward_x(u, row, col):
    _check_cell(u, row, col)
    return float(_read(u, row, col) - _read(u, row, col - 1))


def diff_forward_y(u, row, col):
    _check_cell(u, row, col)
    return float(_read(u, row + 1, col) - _read(u, row, col))


def diff_backward_y(u, row, col):
    _check_cell(u, row, col)
    return float(_read(u, row, col) - _read(u, row - 1, col))


def minmod(a, b):
    """Slope limiter ``(sgn a + sgn b)/2 * min(|a|, |b|)``; works elementwise."""
    return 0.5 * (np.sign(a) + np.sign(b)) * np.minimum(np.abs(a), np.abs(b))


def divergence_nd(fluxes, weights=None):
    """Sum over axes of the backward difference of ``weights * flux[axis]``.

    The flux in the ghost cell before the first slice is taken to be zero:
    it is built from a forward difference across the mirror, which vanishes.
    Summed over the grid, the result telescopes to the flux leaving through
    the last slice of each axis.
    """
    fluxes = [np.asarray(f, dtype=float) for f in fluxes]
    shape = fluxes[0].shape
    if any(f.shape != shape for f in fluxes):
        raise ValueError("flux components must share one shape")
    if weights is None:
        weights = 1.0
    else:
        weights = np.asarray(weights, dtype=float)
        if weights.shape != shape:
            raise ValueError(
                f"weights shape {weights.shape} does not match flux shape {shape}"
            )
    out = np.zeros(shape)
    for axis, flux in enumerate(fluxes):
        wf = weights * flux
        lo = [slice(None)] * len(shape)
        hi = [slice(None)] * len(shape)
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        first = [slice(None)] * len(shape)
        first[axis] = slice(0, 1)
        out[tuple(first)] += wf[tuple(first)]
        out[tuple(hi)] += wf[tuple(hi)] - wf[tuple(lo)]
    return out


def divergence(flux: FluxField, weights=None) -> np.ndarray:
    """Backward-difference divergence of the indicator-weighted 2D flux."""
    return divergence_nd([flux.cy, flux.cx], weights)


def gradient_magnitude(u):
    """Euclidean norm of the forward-difference gradient, any dimension."""
    u = np.asarray(u, dtype=float)
    sq = np.zeros_like(u)
    for axis in range(u.ndim):
        sq += forward_diff(u, axis) ** 2
    return np.sqrt(sq)
