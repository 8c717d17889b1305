"""Gray-level indicator ``alpha = (G_sigma * f / M)^beta``.

Dark regions get a small diffusion weight, bright ones a weight near 1.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d


@dataclass(frozen=True)
class IndicatorParams:
    sigma: float = 1.0
    beta: float = 1.0
    radius: int | None = None

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.radius is None:
            object.__setattr__(self, "radius", max(1, math.ceil(4 * self.sigma)))
        elif self.radius < 1:
            raise ValueError(f"radius must be at least 1, got {self.radius}")


def gaussian_kernel(params: IndicatorParams) -> np.ndarray:
    k = np.arange(-params.radius, params.radius + 1, dtype=float)
    w = np.exp(-(k**2) / (2.0 * params.sigma**2))
    return w / w.sum()


def convolve(f, params: IndicatorParams) -> np.ndarray:
    """Separable Gaussian smoothing, x pass then y pass, mirrored boundary."""
    kernel = gaussian_kernel(params)
    out = correlate1d(np.asarray(f, dtype=float), kernel, axis=1, mode="reflect")
    return correlate1d(out, kernel, axis=0, mode="reflect")


def gray_indicator(f, params: IndicatorParams = IndicatorParams()) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if np.any(~np.isfinite(f)) or np.any(f <= 0):
        raise ValueError("the indicator needs a strictly positive image")
    smooth = convolve(f, params)
    return (smooth / smooth.max()) ** params.beta
