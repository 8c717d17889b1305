"""Deterministic clean test images (gray levels in [1, 255])."""
from dataclasses import dataclass

import numpy as np

KINDS = ("shapes", "step", "ramp")


@dataclass(frozen=True)
class SyntheticSpec:
    kind: str = "shapes"
    shape: tuple = (128, 128)
    levels: tuple = (60.0, 140.0, 220.0)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if len(self.shape) != 2 or min(self.shape) < 2:
            raise ValueError(f"shape must be two extents >= 2, got {self.shape}")
        if len(self.levels) < 2:
            raise ValueError("need at least two gray levels")
        if any(not 1 <= v <= 255 for v in self.levels):
            raise ValueError("levels must lie in [1, 255]")


def make_synthetic(spec: SyntheticSpec = SyntheticSpec()) -> np.ndarray:
    rows, cols = spec.shape
    lv = [float(v) for v in spec.levels]
    if spec.kind == "step":
        img = np.full(spec.shape, lv[0])
        img[:, cols // 2:] = lv[1]
        return img
    if spec.kind == "ramp":
        return np.tile(np.linspace(lv[0], lv[1], cols), (rows, 1))

    y, x = np.mgrid[0:rows, 0:cols]
    y = (y + 0.5) / rows
    x = (x + 0.5) / cols
    img = np.full(spec.shape, lv[0])

    def pick(k):
        return lv[k % len(lv)]

    img[(x > 0.1) & (x < 0.45) & (y > 0.1) & (y < 0.55)] = pick(1)
    img[(x - 0.7) ** 2 + (y - 0.3) ** 2 < 0.18**2] = pick(2)
    img[(x > 0.2) & (x < 0.85) & (y > 0.68) & (y < 0.88)] = pick(2)
    img[(x - 0.35) ** 2 + (y - 0.78) ** 2 < 0.08**2] = pick(1)
    # thin bar to exercise edge preservation at small scales
    img[(x > 0.55) & (x < 0.6) & (y > 0.1) & (y < 0.6)] = pick(1)
    return img
