"""scikit-learn style wrapper around the explicit denoising scheme."""
import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .indicator import IndicatorParams, gray_indicator
from .noise import psnr
from .solver import SolverConfig, run
from .validation import check_image, check_same_shape


class FBDiffusionDenoiser(TransformerMixin, BaseEstimator):
    """Forward-backward diffusion denoiser for multiplicative Gamma noise.

    ``X`` is a single strictly positive gray-level image (2D array).

    Fitting with a clean reference ``y`` runs the scheme with max-PSNR
    stopping and stores the best iteration count in ``n_iter_``;
    ``transform`` then applies exactly that many steps. Fitting without
    ``y`` leaves ``n_iter_`` as None and ``transform`` follows ``stop``.

    Attributes
    ----------
    n_iter_ : int or None
    history_ : list of StepReport
        Per-step report from the last call to ``fit``.
    alpha_ : ndarray
        Gray-level indicator built from the image passed to ``fit``.
    """

    def __init__(self, tau=0.05, lam=1.0, p=1.5, delta=1.0, epsilon=1e-8,
                 sigma=1.0, beta=1.0, max_iters=2000, stop="relative_change",
                 tol=1e-5, patience=10):
        self.tau = tau
        self.lam = lam
        self.p = p
        self.delta = delta
        self.epsilon = epsilon
        self.sigma = sigma
        self.beta = beta
        self.max_iters = max_iters
        self.stop = stop
        self.tol = tol
        self.patience = patience

    def _config(self, **overrides):
        kw = dict(tau=self.tau, lam=self.lam, p=self.p, delta=self.delta,
                  epsilon=self.epsilon, max_iters=self.max_iters, stop=self.stop,
                  tol=self.tol, patience=self.patience)
        kw.update(overrides)
        return SolverConfig(**kw)

    def _indicator(self):
        return IndicatorParams(sigma=self.sigma, beta=self.beta)

    def fit(self, X, y=None):
        X = check_image(X, "X", positive=True)
        self.alpha_ = gray_indicator(X, self._indicator())
        if y is None:
            if self.stop == "max_psnr":
                raise ValueError("stop='max_psnr' needs a clean reference y")
            _, self.history_ = run(X, self._config(), alpha=self.alpha_)
            self.n_iter_ = None
            return self
        y = check_image(y, "y")
        check_same_shape(X, y, names=("X", "y"))
        _, self.history_ = run(X, self._config(stop="max_psnr"), reference=y, alpha=self.alpha_)
        self.n_iter_ = int(np.nanargmax([r.psnr for r in self.history_]))
        return self

    def transform(self, X):
        check_is_fitted(self, "history_")
        X = check_image(X, "X", positive=True)
        if self.n_iter_ is None:
            cfg = self._config()
        else:
            cfg = self._config(stop="fixed_iters", max_iters=self.n_iter_)
        out, _ = run(X, cfg, indicator=self._indicator())
        return out

    def score(self, X, y):
        """PSNR (dB) of the denoised ``X`` against the clean ``y``."""
        return psnr(self.transform(X), y)
