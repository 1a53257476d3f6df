"""scikit-learn compatible wrappers around the quantiser and the fusion block."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.cluster import KMeans
from sklearn.utils.validation import check_array, check_is_fitted

from ._validation import check_random_state
from .dam.fusion import FusionInputs, dam_forward, init_dam_params
from .dam.quantize import Codebook, rvq_decode, rvq_quantize


class ResidualVectorQuantizer(TransformerMixin, BaseEstimator):
    """Residual VQ with codebooks learned by per-stage k-means on the residuals.

    Parameters
    ----------
    n_stages : int
        Number of residual stages.
    n_codes : int
        Codewords per stage (including the null codeword when enabled).
    null_codeword : bool
        Reserve codeword 0 of each stage for the origin, so a stage can never
        make a residual longer.
    random_state : int or None

    Attributes
    ----------
    codebook_ : Codebook
    """

    def __init__(self, n_stages=4, n_codes=16, null_codeword=True, max_iter=100, random_state=None):
        self.n_stages = n_stages
        self.n_codes = n_codes
        self.null_codeword = null_codeword
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        rng = check_random_state(self.random_state)
        n_learned = self.n_codes - 1 if self.null_codeword else self.n_codes
        if n_learned < 1:
            raise ValueError("n_codes leaves no learnable codewords")
        residual = X.copy()
        stages = []
        for _ in range(self.n_stages):
            k = min(n_learned, len(np.unique(residual, axis=0)))
            km = KMeans(n_clusters=k, n_init=1, max_iter=self.max_iter,
                        random_state=int(rng.integers(2**31 - 1))).fit(residual)
            centers = km.cluster_centers_
            if self.null_codeword:
                centers = np.vstack([np.zeros((1, X.shape[1])), centers])
            stages.append(centers)
            residual = residual - rvq_quantize(residual, Codebook((centers,))).quantized
        self.codebook_ = Codebook(tuple(stages))
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        """Codes, shape ``[n_samples, n_stages]``."""
        check_is_fitted(self, "codebook_")
        X = check_array(X, dtype=np.float64)
        return rvq_quantize(X, self.codebook_).codes.T

    def inverse_transform(self, codes):
        check_is_fitted(self, "codebook_")
        return rvq_decode(np.asarray(codes).T, self.codebook_)

    def quantize(self, X):
        check_is_fitted(self, "codebook_")
        return rvq_quantize(check_array(X, dtype=np.float64), self.codebook_)


class DamFusion(TransformerMixin, BaseEstimator):
    """Fusion block as a transformer over ``X = [z_cross | z_self]`` of shape ``[T, 2D]``.

    Nothing is learned: ``fit`` only infers ``D`` and draws initial parameters
    (branch logits start at zero, i.e. uniform branch weights).
    """

    def __init__(self, init_scale=None, random_state=None):
        self.init_scale = init_scale
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        if X.shape[1] % 2:
            raise ValueError("X must hold z_cross and z_self side by side (even width)")
        self.dim_ = X.shape[1] // 2
        self.params_ = init_dam_params(self.dim_, self.random_state, self.init_scale)
        self.n_features_in_ = X.shape[1]
        return self

    def _split(self, X):
        check_is_fitted(self, "params_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != 2 * self.dim_:
            raise ValueError(f"expected {2 * self.dim_} features, got {X.shape[1]}")
        return FusionInputs(z_self=X[:, self.dim_:], z_cross=X[:, :self.dim_])

    def transform(self, X):
        return dam_forward(self._split(X), self.params_)
