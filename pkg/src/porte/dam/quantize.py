"""Residual vector quantisation and the rotation-trick pass-through."""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .._validation import check_finite_array, check_random_state

ANTIPODAL_TOL = 1e-6


@dataclass(frozen=True)
class Codebook:
    """One ``[K, D]`` codeword matrix per stage."""

    stages: tuple

    def __post_init__(self):
        stages = tuple(check_finite_array(s, "codebook stage", ndim=2) for s in self.stages)
        if not stages:
            raise ValueError("codebook needs at least one stage")
        dims = {s.shape[1] for s in stages}
        if len(dims) != 1:
            raise ValueError("all stages must share one codeword dimension")
        if any(s.shape[0] < 1 for s in stages):
            raise ValueError("every stage needs at least one codeword")
        object.__setattr__(self, "stages", stages)

    @property
    def dim(self):
        return self.stages[0].shape[1]

    @classmethod
    def random(cls, n_stages, n_codes, dim, random_state=None, scale=1.0, null_codeword=True):
        """Random Gaussian codebooks whose spread shrinks geometrically per stage.

        With ``null_codeword`` the origin is codeword 0 of every stage, which
        guarantees residual norms never grow from one stage to the next.
        """
        rng = check_random_state(random_state)
        stages = []
        for s in range(n_stages):
            cb = rng.normal(0.0, scale * 0.5 ** s, size=(n_codes, dim))
            if null_codeword:
                cb[0] = 0.0
            stages.append(cb)
        return cls(tuple(stages))


class RVQResult(NamedTuple):
    codes: np.ndarray  # [S, T]
    quantized: np.ndarray  # [T, D]
    residual_norms: np.ndarray  # [S + 1, T]; row 0 is |x|


def nearest_codeword(residual, codewords):
    """Index of the Euclidean-nearest codeword per row; ties go to the lowest index."""
    d2 = np.sum((residual[:, None, :] - codewords[None, :, :]) ** 2, axis=-1)
    return np.argmin(d2, axis=1)


def rvq_quantize(x, cb):
    """Greedy residual coding of ``x`` ([T, D]) through every stage of ``cb``."""
    x = check_finite_array(x, "x")
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != cb.dim:
        raise ValueError(f"input dim {x.shape[1]} does not match codebook dim {cb.dim}")
    residual = x.copy()
    quantized = np.zeros_like(x)
    codes = np.empty((len(cb.stages), x.shape[0]), dtype=np.int64)
    norms = [np.linalg.norm(residual, axis=1)]
    for s, codewords in enumerate(cb.stages):
        idx = nearest_codeword(residual, codewords)
        chosen = codewords[idx]
        codes[s] = idx
        quantized += chosen
        residual = residual - chosen
        norms.append(np.linalg.norm(residual, axis=1))
    return RVQResult(codes, quantized, np.stack(norms))


def rvq_decode(codes, cb):
    codes = np.asarray(codes)
    return sum(stage[codes[s]] for s, stage in enumerate(cb.stages))


def _plane_rotation(u, v):
    """Rotation taking unit ``u`` onto unit ``v``, identity outside span(u, v).

    Product of two Householder reflections: I - 2 r r^T + 2 v u^T with
    r = (u + v) / |u + v|.
    """
    r = u + v
    r /= np.linalg.norm(r)
    return np.eye(len(u)) - 2.0 * np.outer(r, r) + 2.0 * np.outer(v, u)


def _orthogonal_pivot(u):
    axis = int(np.argmin(np.abs(u)))
    p = np.zeros_like(u)
    p[axis] = 1.0
    p -= np.dot(p, u) * u
    return p / np.linalg.norm(p)


def rotation_matrix(e_hat, q_hat):
    if np.dot(e_hat, q_hat) < -1.0 + ANTIPODAL_TOL:
        # near-antipodal: u + v vanishes, so route through a pivot orthogonal to e_hat
        if len(e_hat) < 2:
            raise ValueError("antipodal 1-D vectors have no rotation between them")
        pivot = _orthogonal_pivot(e_hat)
        return _plane_rotation(pivot, q_hat) @ _plane_rotation(e_hat, pivot)
    return _plane_rotation(e_hat, q_hat)


def rotation_trick(e, q):
    """Forward pass ``lambda * R @ e`` (equal to ``q``) and the frozen Jacobian ``lambda * R``.

    ``lambda = |q| / |e|`` and ``R`` rotates the direction of ``e`` onto the
    direction of ``q``. Both are treated as constants in the backward pass, so
    the upstream gradient reaching ``e`` is ``(lambda R)^T g``.
    """
    e = check_finite_array(e, "e", ndim=1)
    q = check_finite_array(q, "q", ndim=1)
    if e.shape != q.shape:
        raise ValueError("e and q must have equal shapes")
    ne, nq = np.linalg.norm(e), np.linalg.norm(q)
    if ne == 0.0 or nq == 0.0:
        raise ValueError("rotation trick needs non-zero e and q")
    jac = (nq / ne) * rotation_matrix(e / ne, q / nq)
    return jac @ e, jac
