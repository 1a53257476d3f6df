"""Training objectives with analytic gradients: SI-SDR, speaker embedding and commitment losses."""

import math
from dataclasses import dataclass

import numpy as np

from ..exceptions import GradientUndefinedError
from ..metrics import DEFAULT_CLAMP_DB, sisdr

_DB = 10.0 / math.log(10.0)


@dataclass(frozen=True)
class LossWeights:
    lambda_s: float = 5.0
    lambda_c: float = 0.05
    huber_delta: float = 1.0
    cosine_coeff: float = 0.5

    def __post_init__(self):
        for name in ("lambda_s", "lambda_c", "huber_delta", "cosine_coeff"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


def sisdr_loss(est, ref):
    """Negative SI-SDR (no mean removal, no clamp) and its gradient w.r.t. ``est``.

    With ``p = <est, ref>``, ``s = p/|ref|^2 ref`` and ``e = s - est``:
    ``dL/dest = -(10/ln 10) (2 ref / p + 2 e / |e|^2)``.
    """
    est = np.asarray(est, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if est.shape != ref.shape:
        raise ValueError("est and ref must have equal shapes")
    ref_energy = float(np.dot(ref, ref))
    if ref_energy == 0.0:
        raise ValueError("reference is all zeros")
    p = float(np.dot(est, ref))
    s = (p / ref_energy) * ref
    e = s - est
    err_energy = float(np.dot(e, e))
    if err_energy == 0.0:
        raise GradientUndefinedError("estimate is a perfect scaled copy of the reference")
    if p == 0.0:
        raise GradientUndefinedError("estimate is orthogonal to the reference")
    value = -_DB * (math.log(float(np.dot(s, s))) - math.log(err_energy))
    grad = -_DB * (2.0 * ref / p + 2.0 * e / err_energy)
    return value, grad


def huber(residual, delta=1.0):
    """Mean Huber penalty and its gradient w.r.t. the residual."""
    r = np.asarray(residual, dtype=np.float64)
    a = np.abs(r)
    per = np.where(a <= delta, 0.5 * r * r, delta * (a - 0.5 * delta))
    return float(per.mean()), np.clip(r, -delta, delta) / r.size


def cosine_distance(a, b):
    """``1 - cos(a, b)`` and its gradient w.r.t. ``b``."""
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise GradientUndefinedError("cosine similarity is undefined for a zero vector")
    c = float(np.dot(a, b) / (na * nb))
    dc_db = a / (na * nb) - c * b / (nb * nb)
    return 1.0 - c, -dc_db


def speaker_loss(e_ref, e_est, w=LossWeights()):
    """Huber + ``cosine_coeff`` * cosine distance between speaker embeddings."""
    e_ref = np.asarray(e_ref, dtype=np.float64)
    e_est = np.asarray(e_est, dtype=np.float64)
    if e_ref.shape != e_est.shape:
        raise ValueError("embeddings must have equal dimensions")
    if not np.any(e_ref):
        raise ValueError("reference embedding is all zeros")
    h, dh = huber(e_est - e_ref, w.huber_delta)
    c, dc = cosine_distance(e_ref, e_est)
    return h + w.cosine_coeff * c, dh + w.cosine_coeff * dc


def commitment_loss(z_pre, z_q):
    """MSE between pre-quantisation latents and (detached) quantised latents."""
    z_pre = np.asarray(z_pre, dtype=np.float64)
    z_q = np.asarray(z_q, dtype=np.float64)
    if z_pre.shape != z_q.shape:
        raise ValueError("z_pre and z_q must have equal shapes")
    d = z_pre - z_q
    return float(np.mean(d * d)), 2.0 * d / d.size


def loss_terms(est, ref, e_ref, e_est, z_pre, z_q, w=LossWeights(), clamp_db=DEFAULT_CLAMP_DB):
    """The three unweighted terms; the SI-SDR term is clamped so perfect estimates stay finite."""
    return {
        "sisdr": -sisdr(est, ref, zero_mean=False, clamp_db=clamp_db),
        "spk": speaker_loss(e_ref, e_est, w)[0],
        "commit": commitment_loss(z_pre, z_q)[0],
    }


def total_loss(est, ref, e_ref, e_est, z_pre, z_q, w=LossWeights(), clamp_db=DEFAULT_CLAMP_DB):
    terms = loss_terms(est, ref, e_ref, e_est, z_pre, z_q, w, clamp_db)
    return terms["sisdr"] + w.lambda_s * terms["spk"] + w.lambda_c * terms["commit"]
