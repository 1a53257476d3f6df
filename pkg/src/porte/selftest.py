"""Self-test: gradient suite plus metric/structural property checks, reported as JSON."""

import math
import time

import numpy as np

from .dam.checks import CheckResult, run_gradient_suite
from .dam.fusion import FusionInputs, dam_forward, init_dam_params, pathway_outputs
from .dam.quantize import Codebook, rotation_trick, rvq_quantize
from .metrics import edit_distance, sisdr, sure


def _direct_sisdr(est, ref):
    """Projection formula evaluated term by term with plain Python sums."""
    dot = sum(a * b for a, b in zip(est, ref))
    ref_sq = sum(b * b for b in ref)
    s = [dot / ref_sq * b for b in ref]
    e = [si - a for si, a in zip(s, est)]
    return 10.0 * math.log10(sum(v * v for v in s) / sum(v * v for v in e))


def _check(name, passed, error=0.0):
    return CheckResult(name, -1, float(error), bool(passed))


def metric_property_checks(n_cases=100, seed=0):
    rng = np.random.default_rng(seed)
    out = []

    worst_rel, worst_scale = 0.0, 0.0
    for _ in range(n_cases):
        ref = rng.normal(size=200)
        est = ref + rng.normal(scale=rng.uniform(0.1, 3.0), size=200)
        direct = _direct_sisdr(est.tolist(), ref.tolist())
        fast = sisdr(est, ref, zero_mean=False, clamp_db=np.inf)
        worst_rel = max(worst_rel, abs(fast - direct) / abs(direct))
        alpha = rng.uniform(0.01, 100.0) * rng.choice([-1, 1])
        worst_scale = max(worst_scale, abs(sisdr(alpha * est, ref, clamp_db=np.inf) - sisdr(est, ref, clamp_db=np.inf)))
    out.append(_check("sisdr.oracle_equivalence", worst_rel <= 1e-9, worst_rel))
    out.append(_check("sisdr.scale_invariance", worst_scale <= 1e-6, worst_scale))
    hand = sisdr([1, -1, 1, -1], [1, -1, 0, 0], zero_mean=False)
    out.append(_check("sisdr.hand_case", abs(hand) <= 1e-12, abs(hand)))

    sr = 16000
    t = np.arange(2 * sr) / sr
    tone = 0.5 * np.sin(2 * np.pi * 440 * t)
    half = tone.copy()
    half[sr:] = 0.0
    out.append(_check("sure.identity", sure(tone, tone) == 0.0))
    out.append(_check("sure.silence", sure(np.zeros_like(tone), tone) == 1.0))
    v = sure(half, tone)
    out.append(_check("sure.half_suppressed", abs(v - 0.5) <= 0.02, abs(v - 0.5)))

    scale_ok, mono_ok = True, True
    for _ in range(n_cases):
        ref = rng.normal(size=8000) * np.repeat(rng.uniform(0.05, 1.0, size=20), 400)
        est = ref * np.repeat(rng.uniform(0.0, 1.2, size=40), 200)
        base = sure(est, ref, sample_rate=sr)
        scale_ok &= sure(0.3 * est, 0.3 * ref, sample_rate=sr) == base
        zeroed = est.copy()
        start = int(rng.integers(0, 7000))
        zeroed[start:start + int(rng.integers(200, 1000))] = 0.0
        mono_ok &= sure(zeroed, ref, sample_rate=sr) >= base
    out.append(_check("sure.joint_scale_invariance", scale_ok))
    out.append(_check("sure.monotone_under_zeroing", mono_ok))

    tri_ok = True
    vocab = list("abcde")
    for _ in range(n_cases):
        a, b, c = (list(rng.choice(vocab, size=int(rng.integers(0, 8)))) for _ in range(3))
        tri_ok &= edit_distance(a, c) <= edit_distance(a, b) + edit_distance(b, c)
    out.append(_check("wer.triangle_inequality", tri_ok))
    return out


def structural_checks(seed=0, n_cases=100):
    rng = np.random.default_rng(seed)
    out = []
    params = init_dam_params(6, rng)
    inp = FusionInputs(z_self=rng.normal(size=(10, 6)), z_cross=rng.normal(size=(10, 6)))
    mf, af, dp = pathway_outputs(inp, params)
    err = np.max(np.abs(dam_forward(inp, params) - (mf + af + dp) / 3.0))
    out.append(_check("dam.uniform_at_zero_logits", err <= 1e-12, err))
    for i, name in enumerate(("multi_scale", "adaptive", "dual_projection")):
        logits = np.zeros(3)
        logits[i] = 40.0
        err = np.max(np.abs(dam_forward(inp, params.replace(branch_logits=logits)) - (mf, af, dp)[i]))
        out.append(_check(f"dam.saturated_{name}", err <= 1e-6, err))

    mono, rot_out, rot_orth = True, 0.0, 0.0
    for _ in range(n_cases):
        dim = int(rng.integers(2, 17))
        cb = Codebook.random(4, 16, dim, rng)
        norms = rvq_quantize(rng.normal(size=(8, dim)), cb).residual_norms
        mono &= bool(np.all(np.diff(norms, axis=0) <= 1e-12))
        e, q = rng.normal(size=dim), rng.normal(size=dim)
        y, jac = rotation_trick(e, q)
        R = jac * np.linalg.norm(e) / np.linalg.norm(q)
        rot_out = max(rot_out, float(np.max(np.abs(y - q))))
        rot_orth = max(rot_orth, float(np.max(np.abs(R.T @ R - np.eye(dim)))))
    out.append(_check("rvq.residual_non_increasing", mono))
    out.append(_check("rotation.output_equals_q", rot_out <= 1e-6, rot_out))
    out.append(_check("rotation.orthogonal", rot_orth <= 1e-6, rot_orth))
    return out


def run_selftest(inject_wrong_gradient=False, seeds=range(20)):
    start = time.perf_counter()
    results = run_gradient_suite(seeds, inject_wrong_gradient=inject_wrong_gradient)
    results += metric_property_checks()
    results += structural_checks()
    failures = [r.to_dict() for r in results if not r.passed]
    return {
        "passed": not failures,
        "n_checks": len(results),
        "failures": failures,
        "checks": [r.to_dict() for r in results],
        "runtime_s": round(time.perf_counter() - start, 3),
    }
