"""Randomised gradient-check suite over every analytic gradient in :mod:`porte.dam`.

Each check contracts a vector-valued map with a fixed random cotangent
``R`` (``f = sum(out * R)``) so one scalar gradcheck covers the full VJP.
"""

from dataclasses import dataclass, fields

import numpy as np

from .fusion import (
    FusionInputs,
    adaptive_fusion,
    adaptive_fusion_vjp,
    dam_forward,
    dam_forward_vjp,
    dual_projection,
    dual_projection_vjp,
    init_dam_params,
    multi_scale_fusion,
    multi_scale_fusion_vjp,
)
from .gradcheck import gradcheck
from .losses import commitment_loss, sisdr_loss, speaker_loss

TOLERANCE = 1e-4
EPS = 1e-5

PATHWAYS = {
    "multi_scale": (multi_scale_fusion, multi_scale_fusion_vjp, "ms_"),
    "adaptive": (adaptive_fusion, adaptive_fusion_vjp, "af_"),
    "dual_projection": (dual_projection, dual_projection_vjp, "dp_"),
    "dam_forward": (dam_forward, dam_forward_vjp, ""),
}


@dataclass(frozen=True)
class CheckResult:
    name: str
    seed: int
    max_rel_error: float
    passed: bool

    def to_dict(self):
        return {"name": self.name, "seed": self.seed, "max_rel_error": self.max_rel_error, "passed": self.passed}


def _field_names(params, prefix):
    return [f.name for f in fields(params) if f.name.startswith(prefix)]


def _pack(params, names):
    return np.concatenate([getattr(params, n).ravel() for n in names])


def _unpack(params, names, vec):
    changes, pos = {}, 0
    for n in names:
        a = getattr(params, n)
        changes[n] = vec[pos:pos + a.size].reshape(a.shape)
        pos += a.size
    return params.replace(**changes)


def random_problem(seed, max_t=16, dims=(2, 3, 4)):
    """Random fusion inputs, parameters (non-trivial biases and branch logits) and cotangent."""
    rng = np.random.default_rng(seed)
    T = int(rng.integers(2, max_t + 1))
    D = int(rng.choice(dims))
    params = init_dam_params(D, rng)
    params = params.replace(**{
        n: rng.normal(0.0, 0.3, size=getattr(params, n).shape)
        for n in _field_names(params, "") if n.endswith("_b") or n.endswith("_b1") or n.endswith("_b2")
    })
    params = params.replace(branch_logits=rng.normal(0.0, 1.0, size=3))
    inp = FusionInputs(z_self=rng.normal(size=(T, D)), z_cross=rng.normal(size=(T, D)))
    cotangent = rng.normal(size=(T, D))
    return inp, params, cotangent


def pathway_checks(name, seed, grad_scale=1.0):
    """Parameter and input gradient checks for one pathway; ``grad_scale`` != 1 injects an error."""
    fwd, vjp, prefix = PATHWAYS[name]
    inp, params, R = random_problem(seed)
    names = _field_names(params, prefix)

    def param_value(v):
        return float(np.sum(fwd(inp, _unpack(params, names, v)) * R))

    def param_fn(v):
        p = _unpack(params, names, v)
        g, _ = vjp(inp, p, R)
        return param_value(v), grad_scale * _pack(g, names)

    def input_value(z):
        return float(np.sum(fwd(FusionInputs(z_self=z[1], z_cross=z[0]), params) * R))

    def input_fn(z):
        _, (dc, ds) = vjp(FusionInputs(z_self=z[1], z_cross=z[0]), params, R)
        return input_value(z), grad_scale * np.stack([dc, ds])

    z0 = np.stack([inp.z_cross, inp.z_self])
    rp = gradcheck(param_fn, _pack(params, names), EPS, TOLERANCE, value_fn=param_value)
    ri = gradcheck(input_fn, z0, EPS, TOLERANCE, value_fn=input_value)
    return [
        CheckResult(f"{name}.params", seed, rp.max_rel_error, rp.passed),
        CheckResult(f"{name}.inputs", seed, ri.max_rel_error, ri.passed),
    ]


def loss_checks(seed, grad_scale=1.0):
    rng = np.random.default_rng(seed)
    ref = rng.normal(size=64)
    est = ref + rng.normal(scale=0.5, size=64)
    e_ref = rng.normal(size=128)
    e_est = e_ref + rng.normal(scale=0.8, size=128)
    z_q = rng.normal(size=(int(rng.integers(2, 17)), 8))
    z_pre = z_q + rng.normal(scale=0.3, size=z_q.shape)

    cases = {
        "sisdr_loss": (lambda x: _scaled(sisdr_loss(x, ref), grad_scale), est),
        "speaker_loss": (lambda x: _scaled(speaker_loss(e_ref, x), grad_scale), e_est),
        "commitment_loss": (lambda x: _scaled(commitment_loss(x, z_q), grad_scale), z_pre),
    }
    out = []
    for name, (fn, x0) in cases.items():
        r = gradcheck(fn, x0, EPS, TOLERANCE)
        out.append(CheckResult(name, seed, r.max_rel_error, r.passed))
    return out


def _scaled(value_grad, scale):
    value, grad = value_grad
    return value, scale * grad


def run_gradient_suite(seeds=range(20), inject_wrong_gradient=False):
    """All gradient checks over ``seeds``; injection scales one gradient by 1.01."""
    results = []
    for seed in seeds:
        results += loss_checks(seed)
        for name in PATHWAYS:
            scale = 1.01 if (inject_wrong_gradient and name == "adaptive") else 1.0
            results += pathway_checks(name, seed, grad_scale=scale)
    return results
