"""Three-pathway fusion of cross-attended and self-attended features.

Every pathway comes as a forward function plus a ``*_vjp`` companion that
back-propagates an upstream gradient into parameter and input gradients.
Shapes: features are ``[T, D]``; the pathway encoding ``u`` is ``[T, 3D]``
built as ``concat(z_cross, z_self, z_cross - z_self)``.
"""

import dataclasses
from dataclasses import dataclass, fields

import numpy as np
from scipy.special import ndtr

from .._validation import check_finite_array, check_fusion_pair, check_random_state

KERNEL_SIZES = (3, 5, 7)
BRANCHES = ("multi_scale", "adaptive", "dual_projection")
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class FusionInputs:
    z_self: np.ndarray
    z_cross: np.ndarray

    def __post_init__(self):
        z_cross, z_self = check_fusion_pair(self.z_cross, self.z_self)
        object.__setattr__(self, "z_cross", z_cross)
        object.__setattr__(self, "z_self", z_self)

    @property
    def shape(self):
        return self.z_self.shape


@dataclass(frozen=True)
class DamParams:
    """All learnable tensors of the fusion block (conv weights are ``[out, in, k]``)."""

    ms_conv3_w: np.ndarray
    ms_conv3_b: np.ndarray
    ms_conv5_w: np.ndarray
    ms_conv5_b: np.ndarray
    ms_conv7_w: np.ndarray
    ms_conv7_b: np.ndarray
    ms_scale_w: np.ndarray
    ms_scale_b: np.ndarray
    af_gate_w: np.ndarray
    af_gate_b: np.ndarray
    dp_cross_w1: np.ndarray
    dp_cross_b1: np.ndarray
    dp_cross_w2: np.ndarray
    dp_cross_b2: np.ndarray
    dp_self_w1: np.ndarray
    dp_self_b1: np.ndarray
    dp_self_w2: np.ndarray
    dp_self_b2: np.ndarray
    branch_logits: np.ndarray

    def __post_init__(self):
        for f in fields(self):
            object.__setattr__(self, f.name, check_finite_array(getattr(self, f.name), f.name))

    @property
    def dim(self):
        return self.af_gate_b.shape[0]

    def conv(self, k):
        return getattr(self, f"ms_conv{k}_w"), getattr(self, f"ms_conv{k}_b")

    def arrays(self):
        return [getattr(self, f.name) for f in fields(self)]

    def to_vector(self):
        return np.concatenate([a.ravel() for a in self.arrays()])

    def from_vector(self, vec):
        """New params with this instance's shapes, filled from a flat vector."""
        vec = np.asarray(vec, dtype=np.float64)
        out, pos = {}, 0
        for f in fields(self):
            a = getattr(self, f.name)
            out[f.name] = vec[pos:pos + a.size].reshape(a.shape)
            pos += a.size
        if pos != vec.size:
            raise ValueError(f"expected {pos} values, got {vec.size}")
        return DamParams(**out)

    def zeros_like(self):
        return DamParams(**{f.name: np.zeros_like(getattr(self, f.name)) for f in fields(self)})

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def __add__(self, other):
        return DamParams(**{f.name: getattr(self, f.name) + getattr(other, f.name) for f in fields(self)})


def init_dam_params(dim, random_state=None, scale=None):
    """Random init (fan-in scaled normal weights, zero biases, zero branch logits)."""
    rng = check_random_state(random_state)

    def w(shape, fan_in):
        s = scale if scale is not None else 1.0 / np.sqrt(fan_in)
        return rng.normal(0.0, s, size=shape)

    d = int(dim)
    p = {}
    for k in KERNEL_SIZES:
        p[f"ms_conv{k}_w"] = w((d, 3 * d, k), 3 * d * k)
        p[f"ms_conv{k}_b"] = np.zeros(d)
    p["ms_scale_w"] = w((len(KERNEL_SIZES), d), d)
    p["ms_scale_b"] = np.zeros(len(KERNEL_SIZES))
    p["af_gate_w"] = w((d, 3 * d), 3 * d)
    p["af_gate_b"] = np.zeros(d)
    for side in ("cross", "self"):
        p[f"dp_{side}_w1"] = w((d, d), d)
        p[f"dp_{side}_b1"] = np.zeros(d)
        p[f"dp_{side}_w2"] = w((d, d), d)
        p[f"dp_{side}_b2"] = np.zeros(d)
    p["branch_logits"] = np.zeros(len(BRANCHES))
    return DamParams(**p)


def softmax(logits):
    z = np.asarray(logits, dtype=np.float64)
    e = np.exp(z - z.max())
    return e / e.sum()


def _softmax_backward(probs, grad_probs):
    return probs * (grad_probs - np.dot(probs, grad_probs))


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def gelu(x):
    return x * ndtr(x)


def _gelu_grad(x):
    return ndtr(x) + x * _INV_SQRT_2PI * np.exp(-0.5 * x * x)


def _encode(inp):
    return np.concatenate([inp.z_cross, inp.z_self, inp.z_cross - inp.z_self], axis=1)


def _decode_grad(du, dim):
    """Split a gradient w.r.t. the [T, 3D] encoding into (d_cross, d_self)."""
    a, b, c = du[:, :dim], du[:, dim:2 * dim], du[:, 2 * dim:]
    return a + c, b - c


def _check_dims(inp, params):
    if inp.shape[1] != params.dim:
        raise ValueError(f"feature dim {inp.shape[1]} does not match params dim {params.dim}")


def _conv_windows(u, k):
    pad = (k - 1) // 2
    u_pad = np.pad(u, ((pad, pad), (0, 0)))
    return np.lib.stride_tricks.sliding_window_view(u_pad, k, axis=0)  # [T, C_in, k]


def conv1d_same(u, weight, bias):
    """Cross-correlation along time with zero 'same' padding."""
    return np.einsum("tik,oik->to", _conv_windows(u, weight.shape[2]), weight) + bias


# ---------------------------------------------------------------- multi-scale


def _multi_scale(inp, params):
    u = _encode(inp)
    diff = inp.z_cross - inp.z_self
    pooled = np.abs(diff).mean(axis=0)
    alpha = softmax(params.ms_scale_w @ pooled + params.ms_scale_b)
    windows, convs = [], []
    for k in KERNEL_SIZES:
        w, b = params.conv(k)
        win = _conv_windows(u, k)
        windows.append(win)
        convs.append(np.einsum("tik,oik->to", win, w) + b)
    out = sum(a * c for a, c in zip(alpha, convs))
    return out, (u, diff, pooled, alpha, windows, convs)


def multi_scale_fusion(inp, params):
    _check_dims(inp, params)
    return _multi_scale(inp, params)[0]


def multi_scale_fusion_vjp(inp, params, grad_out):
    _check_dims(inp, params)
    _, (u, diff, pooled, alpha, windows, convs) = _multi_scale(inp, params)
    T, D = inp.shape
    grads = {}
    du = np.zeros_like(u)
    d_alpha = np.array([np.sum(grad_out * c) for c in convs])
    for a, k, win in zip(alpha, KERNEL_SIZES, windows):
        w, _ = params.conv(k)
        dc = a * grad_out
        grads[f"ms_conv{k}_w"] = np.einsum("to,tik->oik", dc, win)
        grads[f"ms_conv{k}_b"] = dc.sum(axis=0)
        d_win = np.einsum("to,oik->tik", dc, w)
        pad = (k - 1) // 2
        du_pad = np.zeros((T + 2 * pad, u.shape[1]))
        for j in range(k):
            du_pad[j:j + T] += d_win[:, :, j]
        du += du_pad[pad:pad + T]
    d_logits = _softmax_backward(alpha, d_alpha)
    grads["ms_scale_w"] = np.outer(d_logits, pooled)
    grads["ms_scale_b"] = d_logits
    d_pooled = params.ms_scale_w.T @ d_logits
    d_diff = np.sign(diff) * d_pooled / T
    d_cross, d_self = _decode_grad(du, D)
    d_cross = d_cross + d_diff
    d_self = d_self - d_diff
    return _fill(params, grads), (d_cross, d_self)


# ------------------------------------------------------------------ adaptive


def _adaptive(inp, params):
    u = _encode(inp)
    gate = _sigmoid(u @ params.af_gate_w.T + params.af_gate_b)
    out = inp.z_self + gate * (inp.z_cross - inp.z_self)
    return out, (u, gate)


def adaptive_fusion(inp, params):
    """Per-frame, per-dimension convex gate between z_cross (gate 1) and z_self (gate 0)."""
    _check_dims(inp, params)
    return _adaptive(inp, params)[0]


def adaptive_fusion_vjp(inp, params, grad_out):
    _check_dims(inp, params)
    _, (u, gate) = _adaptive(inp, params)
    D = inp.shape[1]
    d_gate = grad_out * (inp.z_cross - inp.z_self)
    d_pre = d_gate * gate * (1.0 - gate)
    grads = {"af_gate_w": d_pre.T @ u, "af_gate_b": d_pre.sum(axis=0)}
    d_cross, d_self = _decode_grad(d_pre @ params.af_gate_w, D)
    d_cross = d_cross + grad_out * gate
    d_self = d_self + grad_out * (1.0 - gate)
    return _fill(params, grads), (d_cross, d_self)


# ----------------------------------------------------------- dual projection


def _mlp(x, w1, b1, w2, b2):
    h = x @ w1.T + b1
    a = gelu(h)
    return a @ w2.T + b2, (h, a)


def _mlp_backward(x, w1, w2, cache, grad_out):
    h, a = cache
    d_a = grad_out @ w2
    d_h = d_a * _gelu_grad(h)
    return (d_h.T @ x, d_h.sum(axis=0), grad_out.T @ a, grad_out.sum(axis=0)), d_h @ w1


def dual_projection(inp, params):
    _check_dims(inp, params)
    oc, _ = _mlp(inp.z_cross, params.dp_cross_w1, params.dp_cross_b1, params.dp_cross_w2, params.dp_cross_b2)
    os_, _ = _mlp(inp.z_self, params.dp_self_w1, params.dp_self_b1, params.dp_self_w2, params.dp_self_b2)
    return oc + os_


def dual_projection_vjp(inp, params, grad_out):
    _check_dims(inp, params)
    grads = {}
    d_inputs = {}
    for side, x in (("cross", inp.z_cross), ("self", inp.z_self)):
        w1, b1 = getattr(params, f"dp_{side}_w1"), getattr(params, f"dp_{side}_b1")
        w2, b2 = getattr(params, f"dp_{side}_w2"), getattr(params, f"dp_{side}_b2")
        _, cache = _mlp(x, w1, b1, w2, b2)
        (gw1, gb1, gw2, gb2), dx = _mlp_backward(x, w1, w2, cache, grad_out)
        grads.update({f"dp_{side}_w1": gw1, f"dp_{side}_b1": gb1, f"dp_{side}_w2": gw2, f"dp_{side}_b2": gb2})
        d_inputs[side] = dx
    return _fill(params, grads), (d_inputs["cross"], d_inputs["self"])


# ---------------------------------------------------------------- aggregate

_PATHWAYS = (
    (multi_scale_fusion, multi_scale_fusion_vjp),
    (adaptive_fusion, adaptive_fusion_vjp),
    (dual_projection, dual_projection_vjp),
)


def branch_weights(params):
    return softmax(params.branch_logits)


def pathway_outputs(inp, params):
    """Outputs of the three pathways, in :data:`BRANCHES` order."""
    return [fwd(inp, params) for fwd, _ in _PATHWAYS]


def dam_forward(inp, params):
    """Softmax(branch_logits)-weighted sum of the three pathway outputs."""
    w = branch_weights(params)
    return sum(wb * fb for wb, fb in zip(w, pathway_outputs(inp, params)))


def dam_forward_vjp(inp, params, grad_out):
    w = branch_weights(params)
    outs = pathway_outputs(inp, params)
    total = params.zeros_like()
    d_cross = np.zeros(inp.shape)
    d_self = np.zeros(inp.shape)
    for wb, (_, vjp) in zip(w, _PATHWAYS):
        g, (dc, ds) = vjp(inp, params, wb * grad_out)
        total = total + g
        d_cross += dc
        d_self += ds
    d_w = np.array([np.sum(grad_out * f) for f in outs])
    total = total.replace(branch_logits=_softmax_backward(w, d_w))
    return total, (d_cross, d_self)


def layer_aggregate(layer_outputs, logits):
    """Softmax-weighted sum over a list of equally shaped layer outputs."""
    if len(layer_outputs) == 0:
        raise ValueError("need at least one layer output")
    logits = np.asarray(logits, dtype=np.float64)
    if logits.shape != (len(layer_outputs),):
        raise ValueError("need exactly one logit per layer")
    stack = np.stack([np.asarray(x, dtype=np.float64) for x in layer_outputs])
    return np.tensordot(softmax(logits), stack, axes=1)


def _fill(params, grads):
    """Zero gradient container with the given entries filled in."""
    return params.zeros_like().replace(**grads)
