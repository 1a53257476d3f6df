"""Reference math for the fusion block, losses and quantiser (forward + analytic gradients)."""

from .fusion import (
    BRANCHES,
    KERNEL_SIZES,
    DamParams,
    FusionInputs,
    adaptive_fusion,
    adaptive_fusion_vjp,
    branch_weights,
    dam_forward,
    dam_forward_vjp,
    dual_projection,
    dual_projection_vjp,
    init_dam_params,
    layer_aggregate,
    multi_scale_fusion,
    multi_scale_fusion_vjp,
    pathway_outputs,
)
from .gradcheck import GradcheckReport, gradcheck, numeric_gradient
from .losses import LossWeights, commitment_loss, loss_terms, sisdr_loss, speaker_loss, total_loss
from .quantize import Codebook, RVQResult, rotation_trick, rvq_decode, rvq_quantize
from .rope import rope_apply

__all__ = [
    "BRANCHES", "KERNEL_SIZES", "Codebook", "DamParams", "FusionInputs", "GradcheckReport",
    "LossWeights", "RVQResult", "adaptive_fusion", "adaptive_fusion_vjp", "branch_weights",
    "commitment_loss", "dam_forward", "dam_forward_vjp", "dual_projection", "dual_projection_vjp",
    "gradcheck", "init_dam_params", "layer_aggregate", "loss_terms", "multi_scale_fusion",
    "multi_scale_fusion_vjp", "numeric_gradient", "pathway_outputs", "rope_apply",
    "rotation_trick", "rvq_decode", "rvq_quantize", "sisdr_loss", "speaker_loss", "total_loss",
]
