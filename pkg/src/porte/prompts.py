"""Mixture-observable attributes and text prompts that name the target speaker."""

from dataclasses import dataclass

from ._validation import check_random_state
from .exceptions import UnpromptableMixtureError

ORDER_MIN_GAP_S = 0.05
LENGTH_MIN_DIFF_S = 0.5

PROMPT_TYPES = ("gender_extract", "gender_remove", "order", "relative_length")

TEMPLATES = {
    "gender_extract": "Extract only the {} voice from this audio.",
    "gender_remove": "Please remove the {} voice from this audio.",
    "order": "Extract the voice of the speaker who spoke {}.",
    "relative_length": "Extract the speech that contains a {} duration of speech.",
}


@dataclass(frozen=True)
class AttributeSet:
    target_gender: str
    other_gender: str
    target_start_s: float
    other_start_s: float
    target_duration_s: float
    other_duration_s: float

    @property
    def gender_contrast(self):
        return self.target_gender != self.other_gender

    @property
    def order_defined(self):
        return abs(self.target_start_s - self.other_start_s) >= ORDER_MIN_GAP_S - 1e-9

    @property
    def order_label(self):
        if not self.order_defined:
            return None
        return "first" if self.target_start_s < self.other_start_s else "later"

    @property
    def length_contrast(self):
        return abs(self.target_duration_s - self.other_duration_s) >= LENGTH_MIN_DIFF_S - 1e-9

    @property
    def length_label(self):
        if not self.length_contrast:
            return None
        return "longer" if self.target_duration_s > self.other_duration_s else "shorter"

    def applicable_types(self):
        types = []
        if self.gender_contrast:
            types += ["gender_extract", "gender_remove"]
        if self.order_defined:
            types.append("order")
        if self.length_contrast:
            types.append("relative_length")
        return types


@dataclass(frozen=True)
class PromptAnnotation:
    prompt_type: str
    text: str
    target_role: str


def derive_attributes(rendered, plan):
    """Collect the attributes a listener could verify from the mixture alone."""
    t_start, t_end = rendered.target_span
    o_start, o_end = rendered.interferer_span
    return AttributeSet(
        target_gender=plan.target_utt.gender,
        other_gender=plan.interferer_utt.gender,
        target_start_s=t_start,
        other_start_s=o_start,
        target_duration_s=t_end - t_start,
        other_duration_s=o_end - o_start,
    )


def fill_template(prompt_type, attrs):
    if prompt_type == "gender_extract":
        slot = attrs.target_gender
    elif prompt_type == "gender_remove":
        # the remove phrasing names the speaker to discard
        slot = attrs.other_gender
    elif prompt_type == "order":
        slot = attrs.order_label
    elif prompt_type == "relative_length":
        slot = attrs.length_label
    else:
        raise ValueError(f"unknown prompt type {prompt_type!r}")
    return TEMPLATES[prompt_type].format(slot)


def render_prompt(attrs, target_role, rng, prompt_type=None):
    """Pick a prompt type uniformly among those applicable and fill its template."""
    types = attrs.applicable_types()
    if not types:
        raise UnpromptableMixtureError(
            "same gender, simultaneous start and near-equal lengths: no prompt identifies the target"
        )
    if prompt_type is None:
        prompt_type = types[int(check_random_state(rng).integers(len(types)))]
    elif prompt_type not in types:
        raise UnpromptableMixtureError(f"prompt type {prompt_type!r} not applicable to this mixture")
    return PromptAnnotation(prompt_type, fill_template(prompt_type, attrs), target_role)
