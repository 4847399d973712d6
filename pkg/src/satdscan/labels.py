"""The six-way comment label taxonomy shared by every stage of the pipeline."""

from __future__ import annotations

import enum


class Label(enum.Enum):
    """Comment classification labels, in canonical order.

    The order is load-bearing: score ties break toward the lowest order index,
    and wire protocols advertise the labels in exactly this order.
    """

    NON_SATD = "non-satd"
    CODE_DESIGN = "code-design"
    DOCUMENTATION = "documentation"
    TEST = "test"
    REQUIREMENT = "requirement"
    SCIENTIFIC = "scientific"

    @property
    def wire_name(self) -> str:
        return self.value

    @property
    def order_index(self) -> int:
        return _ORDER[self]

    def __lt__(self, other: "Label") -> bool:
        if not isinstance(other, Label):
            return NotImplemented
        return self.order_index < other.order_index


LABEL_ORDER: tuple[Label, ...] = (
    Label.NON_SATD,
    Label.CODE_DESIGN,
    Label.DOCUMENTATION,
    Label.TEST,
    Label.REQUIREMENT,
    Label.SCIENTIFIC,
)

SATD_LABELS: tuple[Label, ...] = LABEL_ORDER[1:]

CANONICAL_WIRE_NAMES: tuple[str, ...] = tuple(l.value for l in LABEL_ORDER)

_ORDER: dict[Label, int] = {label: i for i, label in enumerate(LABEL_ORDER)}


class UnknownLabel(ValueError):
    """A wire name that is not one of the six canonical label names."""

    def __init__(self, value: str):
        super().__init__(
            f"unknown label {value!r}; expected one of {', '.join(CANONICAL_WIRE_NAMES)}"
        )
        self.value = value


def decode_label(wire_name: str) -> Label:
    """Map a wire name back to its Label; raises UnknownLabel otherwise."""
    try:
        return Label(wire_name)
    except ValueError:
        raise UnknownLabel(wire_name) from None
