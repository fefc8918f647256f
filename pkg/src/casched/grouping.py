"""Per-carrier user groups from a single path-loss threshold."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .channel import Carrier, ChannelModel, pathloss_db
from .errors import EmptyScenarioError, InvalidParameterError
from .utility import Utility


@dataclass(frozen=True)
class UserEquipment:
    id: int
    distance: float
    utility: Utility
    pf_weight: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.distance) and self.distance > 0):
            raise InvalidParameterError(f"user {self.id}: distance must be > 0, got {self.distance!r}")
        if not (math.isfinite(self.pf_weight) and self.pf_weight > 0):
            raise InvalidParameterError(f"user {self.id}: pf_weight must be > 0, got {self.pf_weight!r}")


@dataclass(frozen=True)
class CoverageWarning:
    user_id: int
    distance: float
    message: str


@dataclass
class GroupAssignment:
    """Carrier sets per user (``alpha``) and user groups per carrier (``groups``).

    ``order`` lists carrier ids from the smallest coverage area to the
    largest; ``groups`` is nested along that order.
    """

    alpha: dict[int, frozenset[int]]
    groups: dict[int, list[int]]
    order: list[int]
    warnings: list[CoverageWarning] = field(default_factory=list)

    def is_nested(self) -> bool:
        for inner, outer in zip(self.order, self.order[1:]):
            if not set(self.groups[inner]) <= set(self.groups[outer]):
                return False
        return True

    def is_consistent(self) -> bool:
        from_alpha = {(u, k) for u, ks in self.alpha.items() for k in ks}
        from_groups = {(u, k) for k, us in self.groups.items() for u in us}
        return from_alpha == from_groups


def stage_order(carriers: list[Carrier]) -> list[Carrier]:
    """Highest frequency (smallest coverage) first; ties by id."""
    return sorted(carriers, key=lambda c: (-c.freq, c.id))


def in_range_carriers(ue: UserEquipment, carriers: list[Carrier], model: ChannelModel,
                      loss_threshold: float) -> set[int]:
    return {c.id for c in carriers if pathloss_db(c.freq, ue.distance, model) <= loss_threshold}


def build_groups(ues: list[UserEquipment], carriers: list[Carrier], model: ChannelModel,
                 loss_threshold: float) -> GroupAssignment:
    if not ues:
        raise EmptyScenarioError("no users")
    if not carriers:
        raise EmptyScenarioError("no carriers")
    ordered = stage_order(carriers)
    alpha: dict[int, frozenset[int]] = {}
    groups: dict[int, list[int]] = {c.id: [] for c in ordered}
    warnings = []
    for ue in sorted(ues, key=lambda u: u.id):
        ks = in_range_carriers(ue, ordered, model, loss_threshold)
        if not ks:
            warnings.append(CoverageWarning(ue.id, ue.distance, "outside the coverage of every carrier; excluded"))
            continue
        alpha[ue.id] = frozenset(ks)
        for c in ordered:
            if c.id in ks:
                groups[c.id].append(ue.id)
    if not alpha:
        raise EmptyScenarioError("every user is outside carrier coverage")
    return GroupAssignment(alpha=alpha, groups=groups, order=[c.id for c in ordered], warnings=warnings)
