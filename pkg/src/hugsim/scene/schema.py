"""Scene-owned semantic class schema."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import InvariantViolation


@dataclass
class SemanticSchema:
    """Class names plus the three flags collision logic cares about."""

    classes: list[str]
    is_ground: list[bool]
    is_sky: list[bool]
    is_collidable: list[bool]

    def __post_init__(self):
        n = len(self.classes)
        if not (len(self.is_ground) == len(self.is_sky) == len(self.is_collidable) == n):
            raise InvariantViolation("schema flag lists must match class count")
        if sum(self.is_sky) != 1:
            raise InvariantViolation("exactly one class must be flagged sky")
        if sum(self.is_ground) < 1:
            raise InvariantViolation("at least one class must be flagged ground")

    def __len__(self) -> int:
        return len(self.classes)

    def index(self, name: str) -> int:
        return self.classes.index(name)

    def to_dict(self) -> dict:
        return {
            "classes": self.classes,
            "is_ground": self.is_ground,
            "is_sky": self.is_sky,
            "is_collidable": self.is_collidable,
        }

    @staticmethod
    def from_dict(d: dict) -> "SemanticSchema":
        return SemanticSchema(
            classes=list(d["classes"]),
            is_ground=[bool(v) for v in d["is_ground"]],
            is_sky=[bool(v) for v in d["is_sky"]],
            is_collidable=[bool(v) for v in d["is_collidable"]],
        )


def default_schema() -> SemanticSchema:
    """Road / marking / building / vehicle / sky, desk-scale default."""
    return SemanticSchema(
        classes=["road", "road-marking", "building", "vehicle", "sky"],
        is_ground=[True, True, False, False, False],
        is_sky=[False, False, False, False, True],
        is_collidable=[False, False, True, True, False],
    )
