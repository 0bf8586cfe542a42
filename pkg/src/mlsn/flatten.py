"""Removing the object hierarchy: HPSN -> FPSN at a chosen end level.

Activities below the end level are lifted to their father object one level
at a time, activities above it are copied onto every child one level at a
time. Each move appends the new level's label to the activity's role path,
so a post authorship lifted to its forum becomes ``PTF Is Author``.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core_model import Activity, LevelSchema, MissingParent, PreSocialNetwork, RolePath


class FlattenError(ValueError):
    pass


class AmbiguousInitials(ValueError):
    pass


@dataclass(frozen=True)
class FlattenPlan:
    end_level: int
    lift_levels: tuple[int, ...]  # bottom first
    push_levels: tuple[int, ...]  # top first

    @classmethod
    def for_schema(cls, schema: LevelSchema, end_level: int) -> FlattenPlan:
        if not 1 <= end_level <= schema.depth:
            raise FlattenError(f"end level {end_level} outside 1..{schema.depth}")
        return cls(
            end_level,
            tuple(range(schema.depth, end_level, -1)),
            tuple(range(1, end_level)),
        )


def _check_hierarchical(net: PreSocialNetwork) -> None:
    if net.is_flat:
        raise FlattenError("network is already flat")


def lift_step(net: PreSocialNetwork, from_level: int) -> PreSocialNetwork:
    """Move every activity on ``from_level`` to the father object one level up."""
    _check_hierarchical(net)
    if from_level <= 1:
        raise FlattenError("the top level has no fathers to lift to")
    if any(lvl > from_level for lvl in net.levels_with_activities()):
        raise FlattenError(f"levels below {from_level} still carry activities; lift them first")
    parent_label = net.schema.label(from_level - 1)
    moved: list[Activity] = []
    for act in net.activities:
        obj = net.objects[act.object_id]
        if obj.level != from_level:
            moved.append(act)
            continue
        father = net.parent_of(obj)
        if father.level != from_level - 1:
            raise MissingParent(f"father of {obj.id!r} sits on level {father.level}")
        moved.append(Activity(
            act.user_id, father.id, act.role.extended(parent_label), act.timestamp,
            origin_id=act.origin_id or act.object_id, inferred=act.inferred,
        ))
    return net.with_activities(moved)


def push_step(net: PreSocialNetwork, from_level: int) -> PreSocialNetwork:
    """Replace every activity on ``from_level`` by one copy per child object.

    An activity on a childless object yields no copies.
    """
    _check_hierarchical(net)
    if from_level >= net.schema.depth:
        raise FlattenError("the bottom level has no children to push to")
    if any(lvl < from_level for lvl in net.levels_with_activities()):
        raise FlattenError(f"levels above {from_level} still carry activities; push them first")
    child_label = net.schema.label(from_level + 1)
    moved: list[Activity] = []
    for act in net.activities:
        if net.objects[act.object_id].level != from_level:
            moved.append(act)
            continue
        role = act.role.extended(child_label)
        origin = act.origin_id or act.object_id
        for kid in net.children.get(act.object_id, ()):
            moved.append(Activity(act.user_id, kid, role, act.timestamp, origin_id=origin, inferred=act.inferred))
    return net.with_activities(moved)


def flatten(net: PreSocialNetwork, end_level: int | str) -> PreSocialNetwork:
    """Flatten a hierarchical network so every activity sits on ``end_level``.

    The returned network keeps the full object table (reports need the
    hierarchy); only its activities are restricted to the end level.
    """
    _check_hierarchical(net)
    end = net.schema.resolve(end_level)
    plan = FlattenPlan.for_schema(net.schema, end)
    below = net.with_activities(a for a in net.activities if net.activity_level(a) > end)
    above = net.with_activities(a for a in net.activities if net.activity_level(a) < end)
    at_end = [a for a in net.activities if net.activity_level(a) == end]

    for level in plan.lift_levels:
        below = lift_step(below, level)
    for level in plan.push_levels:
        above = push_step(above, level)
    return net.with_activities(at_end + list(below.activities) + list(above.activities), end_level=end)


@dataclass(frozen=True)
class RoleNaming:
    """How role paths become layer names.

    ``initials`` gives ``PTF Is Author``; ``full`` gives
    ``post-topic-forum Is Author`` (with ``separator`` between labels).
    """

    mode: str = "initials"
    separator: str = "-"

    def __post_init__(self) -> None:
        if self.mode not in ("initials", "full"):
            raise ValueError(f"unknown naming mode {self.mode!r}")


def check_initials(labels) -> None:
    seen: dict[str, str] = {}
    for label in labels:
        initial = label[0].upper()
        if initial in seen and seen[initial] != label:
            raise AmbiguousInitials(f"levels {seen[initial]!r} and {label!r} share the initial {initial!r}")
        seen[initial] = label


def render_role(path: RolePath, naming: RoleNaming = RoleNaming(), schema: LevelSchema | None = None) -> str:
    if naming.mode == "initials":
        check_initials(schema.levels if schema is not None else path.path)
        prefix = "".join(label[0].upper() for label in path.path)
    else:
        prefix = naming.separator.join(path.path)
    return f"{prefix} {path.base_role}"
