"""Data model for users, hierarchical objects and the activities linking them.

A :class:`PreSocialNetwork` is either hierarchical (activities may sit on any
level of the object tree) or flat (every activity sits on one end level).
Networks are treated as immutable once built; the flattening and extraction
steps always return new instances.
"""

from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping


class MissingParent(LookupError):
    """A parent link points at an object that does not exist."""


@dataclass(frozen=True)
class LevelSchema:
    """Ordered level labels; index 1 is the top of the hierarchy."""

    levels: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "levels", tuple(self.levels))
        if not self.levels:
            raise ValueError("schema needs at least one level")
        if any(not isinstance(label, str) or not label.strip() for label in self.levels):
            raise ValueError("level labels must be non-empty strings")
        if len(set(self.levels)) != len(self.levels):
            raise ValueError(f"duplicate level labels in {self.levels!r}")

    def __len__(self) -> int:
        return len(self.levels)

    @property
    def depth(self) -> int:
        return len(self.levels)

    def index(self, label: str) -> int:
        try:
            return self.levels.index(label) + 1
        except ValueError:
            raise KeyError(f"unknown level label {label!r}") from None

    def label(self, index: int) -> str:
        if not 1 <= index <= len(self.levels):
            raise IndexError(f"level index {index} outside 1..{len(self.levels)}")
        return self.levels[index - 1]

    def resolve(self, level: int | str) -> int:
        """Accept either a label or a 1-based index and return the index."""
        if isinstance(level, str):
            if level.isdigit():
                level = int(level)
            else:
                return self.index(level)
        self.label(level)
        return level


@dataclass(frozen=True, slots=True)
class User:
    id: str
    label: str = ""


@dataclass(frozen=True, slots=True)
class ObjectNode:
    id: str
    level: int
    parent_id: str | None
    created_at: int
    creator_id: str


@dataclass(frozen=True, slots=True, order=True)
class RolePath:
    """An activity type plus the level labels it travelled through, origin first."""

    base_role: str
    path: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "path", tuple(self.path))
        if not self.path:
            raise ValueError("role path must name at least its origin level")

    @classmethod
    def at(cls, base_role: str, level_label: str) -> RolePath:
        return cls(base_role, (level_label,))

    @property
    def origin(self) -> str:
        return self.path[0]

    @property
    def current(self) -> str:
        return self.path[-1]

    def extended(self, level_label: str) -> RolePath:
        return RolePath(self.base_role, self.path + (level_label,))


@dataclass(frozen=True, slots=True)
class Activity:
    """One user action towards one object.

    ``origin_id`` is ``None`` for activities still on the object they were
    recorded against; after flattening it holds the id of that object.
    """

    user_id: str
    object_id: str
    role: RolePath
    timestamp: int
    origin_id: str | None = None
    inferred: bool = False

    @property
    def is_original(self) -> bool:
        return self.origin_id is None

    def sort_key(self) -> tuple:
        return (
            self.object_id,
            self.user_id,
            self.role.base_role,
            self.role.path,
            self.timestamp,
            self.origin_id or "",
            self.inferred,
        )


@dataclass(frozen=True)
class PreSocialNetwork:
    """Users, objects (with parent links) and user-object activities.

    ``end_level`` is ``None`` for a hierarchical network and the level index
    all activities sit on for a flat one.
    """

    schema: LevelSchema
    users: Mapping[str, User]
    objects: Mapping[str, ObjectNode]
    activities: tuple[Activity, ...] = ()
    end_level: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "activities", tuple(self.activities))

    @property
    def is_flat(self) -> bool:
        return self.end_level is not None

    @cached_property
    def children(self) -> dict[str, tuple[str, ...]]:
        kids: dict[str, list[str]] = defaultdict(list)
        for obj in self.objects.values():
            if obj.parent_id is not None:
                kids[obj.parent_id].append(obj.id)
        return {pid: tuple(sorted(ids)) for pid, ids in kids.items()}

    def objects_at(self, level: int) -> list[ObjectNode]:
        return sorted((o for o in self.objects.values() if o.level == level), key=lambda o: o.id)

    def activity_level(self, activity: Activity) -> int:
        return self.objects[activity.object_id].level

    def levels_with_activities(self) -> set[int]:
        return {self.activity_level(a) for a in self.activities}

    def parent_of(self, obj: ObjectNode) -> ObjectNode:
        if obj.parent_id is None:
            raise MissingParent(f"object {obj.id!r} has no parent")
        try:
            return self.objects[obj.parent_id]
        except KeyError:
            raise MissingParent(f"object {obj.id!r} points at missing parent {obj.parent_id!r}") from None

    def ancestor_at_level(self, obj: ObjectNode | str, target: int) -> ObjectNode:
        """Follow parent links from ``obj`` up to the level ``target``."""
        if isinstance(obj, str):
            obj = self.objects[obj]
        if not 1 <= target < obj.level:
            raise ValueError(f"target level {target} must lie strictly above level {obj.level}")
        node = obj
        for _ in range(obj.level - target):
            node = self.parent_of(node)
        if node.level != target:
            raise MissingParent(f"ancestor of {obj.id!r} at level {target} is malformed ({node.id!r})")
        return node

    def descendants_at_level(self, obj: ObjectNode | str, target: int) -> list[ObjectNode]:
        """All objects on level ``target`` in the subtree of ``obj``, sorted by id."""
        if isinstance(obj, str):
            obj = self.objects[obj]
        if target <= obj.level:
            raise ValueError(f"target level {target} must lie strictly below level {obj.level}")
        frontier = [obj.id]
        for _ in range(target - obj.level):
            frontier = [kid for oid in frontier for kid in self.children.get(oid, ())]
        return sorted((self.objects[oid] for oid in frontier), key=lambda o: o.id)

    def with_activities(self, activities: Iterable[Activity], end_level: int | None = None) -> PreSocialNetwork:
        return PreSocialNetwork(
            schema=self.schema,
            users=self.users,
            objects=self.objects,
            activities=tuple(sorted(activities, key=Activity.sort_key)),
            end_level=end_level,
        )

    def canonical(self) -> PreSocialNetwork:
        """Same network with activities in canonical order."""
        return self.with_activities(self.activities, self.end_level)


class ViolationKind(enum.Enum):
    CYCLE_DETECTED = "CycleDetected"
    LEVEL_SKIP = "LevelSkip"
    MULTIPLE_PARENTS = "MultipleParents"
    ORPHAN_NON_ROOT = "OrphanNonRoot"
    UNKNOWN_CREATOR = "UnknownCreator"
    UNKNOWN_OBJECT = "UnknownObject"
    UNKNOWN_USER = "UnknownUser"
    ROLE_LEVEL_MISMATCH = "RoleLevelMismatch"
    OFF_END_LEVEL = "OffEndLevel"


@dataclass(frozen=True, slots=True)
class Violation:
    kind: ViolationKind
    subject: str
    detail: str = ""

    def __str__(self) -> str:
        return f"{self.kind.value}: {self.subject} {self.detail}".rstrip()


def validate_objects(objects: Iterable[ObjectNode], schema: LevelSchema) -> list[Violation]:
    """Check tree structure over a raw sequence of objects.

    A sequence (rather than a mapping) is accepted so that the same id
    declared twice with different parents shows up as ``MultipleParents``.
    """
    found: list[Violation] = []
    by_id: dict[str, ObjectNode] = {}
    for obj in objects:
        seen = by_id.get(obj.id)
        if seen is not None:
            if seen.parent_id != obj.parent_id:
                found.append(Violation(
                    ViolationKind.MULTIPLE_PARENTS, obj.id,
                    f"parents {seen.parent_id!r} and {obj.parent_id!r}"))
            continue
        by_id[obj.id] = obj

    for obj in sorted(by_id.values(), key=lambda o: o.id):
        if not 1 <= obj.level <= schema.depth:
            found.append(Violation(ViolationKind.LEVEL_SKIP, obj.id, f"level {obj.level} not in schema"))
            continue
        if obj.parent_id is None:
            if obj.level != 1:
                found.append(Violation(ViolationKind.ORPHAN_NON_ROOT, obj.id, f"level {obj.level} without parent"))
            continue
        if obj.parent_id == obj.id:
            found.append(Violation(ViolationKind.CYCLE_DETECTED, obj.id, "object is its own parent"))
            continue
        parent = by_id.get(obj.parent_id)
        if parent is None:
            found.append(Violation(ViolationKind.ORPHAN_NON_ROOT, obj.id, f"parent {obj.parent_id!r} missing"))
            continue
        if parent.level != obj.level - 1:
            found.append(Violation(
                ViolationKind.LEVEL_SKIP, obj.id,
                f"level {obj.level} under parent {parent.id!r} at level {parent.level}"))

    # cycles longer than one hop; levels normally rule these out, but a
    # malformed level column must not make traversal loop forever
    done: set[str] = set()
    for start in sorted(by_id):
        trail: list[str] = []
        on_trail: set[str] = set()
        node: str | None = start
        while node is not None and node in by_id and node not in done:
            if node in on_trail:
                if by_id[node].parent_id != node:  # self-loops already reported
                    found.append(Violation(ViolationKind.CYCLE_DETECTED, node, "parent chain loops"))
                break
            on_trail.add(node)
            trail.append(node)
            node = by_id[node].parent_id
        done.update(trail)
    return found


def validate_hierarchy(net: PreSocialNetwork) -> list[Violation]:
    """Return every structural problem in ``net``; an empty list means valid."""
    found = validate_objects(net.objects.values(), net.schema)
    for obj in sorted(net.objects.values(), key=lambda o: o.id):
        if obj.creator_id not in net.users:
            found.append(Violation(ViolationKind.UNKNOWN_CREATOR, obj.id, f"creator {obj.creator_id!r}"))
    for act in net.activities:
        obj = net.objects.get(act.object_id)
        if obj is None:
            found.append(Violation(ViolationKind.UNKNOWN_OBJECT, act.object_id, f"activity by {act.user_id!r}"))
            continue
        if act.user_id not in net.users:
            found.append(Violation(ViolationKind.UNKNOWN_USER, act.user_id, f"activity on {act.object_id!r}"))
        if 1 <= obj.level <= net.schema.depth and act.role.current != net.schema.label(obj.level):
            found.append(Violation(
                ViolationKind.ROLE_LEVEL_MISMATCH, act.object_id,
                f"role path {act.role.path!r} ends off level {net.schema.label(obj.level)!r}"))
        if net.end_level is not None and obj.level != net.end_level:
            found.append(Violation(
                ViolationKind.OFF_END_LEVEL, act.object_id,
                f"activity at level {obj.level} in network flat at {net.end_level}"))
    return found
