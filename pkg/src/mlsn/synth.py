"""Synthetic forum-shaped datasets and the small forum case study.

Everything here is driven by a seeded :class:`random.Random`, so the same
parameters always produce the same files.
"""

from __future__ import annotations

import json
import os
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .core_model import Activity, LevelSchema, ObjectNode, PreSocialNetwork, RolePath, User
from .ingest import (
    FIRST_CHILD_CREATOR,
    SUBSCRIBE_ON_CHILD,
    DatasetSchema,
    InferenceRule,
    infer_activities,
    write_dataset,
)


@dataclass(frozen=True)
class LevelSpec:
    """How many objects a level gets.

    ``total`` spreads an exact number of objects over the parent level
    (every parent gets one first while supply lasts); ``per_parent`` is
    either a fixed count or an inclusive ``(low, high)`` range.
    """

    label: str
    total: int | None = None
    per_parent: int | tuple[int, int] | None = None

    def __post_init__(self) -> None:
        if (self.total is None) == (self.per_parent is None):
            raise ValueError(f"level {self.label!r}: give exactly one of total / per_parent")
        if self.total is not None and self.total < 0:
            raise ValueError("counts must be >= 0")
        if isinstance(self.per_parent, (tuple, list)):
            lo, hi = self.per_parent
            if not 0 <= lo <= hi:
                raise ValueError(f"bad per-parent range {self.per_parent!r}")
            object.__setattr__(self, "per_parent", (int(lo), int(hi)))
        elif self.per_parent is not None and self.per_parent < 0:
            raise ValueError("counts must be >= 0")


@dataclass(frozen=True)
class ActivitySpec:
    """``repeat`` draws per object, each kept with probability ``rate``.

    ``actor="creator"`` credits the object's creator, ``"random"`` a
    uniformly drawn user.
    """

    activity_type: str
    level: str
    rate: float = 1.0
    actor: str = "random"
    repeat: int = 1

    def __post_init__(self) -> None:
        if not 0.0 <= self.rate <= 1.0:
            raise ValueError(f"rate {self.rate} outside [0, 1]")
        if self.actor not in ("creator", "random"):
            raise ValueError(f"unknown actor {self.actor!r}")
        if self.repeat < 0:
            raise ValueError("repeat must be >= 0")


@dataclass(frozen=True)
class GenParams:
    seed: int
    levels: tuple[LevelSpec, ...]
    users: int
    activities: tuple[ActivitySpec, ...] = ()
    inference: tuple[InferenceRule, ...] = ()
    time_range: tuple[int, int] = (0, 1_000_000)

    def __post_init__(self) -> None:
        object.__setattr__(self, "levels", tuple(self.levels))
        object.__setattr__(self, "activities", tuple(self.activities))
        object.__setattr__(self, "inference", tuple(self.inference))
        object.__setattr__(self, "time_range", tuple(self.time_range))
        if self.users < 0:
            raise ValueError("user count must be >= 0")
        if self.time_range[0] > self.time_range[1]:
            raise ValueError("time range is reversed")
        if not self.levels:
            raise ValueError("need at least one level")
        labels = [lvl.label for lvl in self.levels]
        for spec in self.activities:
            if spec.level not in labels:
                raise ValueError(f"activity {spec.activity_type!r} on unknown level {spec.level!r}")

    def schema(self) -> DatasetSchema:
        levels = LevelSchema(tuple(lvl.label for lvl in self.levels))
        activities = {spec.activity_type: spec.level for spec in self.activities}
        for rule in self.inference:
            activities.setdefault(rule.activity_type, rule.level)
        return DatasetSchema(levels, activities, self.inference, self.time_range)

    @classmethod
    def from_dict(cls, data: Mapping) -> GenParams:
        return cls(
            seed=int(data.get("seed", 0)),
            levels=tuple(
                LevelSpec(d["label"], d.get("total"),
                          tuple(d["per_parent"]) if isinstance(d.get("per_parent"), list) else d.get("per_parent"))
                for d in data["levels"]
            ),
            users=int(data["users"]),
            activities=tuple(ActivitySpec(**d) for d in data.get("activities", ())),
            inference=tuple(InferenceRule(**d) for d in data.get("inference", ())),
            time_range=tuple(data.get("time_range", (0, 1_000_000))),
        )

    def to_dict(self) -> dict:
        return json.loads(json.dumps(asdict(self)))


@dataclass(frozen=True)
class SyntheticDataset:
    schema: DatasetSchema
    network: PreSocialNetwork


def _spread(rng: random.Random, parents: Sequence[ObjectNode], spec: LevelSpec) -> list[int]:
    n = len(parents)
    if spec.per_parent is not None:
        if isinstance(spec.per_parent, tuple):
            return [rng.randint(*spec.per_parent) for _ in parents]
        return [spec.per_parent] * n
    counts = [0] * n
    if n == 0:
        return counts
    remaining = spec.total
    if remaining >= n:
        counts = [1] * n
        remaining -= n
        for _ in range(remaining):
            counts[rng.randrange(n)] += 1
    else:
        for i in rng.sample(range(n), remaining):
            counts[i] = 1
    return counts


def generate(params: GenParams) -> SyntheticDataset:
    """Build a random hierarchical network, inferred activities included."""
    rng = random.Random(params.seed)
    schema = params.schema()
    start, end = params.time_range
    users = {f"u{i:05d}": User(f"u{i:05d}", f"user {i}") for i in range(params.users)}
    user_ids = sorted(users)
    objects: dict[str, ObjectNode] = {}

    if user_ids:
        first = params.levels[0]
        roots = first.total if first.total is not None else (
            rng.randint(*first.per_parent) if isinstance(first.per_parent, tuple) else first.per_parent)
        current = []
        for i in range(1, roots + 1):
            obj = ObjectNode(str(i), 1, None, rng.randint(start, end), rng.choice(user_ids))
            objects[obj.id] = obj
            current.append(obj)
        for depth, spec in enumerate(params.levels[1:], start=2):
            nxt = []
            for parent, count in zip(current, _spread(rng, current, spec)):
                for j in range(1, count + 1):
                    obj = ObjectNode(f"{parent.id}.{j}", depth, parent.id,
                                     rng.randint(parent.created_at, end), rng.choice(user_ids))
                    objects[obj.id] = obj
                    nxt.append(obj)
            current = nxt

    net = PreSocialNetwork(schema.levels, users, objects)
    activities: list[Activity] = []
    for spec in params.activities:
        level = schema.levels.index(spec.level)
        for obj in net.objects_at(level):
            for _ in range(spec.repeat):
                if rng.random() >= spec.rate:
                    continue
                if spec.actor == "creator":
                    activities.append(Activity(obj.creator_id, obj.id, RolePath.at(spec.activity_type, spec.level),
                                               obj.created_at))
                else:
                    activities.append(Activity(rng.choice(user_ids), obj.id,
                                               RolePath.at(spec.activity_type, spec.level),
                                               rng.randint(obj.created_at, end)))
    net = net.with_activities(activities)
    net = net.with_activities(net.activities + tuple(infer_activities(net, schema.inference)))
    return SyntheticDataset(schema, net)


def generate_files(params: GenParams, directory: str | os.PathLike) -> list[Path]:
    data = generate(params)
    return write_dataset(data.network, directory, data.schema)


def large_forum_params(seed: int = 0, users: int = 4_404) -> GenParams:
    """A single forum shaped like a mid-sized production board: 692 topic
    groups, 2,336 topics, 13,272 posts and 49 comments."""
    return GenParams(
        seed=seed,
        levels=(
            LevelSpec("forum", total=1),
            LevelSpec("group", total=692),
            LevelSpec("topic", total=2_336),
            LevelSpec("post", total=13_272),
            LevelSpec("comment", total=49),
        ),
        users=users,
        activities=(
            ActivitySpec("forum creation", "forum", actor="creator"),
            ActivitySpec("post authoring", "post", actor="creator"),
            ActivitySpec("post commenting", "comment", actor="creator"),
        ),
        inference=(
            InferenceRule(FIRST_CHILD_CREATOR, "group", "topic group addition"),
            InferenceRule(FIRST_CHILD_CREATOR, "topic", "topic addition"),
            InferenceRule(SUBSCRIBE_ON_CHILD, "topic", "topic member subscribing"),
        ),
        time_range=(1_219_276_800, 1_262_908_800),
    )


CASE_USERS = ("A", "B", "C", "D", "E")

# (id, creator); listed in creation order
_CASE_OBJECTS = (
    ("1", "A"), ("2", "C"),
    ("1.1", "A"), ("1.2", "C"), ("2.1", "E"), ("2.2", "E"),
    ("1.1.1", "B"), ("1.1.2", "D"), ("1.2.1", "A"), ("2.1.1", "A"), ("2.2.1", "D"), ("2.2.2", "C"),
)
_CASE_COMMENTS = (("B", "2.1.1"), ("D", "1.2.1"), ("D", "2.1.1"), ("D", "2.2.2"))


def case_study_schema() -> DatasetSchema:
    return DatasetSchema(
        LevelSchema(("forum", "topic", "post")),
        {"Is Creator": "forum", "Is Moderator": "topic", "Is Author": "post", "Is Commentator": "post"},
    )


def case_study_fixture() -> PreSocialNetwork:
    """Two forums, four topics, six posts and five users A to E.

    Forum creators, topic moderators, post authors and commentators follow
    the worked forum example; timestamps are synthetic and follow creation
    order.
    """
    schema = case_study_schema().levels
    users = {u: User(u, f"User {u}") for u in CASE_USERS}
    objects: dict[str, ObjectNode] = {}
    activities: list[Activity] = []
    base_role = {1: "Is Creator", 2: "Is Moderator", 3: "Is Author"}
    for t, (oid, creator) in enumerate(_CASE_OBJECTS, start=1):
        level = oid.count(".") + 1
        parent = oid.rsplit(".", 1)[0] if level > 1 else None
        objects[oid] = ObjectNode(oid, level, parent, t, creator)
        activities.append(Activity(creator, oid, RolePath.at(base_role[level], schema.label(level)), t))
    t = len(_CASE_OBJECTS)
    for user, post in _CASE_COMMENTS:
        t += 1
        activities.append(Activity(user, post, RolePath.at("Is Commentator", "post"), t))
    return PreSocialNetwork(schema, users, objects).with_activities(activities)


def write_case_study(directory: str | os.PathLike) -> list[Path]:
    return write_dataset(case_study_fixture(), directory, case_study_schema())
