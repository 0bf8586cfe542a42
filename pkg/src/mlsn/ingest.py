"""Reading, cleansing and assembling activity datasets.

A dataset directory holds four files::

    schema.json      {"levels": [...], "activities": {type: level}, "inference": [...]}
    users.csv        id,label
    objects.csv      id,level,parent_id,created_at,creator_id
    activities.csv   user_id,object_id,activity_type,timestamp

Parsing never silently drops a line: each one becomes a :class:`RawRecord`
or a :class:`Diagnostic`. Cleansing removes objects without a creation date
or creator together with their whole subtree and every activity that touched
the removed objects.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence, TextIO

from .core_model import (
    Activity,
    LevelSchema,
    ObjectNode,
    PreSocialNetwork,
    RolePath,
    User,
    Violation,
    validate_hierarchy,
    validate_objects,
)

logger = logging.getLogger(__name__)

USERS_FILE = "users.csv"
OBJECTS_FILE = "objects.csv"
ACTIVITIES_FILE = "activities.csv"
SCHEMA_FILE = "schema.json"

HEADERS = {
    "user": ("id", "label"),
    "object": ("id", "level", "parent_id", "created_at", "creator_id"),
    "activity": ("user_id", "object_id", "activity_type", "timestamp"),
}
FILES = {"user": USERS_FILE, "object": OBJECTS_FILE, "activity": ACTIVITIES_FILE}

FIRST_CHILD_CREATOR = "first_child_creator"
SUBSCRIBE_ON_CHILD = "subscribe_on_child"


class ParseError(ValueError):
    """Input that cannot be read at all (missing file, unusable header)."""


class HierarchyError(ValueError):
    def __init__(self, violations: Sequence[Violation]):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations[:10])
        more = f" (+{len(self.violations) - 10} more)" if len(self.violations) > 10 else ""
        super().__init__(f"{len(self.violations)} hierarchy violation(s): {lines}{more}")


@dataclass(frozen=True)
class InferenceRule:
    """Derive activities the log does not record explicitly.

    ``first_child_creator``: the creator of the earliest child of each object
    on ``level`` is credited with ``activity_type`` on that object.
    ``subscribe_on_child``: every user who created a child of an object on
    ``level`` gets one ``activity_type`` on it, timed at their first child.
    """

    rule: str
    level: str
    activity_type: str

    def __post_init__(self) -> None:
        if self.rule not in (FIRST_CHILD_CREATOR, SUBSCRIBE_ON_CHILD):
            raise ValueError(f"unknown inference rule {self.rule!r}")


@dataclass(frozen=True)
class DatasetSchema:
    levels: LevelSchema
    activities: Mapping[str, str]
    inference: tuple[InferenceRule, ...] = ()
    observation_range: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        for activity_type, label in self.activities.items():
            if label not in self.levels.levels:
                raise ValueError(f"activity type {activity_type!r} mapped to unknown level {label!r}")
        for rule in self.inference:
            if rule.level not in self.levels.levels:
                raise ValueError(f"inference rule on unknown level {rule.level!r}")
            if self.levels.index(rule.level) == self.levels.depth:
                raise ValueError(f"inference rule on bottom level {rule.level!r} has no children to inspect")
            if self.activities.get(rule.activity_type) != rule.level:
                raise ValueError(f"inferred type {rule.activity_type!r} must be declared on level {rule.level!r}")
        if self.observation_range is not None:
            start, end = self.observation_range
            if start > end:
                raise ValueError("observation range start is after its end")

    @classmethod
    def from_dict(cls, data: Mapping) -> DatasetSchema:
        try:
            levels = LevelSchema(tuple(data["levels"]))
            activities = dict(data.get("activities", {}))
        except (KeyError, TypeError) as exc:
            raise ParseError(f"schema is missing {exc}") from exc
        rules = tuple(InferenceRule(**r) for r in data.get("inference", ()))
        window = data.get("observation_range")
        return cls(levels, activities, rules, tuple(window) if window is not None else None)

    def to_dict(self) -> dict:
        out: dict = {
            "levels": list(self.levels.levels),
            "activities": dict(self.activities),
            "inference": [
                {"rule": r.rule, "level": r.level, "activity_type": r.activity_type} for r in self.inference
            ],
        }
        if self.observation_range is not None:
            out["observation_range"] = list(self.observation_range)
        return out


def load_schema(path: str | os.PathLike) -> DatasetSchema:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read schema {path}: {exc}") from exc
    try:
        return DatasetSchema.from_dict(data)
    except ValueError as exc:
        raise ParseError(f"invalid schema {path}: {exc}") from exc


@dataclass(frozen=True, slots=True)
class RawRecord:
    kind: str
    line: int
    fields: Mapping[str, str]
    source: str = ""

    @property
    def key(self) -> str:
        return self.fields.get("id", "")


@dataclass(frozen=True, slots=True)
class Diagnostic:
    source: str
    line: int
    code: str
    message: str

    def to_dict(self) -> dict:
        return {"source": self.source, "line": self.line, "code": self.code, "message": self.message}


def _read_table(stream: TextIO, kind: str, source: str) -> tuple[list[RawRecord], list[Diagnostic]]:
    expected = HEADERS[kind]
    text = stream.read()
    if not text.strip():
        return [], []
    reader = csv.reader(io.StringIO(text, newline=""))
    try:
        header = [h.strip() for h in next(reader)]
    except csv.Error as exc:
        raise ParseError(f"{source}: unreadable header: {exc}") from exc
    missing = [col for col in expected if col not in header]
    if missing:
        raise ParseError(f"{source}: header lacks column(s) {', '.join(missing)}")
    diags: list[Diagnostic] = []
    extra = [col for col in header if col not in expected]
    if extra:
        diags.append(Diagnostic(source, 1, "MalformedHeader", f"ignoring unknown column(s) {', '.join(extra)}"))
    records: list[RawRecord] = []
    while True:
        try:
            row = next(reader)
        except StopIteration:
            break
        except csv.Error as exc:
            diags.append(Diagnostic(source, reader.line_num, "MalformedRow", str(exc)))
            continue
        if not row:
            continue
        line = reader.line_num
        if len(row) != len(header):
            code = "MissingField" if len(row) < len(header) else "ExtraField"
            diags.append(Diagnostic(source, line, code, f"expected {len(header)} fields, got {len(row)}"))
            continue
        fields = {col: value.strip() for col, value in zip(header, row) if col in expected}
        records.append(RawRecord(kind, line, fields, source))
    return records, diags


def parse_input(
    inputs: str | os.PathLike | Mapping[str, str | os.PathLike | TextIO],
    schema: DatasetSchema,
) -> tuple[list[RawRecord], list[Diagnostic]]:
    """Parse users, objects and activities into raw records.

    ``inputs`` is a dataset directory or a mapping from record kind
    (``user``/``object``/``activity``) to a path or an open text stream.
    """
    if isinstance(inputs, (str, os.PathLike)):
        base = Path(inputs)
        sources: Mapping[str, str | os.PathLike | TextIO] = {k: base / name for k, name in FILES.items()}
    else:
        sources = inputs

    records: list[RawRecord] = []
    diags: list[Diagnostic] = []
    for kind in ("user", "object", "activity"):
        src = sources.get(kind)
        if src is None:
            raise ParseError(f"no input given for {kind} records")
        if isinstance(src, (str, os.PathLike)):
            name = Path(src).name
            try:
                with open(src, encoding="utf-8", newline="") as fh:
                    recs, ds = _read_table(fh, kind, name)
            except OSError as exc:
                raise ParseError(f"cannot open {name}: {exc}") from exc
            except UnicodeDecodeError as exc:
                raise ParseError(f"{name} is not UTF-8: {exc}") from exc
        else:
            recs, ds = _read_table(src, kind, getattr(src, "name", kind))
        records.extend(recs)
        diags.extend(ds)

    return _check_records(records, schema, diags)


def _check_records(
    records: list[RawRecord], schema: DatasetSchema, diags: list[Diagnostic]
) -> tuple[list[RawRecord], list[Diagnostic]]:
    kept: list[RawRecord] = []
    seen_users: set[str] = set()
    seen_objects: dict[str, RawRecord] = {}
    for rec in records:
        f = rec.fields
        if rec.kind == "user":
            if not f["id"]:
                diags.append(Diagnostic(rec.source, rec.line, "MissingField", "user without id"))
                continue
            if f["id"] in seen_users:
                diags.append(Diagnostic(rec.source, rec.line, "DuplicateId", f"user {f['id']!r} already defined"))
                continue
            seen_users.add(f["id"])
        elif rec.kind == "object":
            if not f["id"]:
                diags.append(Diagnostic(rec.source, rec.line, "MissingField", "object without id"))
                continue
            if f["level"] not in schema.levels.levels:
                diags.append(Diagnostic(rec.source, rec.line, "UnknownLevel", f"level {f['level']!r} not in schema"))
                continue
            first = seen_objects.get(f["id"])
            if first is not None:
                code = "MultipleParents" if first.fields["parent_id"] != f["parent_id"] else "DuplicateId"
                diags.append(Diagnostic(
                    rec.source, rec.line, code, f"object {f['id']!r} already defined on line {first.line}"))
                continue
            seen_objects[f["id"]] = rec
        else:
            if f["activity_type"] not in schema.activities:
                diags.append(Diagnostic(
                    rec.source, rec.line, "UnknownActivityType", f"activity type {f['activity_type']!r}"))
                continue
        kept.append(rec)
    return kept, diags


@dataclass(frozen=True, slots=True)
class Rejection:
    kind: str
    line: int
    subject: str
    rule: str
    detail: str = ""
    cascaded_from: str | None = None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "line": self.line,
            "id": self.subject,
            "rule": self.rule,
            "detail": self.detail,
            "cascaded_from": self.cascaded_from,
        }


RULES = ("MissingCreationDate", "MissingCreator", "UnknownReference", "BadTimestamp")


@dataclass
class CleansingReport:
    accepted: dict[str, int] = field(default_factory=dict)
    rejected: list[Rejection] = field(default_factory=list)

    def total(self, kind: str) -> int:
        return self.accepted.get(kind, 0) + sum(1 for r in self.rejected if r.kind == kind)

    def counts_by_rule(self) -> dict[str, int]:
        counts = Counter(r.rule for r in self.rejected)
        return {rule: counts.get(rule, 0) for rule in RULES}

    @property
    def cascaded(self) -> int:
        return sum(1 for r in self.rejected if r.cascaded_from is not None)

    def to_dict(self) -> dict:
        return {
            "accepted": dict(sorted(self.accepted.items())),
            "rejected_by_rule": self.counts_by_rule(),
            "cascaded": self.cascaded,
            "rejected": [r.to_dict() for r in self.rejected],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _as_int(value: str) -> int | None:
    try:
        return int(value)
    except ValueError:
        return None


def cleanse(records: Iterable[RawRecord], schema: DatasetSchema) -> tuple[list[RawRecord], CleansingReport]:
    """Drop records that break the dataset rules; never raises."""
    records = list(records)
    report = CleansingReport()
    users = [r for r in records if r.kind == "user"]
    objects = [r for r in records if r.kind == "object"]
    activities = [r for r in records if r.kind == "activity"]
    user_ids = {r.fields["id"] for r in users}

    removed: dict[str, Rejection] = {}
    for rec in objects:
        f = rec.fields
        rule = detail = None
        if not f["created_at"]:
            rule, detail = "MissingCreationDate", "empty created_at"
        elif _as_int(f["created_at"]) is None:
            rule, detail = "BadTimestamp", f"created_at {f['created_at']!r}"
        elif not f["creator_id"]:
            rule, detail = "MissingCreator", "empty creator_id"
        elif f["creator_id"] not in user_ids:
            rule, detail = "UnknownReference", f"creator {f['creator_id']!r}"
        if rule is not None:
            removed[f["id"]] = Rejection("object", rec.line, f["id"], rule, detail)

    object_ids = {r.fields["id"] for r in objects}
    for rec in objects:
        pid = rec.fields["parent_id"]
        if pid and pid not in object_ids and rec.fields["id"] not in removed:
            removed[rec.fields["id"]] = Rejection(
                "object", rec.line, rec.fields["id"], "UnknownReference", f"parent {pid!r} not found")

    children: dict[str, list[RawRecord]] = defaultdict(list)
    for rec in objects:
        if rec.fields["parent_id"]:
            children[rec.fields["parent_id"]].append(rec)
    for root in list(removed):
        stack = [root]
        while stack:
            for kid in children.get(stack.pop(), ()):
                kid_id = kid.fields["id"]
                if kid_id in removed:
                    continue
                removed[kid_id] = Rejection(
                    "object", kid.line, kid_id, "UnknownReference", "ancestor removed", cascaded_from=root)
                stack.append(kid_id)

    levels_of = {r.fields["id"]: r.fields["level"] for r in objects}
    kept_objects = [r for r in objects if r.fields["id"] not in removed]
    kept_activities: list[RawRecord] = []
    span = schema.observation_range
    activity_rejections: list[Rejection] = []
    for rec in activities:
        f = rec.fields
        subject = f"{f['user_id']}@{f['object_id']}"
        ts = _as_int(f["timestamp"])
        rej = None
        if f["object_id"] in removed:
            rej = Rejection("activity", rec.line, subject, "UnknownReference",
                            f"object {f['object_id']!r} removed",
                            cascaded_from=removed[f["object_id"]].cascaded_from or f["object_id"])
        elif f["object_id"] not in object_ids:
            rej = Rejection("activity", rec.line, subject, "UnknownReference", f"object {f['object_id']!r}")
        elif f["user_id"] not in user_ids:
            rej = Rejection("activity", rec.line, subject, "UnknownReference", f"user {f['user_id']!r}")
        elif schema.activities.get(f["activity_type"]) != levels_of[f["object_id"]]:
            rej = Rejection("activity", rec.line, subject, "UnknownReference",
                            f"{f['activity_type']!r} does not apply to level {levels_of[f['object_id']]!r}")
        elif ts is None:
            rej = Rejection("activity", rec.line, subject, "BadTimestamp", f"timestamp {f['timestamp']!r}")
        elif span is not None and not span[0] <= ts <= span[1]:
            rej = Rejection("activity", rec.line, subject, "BadTimestamp", f"timestamp {ts} outside {span}")
        if rej is None:
            kept_activities.append(rec)
        else:
            activity_rejections.append(rej)

    report.accepted = {"user": len(users), "object": len(kept_objects), "activity": len(kept_activities)}
    report.rejected = sorted(removed.values(), key=lambda r: r.line) + activity_rejections
    return users + kept_objects + kept_activities, report


def assemble(records: Iterable[RawRecord], schema: DatasetSchema) -> PreSocialNetwork:
    """Turn cleansed records into an (unvalidated) hierarchical network."""
    users: dict[str, User] = {}
    objects: dict[str, ObjectNode] = {}
    activities: list[Activity] = []
    levels = schema.levels
    for rec in records:
        f = rec.fields
        if rec.kind == "user":
            users[f["id"]] = User(f["id"], f.get("label", ""))
        elif rec.kind == "object":
            objects[f["id"]] = ObjectNode(
                id=f["id"],
                level=levels.index(f["level"]),
                parent_id=f["parent_id"] or None,
                created_at=int(f["created_at"]),
                creator_id=f["creator_id"],
            )
    for rec in records:
        if rec.kind == "activity":
            f = rec.fields
            label = levels.label(objects[f["object_id"]].level)
            activities.append(Activity(f["user_id"], f["object_id"], RolePath.at(f["activity_type"], label),
                                       int(f["timestamp"])))
    return PreSocialNetwork(levels, users, objects, tuple(sorted(activities, key=Activity.sort_key)))


def infer_activities(net: PreSocialNetwork, rules: Iterable[InferenceRule]) -> list[Activity]:
    """Activities implied by the dataset but missing from the log.

    Ties on the earliest child are broken by object id. Explicit activities
    always win: nothing is inferred where one of the same type exists.
    """
    explicit: dict[str, set[tuple[str, str]]] = defaultdict(set)
    for act in net.activities:
        explicit[act.role.base_role].add((act.object_id, act.user_id))

    added: list[Activity] = []
    for rule in rules:
        level = net.schema.index(rule.level)
        label = net.schema.label(level)
        have = explicit[rule.activity_type]
        typed_objects = {oid for oid, _ in have}
        for obj in net.objects_at(level):
            kids = sorted((net.objects[k] for k in net.children.get(obj.id, ())),
                          key=lambda o: (o.created_at, o.id))
            if not kids:
                continue
            if rule.rule == FIRST_CHILD_CREATOR:
                if obj.id in typed_objects:
                    continue
                if len(kids) > 1 and kids[0].created_at == kids[1].created_at:
                    logger.info("tie on earliest child of %s; using %s", obj.id, kids[0].id)
                first = kids[0]
                added.append(Activity(first.creator_id, obj.id, RolePath.at(rule.activity_type, label),
                                      first.created_at, inferred=True))
            else:
                first_by_user: dict[str, ObjectNode] = {}
                for kid in kids:
                    first_by_user.setdefault(kid.creator_id, kid)
                for user_id, kid in sorted(first_by_user.items()):
                    if (obj.id, user_id) in have:
                        continue
                    added.append(Activity(user_id, obj.id, RolePath.at(rule.activity_type, label),
                                          kid.created_at, inferred=True))
    return sorted(added, key=Activity.sort_key)


def build_hpsn(
    records: Iterable[RawRecord],
    schema: DatasetSchema,
    inferred: Iterable[Activity] | None = None,
) -> PreSocialNetwork:
    """Assemble and validate a hierarchical network.

    With ``inferred=None`` the schema's inference rules are applied here;
    pass an explicit iterable (possibly empty) to skip that.
    """
    records = list(records)
    problems = validate_objects(
        (ObjectNode(r.fields["id"], schema.levels.index(r.fields["level"]), r.fields["parent_id"] or None, 0, "")
         for r in records if r.kind == "object"),
        schema.levels,
    )
    if problems:
        raise HierarchyError(problems)
    net = assemble(records, schema)
    problems = validate_hierarchy(net)
    if problems:
        raise HierarchyError(problems)
    if inferred is None:
        inferred = infer_activities(net, schema.inference)
    return net.with_activities(net.activities + tuple(inferred))


@dataclass
class LoadResult:
    schema: DatasetSchema
    network: PreSocialNetwork
    diagnostics: list[Diagnostic]
    cleansing: CleansingReport


def load_dataset(directory: str | os.PathLike, schema: DatasetSchema | None = None) -> LoadResult:
    """Parse, cleanse, infer and build in one go."""
    directory = Path(directory)
    if schema is None:
        schema = load_schema(directory / SCHEMA_FILE)
    records, diags = parse_input(directory, schema)
    clean, report = cleanse(records, schema)
    net = build_hpsn(clean, schema)
    return LoadResult(schema, net, diags, report)


def _writer(fh: TextIO):
    return csv.writer(fh, lineterminator="\n")


def write_dataset(net: PreSocialNetwork, directory: str | os.PathLike, schema: DatasetSchema) -> list[Path]:
    """Write ``net`` in the dataset file format.

    Inferred activities are left out; loading the files re-derives them.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = [directory / SCHEMA_FILE, directory / USERS_FILE, directory / OBJECTS_FILE, directory / ACTIVITIES_FILE]
    paths[0].write_text(json.dumps(schema.to_dict(), indent=2) + "\n", encoding="utf-8")
    with open(paths[1], "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(HEADERS["user"])
        for uid in sorted(net.users):
            w.writerow((uid, net.users[uid].label))
    with open(paths[2], "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(HEADERS["object"])
        for obj in sorted(net.objects.values(), key=lambda o: (o.level, o.id)):
            w.writerow((obj.id, net.schema.label(obj.level), obj.parent_id or "", obj.created_at, obj.creator_id))
    with open(paths[3], "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(HEADERS["activity"])
        for act in net.activities:
            if act.inferred:
                continue
            if not act.is_original or len(act.role.path) != 1:
                raise ValueError(f"activity {act} has been moved; write the unflattened network")
            w.writerow((act.user_id, act.object_id, act.role.base_role, act.timestamp))
    return paths
