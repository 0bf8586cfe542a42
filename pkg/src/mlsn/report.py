"""Tables describing networks before and after flattening.

Every table is available as plain text and as CSV. Ratios are kept as
fractions internally and printed both exactly and as rounded percentages.
"""

from __future__ import annotations

import csv
import io
import os
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .core_model import PreSocialNetwork
from .flatten import RoleNaming, render_role
from .layers import LayerKey, SocialNetwork


def percent(value: Fraction | None, digits: int = 2) -> str:
    if value is None:
        return "-"
    return f"{float(value * 100):.{digits}f}%"


def ratio(value: Fraction | None) -> str:
    return "-" if value is None else str(value)


def render_table(headers: Sequence[str], rows: Iterable[Sequence]) -> str:
    rows = [tuple(row) for row in rows]
    cells = [[str(h) for h in headers]] + [[str(c) for c in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    numeric = [bool(rows) and all(isinstance(row[i], (int, float, Fraction)) or str(row[i]).endswith("%")
                                  for row in rows) for i in range(len(headers))]
    lines = []
    for n, row in enumerate(cells):
        lines.append("  ".join(c.rjust(w) if numeric[i] else c.ljust(w)
                               for i, (c, w) in enumerate(zip(row, widths))))
        if n == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(line.rstrip() for line in lines) + "\n"


def table_csv(headers: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(headers)
    w.writerows(rows)
    return buf.getvalue()


class Table:
    headers: tuple[str, ...] = ()

    def rows(self) -> list[tuple]:
        raise NotImplementedError

    def csv_rows(self) -> list[tuple]:
        return self.rows()

    def to_text(self) -> str:
        return render_table(self.headers, self.rows())

    def to_csv(self) -> str:
        return table_csv(self.headers, self.csv_rows())

    def write(self, directory: str | os.PathLike, stem: str) -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        txt, csv_path = directory / f"{stem}.txt", directory / f"{stem}.csv"
        txt.write_text(self.to_text(), encoding="utf-8")
        csv_path.write_text(self.to_csv(), encoding="utf-8")
        return [txt, csv_path]


@dataclass(frozen=True)
class InventoryRow:
    activity_type: str
    activities: int
    users: int
    share: Fraction | None


@dataclass
class ActivityInventory(Table):
    rows_: list[InventoryRow]
    total_users: int
    active_users: int

    headers = ("activity_type", "activities", "users", "share_of_users")

    @property
    def active_share(self) -> Fraction | None:
        return Fraction(self.active_users, self.total_users) if self.total_users else None

    def rows(self) -> list[tuple]:
        return [(r.activity_type, r.activities, r.users, percent(r.share)) for r in self.rows_]

    def csv_rows(self) -> list[tuple]:
        return [(r.activity_type, r.activities, r.users, ratio(r.share)) for r in self.rows_]

    def to_text(self) -> str:
        summary = (f"active users: {self.active_users} of {self.total_users} "
                   f"({percent(self.active_share)}, exactly {ratio(self.active_share)})\n")
        return render_table(self.headers, self.rows()) + summary

    def row(self, activity_type: str) -> InventoryRow:
        for r in self.rows_:
            if r.activity_type == activity_type:
                return r
        raise KeyError(activity_type)


def activity_inventory(
    net: PreSocialNetwork,
    total_users: int | None = None,
    rendered: bool = False,
    naming: RoleNaming = RoleNaming(),
) -> ActivityInventory:
    """Per activity type: how many activities, by how many distinct users.

    ``total_users`` defaults to the number of users in the network; pass the
    registered-user count when the network only holds active users.
    """
    total = len(net.users) if total_users is None else total_users
    counts: Counter[str] = Counter()
    who: dict[str, set[str]] = defaultdict(set)
    for act in net.activities:
        key = render_role(act.role, naming, net.schema) if rendered else act.role.base_role
        counts[key] += 1
        who[key].add(act.user_id)
    rows = [
        InventoryRow(key, counts[key], len(who[key]), Fraction(len(who[key]), total) if total else None)
        for key in sorted(counts)
    ]
    active = len({a.user_id for a in net.activities})
    return ActivityInventory(rows, total, active)


@dataclass(frozen=True)
class FlatteningRow:
    activity_type: str
    before: int
    after: int
    expected_after: int
    created: bool  # some activities were copied down onto children
    vanished: int  # activities on childless objects that had nowhere to go


@dataclass
class FlatteningStats(Table):
    end_level: int
    end_label: str
    rows_: list[FlatteningRow]

    headers = ("activity_type", "before", "created", "after", "vanished")

    @property
    def consistent(self) -> bool:
        return all(r.after == r.expected_after for r in self.rows_)

    @property
    def total_before(self) -> int:
        return sum(r.before for r in self.rows_)

    @property
    def total_after(self) -> int:
        return sum(r.after for r in self.rows_)

    def rows(self) -> list[tuple]:
        return [(r.activity_type, r.before, "+" if r.created else "", r.after, r.vanished) for r in self.rows_]

    def row(self, activity_type: str) -> FlatteningRow:
        for r in self.rows_:
            if r.activity_type == activity_type:
                return r
        raise KeyError(activity_type)


def flattening_stats(before: PreSocialNetwork, after: PreSocialNetwork) -> FlatteningStats:
    """Activity counts per type before and after flattening.

    ``expected_after`` is predicted from the hierarchy alone: one activity
    per lifted or untouched activity, one per end-level descendant for each
    pushed one.
    """
    if before.is_flat or not after.is_flat:
        raise ValueError("compare a hierarchical network with its flattened form")
    end = after.end_level
    before_n: Counter[str] = Counter()
    expected: Counter[str] = Counter()
    vanished: Counter[str] = Counter()
    created: set[str] = set()
    fanout: dict[str, int] = {}
    for act in before.activities:
        kind = act.role.base_role
        before_n[kind] += 1
        level = before.activity_level(act)
        if level >= end:
            expected[kind] += 1
            continue
        created.add(kind)
        if act.object_id not in fanout:
            fanout[act.object_id] = len(before.descendants_at_level(act.object_id, end))
        expected[kind] += fanout[act.object_id]
        if fanout[act.object_id] == 0:
            vanished[kind] += 1
    after_n = Counter(a.role.base_role for a in after.activities)
    kinds = sorted(set(before_n) | set(after_n))
    rows = [
        FlatteningRow(k, before_n[k], after_n[k], expected[k], k in created, vanished[k])
        for k in kinds
    ]
    return FlatteningStats(end, before.schema.label(end), rows)


def baseline_network(net: PreSocialNetwork, end_level: int | str) -> PreSocialNetwork:
    """Flat network made of the activities already on ``end_level``, nothing moved."""
    end = net.schema.resolve(end_level)
    return net.with_activities((a for a in net.activities if net.activity_level(a) == end), end_level=end)


def classify_pairs(sn: SocialNetwork, baseline: SocialNetwork, layer: LayerKey) -> dict[tuple[str, str], str]:
    """``"new"`` or ``"moved"`` for every connected (source, target) pair of ``layer``."""
    known = baseline.pairs(layer) if layer in baseline.layers else set()
    return {pair: "moved" if pair in known else "new" for pair in sorted(sn.pairs(layer))}


def _base_pair(sn: SocialNetwork, layer: LayerKey) -> tuple[str, str]:
    bases = sn.base_roles
    return tuple(sorted((bases.get(layer.role_a, layer.role_a), bases.get(layer.role_b, layer.role_b))))


@dataclass(frozen=True)
class LayerRow:
    end_level: int
    layer: LayerKey
    base_pair: tuple[str, str]
    pairs: int
    new_pairs: int
    moved_pairs: int
    layer_is_new: bool  # the layer has no relationships at all without flattening


@dataclass(frozen=True)
class CrossLevelRatio:
    base_pair: tuple[str, str]
    upper_level: int
    lower_level: int
    ratio: Fraction | None  # pairs at lower level / pairs at upper level


@dataclass
class LayerStats(Table):
    rows_: list[LayerRow]
    level_labels: Mapping[int, str] = field(default_factory=dict)

    headers = ("end_level", "layer", "pairs", "new_pairs", "moved_pairs", "new_layer")

    def levels(self) -> list[int]:
        return sorted({r.end_level for r in self.rows_} | set(self.level_labels))

    def totals(self, end_level: int) -> tuple[int, int, int]:
        rows = [r for r in self.rows_ if r.end_level == end_level]
        return (sum(r.pairs for r in rows), sum(r.new_pairs for r in rows), sum(r.moved_pairs for r in rows))

    def new_share(self, end_level: int) -> Fraction | None:
        total, new, _ = self.totals(end_level)
        return Fraction(new, total) if total else None

    def moved_share(self, end_level: int) -> Fraction | None:
        total, _, moved = self.totals(end_level)
        return Fraction(moved, total) if total else None

    def ratios(self) -> list[CrossLevelRatio]:
        """Pair counts of each base-role layer at one end level over the level above."""
        levels = self.levels()
        counts: dict[tuple[str, str], Counter[int]] = defaultdict(Counter)
        for r in self.rows_:
            counts[r.base_pair][r.end_level] += r.pairs
        out = []
        for pair in sorted(counts):
            for upper, lower in zip(levels, levels[1:]):
                hi = counts[pair][upper]
                out.append(CrossLevelRatio(pair, upper, lower, Fraction(counts[pair][lower], hi) if hi else None))
        return out

    def label(self, end_level: int) -> str:
        return self.level_labels.get(end_level, str(end_level))

    def rows(self) -> list[tuple]:
        return [(self.label(r.end_level), r.layer.label, r.pairs, r.new_pairs, r.moved_pairs,
                 "+" if r.layer_is_new else "") for r in self.rows_]

    def to_text(self) -> str:
        out = [render_table(self.headers, self.rows())]
        for level in self.levels():
            total, new, moved = self.totals(level)
            out.append(f"{self.label(level)}: {total} relationships, new {percent(self.new_share(level))}, "
                       f"moved {percent(self.moved_share(level))}\n")
        ratio_rows = [(" - ".join(r.base_pair), f"{self.label(r.lower_level)} / {self.label(r.upper_level)}",
                       "-" if r.ratio is None else f"{float(r.ratio):.2f}") for r in self.ratios()]
        if ratio_rows:
            out.append("\n" + render_table(("base_layer", "levels", "ratio"), ratio_rows))
        return "".join(out)


def layer_stats(
    flattened: Mapping[int, SocialNetwork],
    baselines: Mapping[int, SocialNetwork],
    level_labels: Mapping[int, str] | None = None,
) -> LayerStats:
    """Classify every relationship as new (absent from the baseline) or moved."""
    rows: list[LayerRow] = []
    for level in sorted(flattened):
        sn = flattened[level]
        base = baselines.get(level)
        for layer in sn.layers:
            pairs = sn.pairs(layer)
            known = base.pairs(layer) if base is not None else set()
            moved = len(pairs & known)
            rows.append(LayerRow(level, layer, _base_pair(sn, layer), len(pairs), len(pairs) - moved, moved,
                                 not known))
    return LayerStats(rows, dict(level_labels or {}))


PLOT_HEADERS = ("end_level", "layer", "count", "is_new")


def emit_plot_data(stats: LayerStats, path: str | os.PathLike | None = None) -> str:
    """Long-format CSV, one row per (end level, layer)."""
    text = table_csv(PLOT_HEADERS, [
        (stats.label(r.end_level), r.layer.label, r.pairs, "true" if r.layer_is_new else "false")
        for r in stats.rows_
    ])
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def read_plot_data(path: str | os.PathLike) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        return [
            {"end_level": row["end_level"], "layer": row["layer"], "count": int(row["count"]),
             "is_new": row["is_new"] == "true"}
            for row in csv.DictReader(fh)
        ]


def fpsn_summary(net: PreSocialNetwork, naming: RoleNaming = RoleNaming()) -> str:
    """Short text description of a flat network."""
    end = net.end_level
    roles = Counter(render_role(a.role, naming, net.schema) for a in net.activities)
    moved = sum(1 for a in net.activities if not a.is_original)
    lines = [
        f"end level: {net.schema.label(end)} ({end})" if end else "hierarchical network",
        f"users: {len(net.users)}",
        f"objects on end level: {len(net.objects_at(end)) if end else len(net.objects)}",
        f"activities: {len(net.activities)} ({moved} moved, {len(net.activities) - moved} original)",
        "",
    ]
    return "\n".join(lines) + render_table(("role", "activities"), sorted(roles.items()))
