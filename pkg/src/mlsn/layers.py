"""User-user layers and relationship strengths over a flat pre-social network.

A layer is a pair of roles. With equal roles ``a`` the strength from ``x``
to ``y`` is the share of x's ``a``-objects that y also did ``a`` on. With
different roles ``a`` (done by x) and ``b`` (done by y) it is the share of
x's ``a``-objects that y did ``b`` on, out of those where anyone other than
x did ``b``. Objects are counted once no matter how many activity records
point at them.
"""

from __future__ import annotations

import enum
import os
import re
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Real
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import networkx as nx

from .core_model import Activity, PreSocialNetwork
from .flatten import RoleNaming, render_role

LABEL_SEP = " | "

Strength = Fraction | float


class UnknownLayer(KeyError):
    pass


class UncoverableRange(ValueError):
    pass


class LayerKind(enum.Enum):
    EQUAL_ROLES = "equal"
    DIFFERENT_ROLES = "different"


@dataclass(frozen=True, order=True)
class LayerKey:
    role_a: str
    role_b: str

    def __post_init__(self) -> None:
        if self.role_b < self.role_a:
            a, b = self.role_b, self.role_a
            object.__setattr__(self, "role_a", a)
            object.__setattr__(self, "role_b", b)

    @property
    def kind(self) -> LayerKind:
        return LayerKind.EQUAL_ROLES if self.role_a == self.role_b else LayerKind.DIFFERENT_ROLES

    @property
    def label(self) -> str:
        return f"{self.role_a}{LABEL_SEP}{self.role_b}"

    def other(self, role: str) -> str:
        if role == self.role_a:
            return self.role_b
        if role == self.role_b:
            return self.role_a
        raise ValueError(f"{role!r} is not part of layer {self.label!r}")

    @classmethod
    def parse(cls, text: str) -> LayerKey:
        parts = text.split(LABEL_SEP)
        if len(parts) != 2:
            raise ValueError(f"layer label {text!r} is not of the form 'role{LABEL_SEP}role'")
        return cls(parts[0].strip(), parts[1].strip())


@dataclass(frozen=True)
class Edge:
    layer: LayerKey
    source: str
    target: str
    source_role: str
    strength: Strength
    support: int

    def sort_key(self) -> tuple:
        return (self.layer, self.source, self.target, self.source_role)

    @property
    def target_role(self) -> str:
        return self.layer.other(self.source_role)

    @property
    def label(self) -> str:
        """Layer name oriented from the source's role to the target's."""
        return f"{self.source_role}{LABEL_SEP}{self.target_role}"


def format_strength(value: Strength) -> str:
    if isinstance(value, Fraction):
        return str(value)
    return repr(float(value))


def parse_strength(text: str) -> Strength:
    if "." in text or "e" in text.lower():
        return float(text)
    return Fraction(text)


class ActivityIndex:
    """Distinct (user, role, object) triples of a flat network, both ways round."""

    def __init__(self, activities: Iterable[tuple[str, str, str]]):
        self.by_object: dict[str, dict[str, set[str]]] = defaultdict(lambda: defaultdict(set))
        self.by_user: dict[str, dict[str, set[str]]] = defaultdict(lambda: defaultdict(set))
        for user, role, obj in activities:
            self.by_object[obj][role].add(user)
            self.by_user[user][role].add(obj)

    @classmethod
    def from_network(
        cls,
        net: PreSocialNetwork,
        naming: RoleNaming = RoleNaming(),
        window: Window | None = None,
    ) -> ActivityIndex:
        if not net.is_flat:
            raise ValueError("layers are extracted from flat networks; flatten first")
        names: dict = {}

        def name(act: Activity) -> str:
            rendered = names.get(act.role)
            if rendered is None:
                rendered = names[act.role] = render_role(act.role, naming, net.schema)
            return rendered

        return cls(
            (a.user_id, name(a), a.object_id)
            for a in net.activities
            if window is None or window.contains(a.timestamp)
        )

    @property
    def roles(self) -> set[str]:
        return {role for per_role in self.by_object.values() for role in per_role}

    def objects_of(self, user: str, role: str) -> set[str]:
        return self.by_user.get(user, {}).get(role, set())


def _index(source: PreSocialNetwork | ActivityIndex, naming: RoleNaming) -> ActivityIndex:
    if isinstance(source, ActivityIndex):
        return source
    return ActivityIndex.from_network(source, naming)


def enumerate_layers(source: PreSocialNetwork | ActivityIndex, naming: RoleNaming = RoleNaming()) -> list[LayerKey]:
    """Every role pair that links at least two distinct users on some object."""
    index = _index(source, naming)
    found: set[LayerKey] = set()
    for per_role in index.by_object.values():
        roles = sorted(per_role)
        for i, a in enumerate(roles):
            users_a = per_role[a]
            if len(users_a) > 1:
                found.add(LayerKey(a, a))
            for b in roles[i + 1:]:
                users_b = per_role[b]
                if len(users_a) > 1 or len(users_b) > 1 or users_a != users_b:
                    found.add(LayerKey(a, b))
    return sorted(found)


def strength_equal(
    source: PreSocialNetwork | ActivityIndex, x: str, y: str, role: str, naming: RoleNaming = RoleNaming()
) -> Fraction | None:
    """Share of x's ``role`` objects on which y also did ``role``; ``None`` if none."""
    if x == y:
        raise ValueError("strength is defined between two different users")
    index = _index(source, naming)
    mine = index.objects_of(x, role)
    shared = len(mine & index.objects_of(y, role))
    if shared == 0:
        return None
    return Fraction(shared, len(mine))


def strength_diff(
    source: PreSocialNetwork | ActivityIndex,
    x: str,
    y: str,
    role_x: str,
    role_y: str,
    naming: RoleNaming = RoleNaming(),
) -> Fraction | None:
    """Share of x's ``role_x`` objects that y did ``role_y`` on.

    The denominator only counts x's objects where some user other than x
    did ``role_y``.
    """
    if x == y:
        raise ValueError("strength is defined between two different users")
    if role_x == role_y:
        raise ValueError("use strength_equal for equal roles")
    index = _index(source, naming)
    mine = index.objects_of(x, role_x)
    shared = len(mine & index.objects_of(y, role_y))
    if shared == 0:
        return None
    reachable = sum(1 for obj in mine if index.by_object[obj].get(role_y, set()) - {x})
    return Fraction(shared, reachable)


def strength(
    source: PreSocialNetwork | ActivityIndex,
    x: str,
    y: str,
    role_x: str,
    role_y: str,
    naming: RoleNaming = RoleNaming(),
) -> Fraction | None:
    if role_x == role_y:
        return strength_equal(source, x, y, role_x, naming)
    return strength_diff(source, x, y, role_x, role_y, naming)


def _layer_edges(index: ActivityIndex, layer: LayerKey) -> list[Edge]:
    a, b = layer.role_a, layer.role_b
    shared: dict[tuple[str, str, str], int] = defaultdict(int)
    total: dict[tuple[str, str], int] = defaultdict(int)

    if a == b:
        for per_role in index.by_object.values():
            users = per_role.get(a)
            if not users or len(users) < 2:
                continue
            for x in users:
                for y in users:
                    if x != y:
                        shared[x, y, a] += 1
        for (x, _, _) in list(shared):
            total[x, a] = len(index.objects_of(x, a))
    else:
        for per_role in index.by_object.values():
            users_a = per_role.get(a)
            users_b = per_role.get(b)
            if not users_a or not users_b:
                continue
            for x in users_a:
                if users_b - {x}:
                    total[x, a] += 1
                for y in users_b:
                    if x != y:
                        shared[x, y, a] += 1
                        shared[y, x, b] += 1
            for y in users_b:
                if users_a - {y}:
                    total[y, b] += 1

    return [
        Edge(layer, x, y, role, Fraction(n, total[x, role]), n)
        for (x, y, role), n in shared.items()
    ]


class Model(enum.Enum):
    NGRAPH = "ngraph"
    MULTIGRAPH = "multigraph"


@dataclass(frozen=True)
class SocialNetwork:
    """Edges of the selected layers, held as one graph per layer (n-graph)
    or one labelled graph (multi-graph)."""

    model: Model
    layers: tuple[LayerKey, ...]
    edges: tuple[Edge, ...]
    base_roles: Mapping[str, str] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "layers", tuple(sorted(self.layers)))
        object.__setattr__(self, "edges", tuple(sorted(self.edges, key=Edge.sort_key)))

    def by_layer(self) -> dict[LayerKey, tuple[Edge, ...]]:
        grouped: dict[LayerKey, list[Edge]] = {layer: [] for layer in self.layers}
        for edge in self.edges:
            grouped[edge.layer].append(edge)
        return {layer: tuple(edges) for layer, edges in grouped.items()}

    def with_model(self, model: Model | str) -> SocialNetwork:
        return SocialNetwork(Model(model), self.layers, self.edges, self.base_roles)

    def pairs(self, layer: LayerKey) -> set[tuple[str, str]]:
        return {(e.source, e.target) for e in self.edges if e.layer == layer}

    def edge(self, source: str, target: str, source_role: str, target_role: str) -> Edge | None:
        layer = LayerKey(source_role, target_role)
        for e in self.edges:
            if e.layer == layer and e.source == source and e.target == target and e.source_role == source_role:
                return e
        return None

    def to_networkx(self) -> dict[LayerKey, nx.MultiDiGraph] | nx.MultiDiGraph:
        """Export in the shape of the model: one graph per layer, or a single
        graph whose edge keys carry the layer label.

        Per-layer graphs are multi-graphs too, keyed by the source's role,
        since x may reach y in a different-roles layer in both orientations.
        """
        if self.model is Model.NGRAPH:
            graphs: dict[LayerKey, nx.MultiDiGraph] = {}
            for layer, edges in self.by_layer().items():
                g = nx.MultiDiGraph(layer=layer.label)
                for e in edges:
                    g.add_edge(e.source, e.target, key=e.source_role, strength=e.strength, support=e.support)
                graphs[layer] = g
            return graphs
        g = nx.MultiDiGraph(layers=[layer.label for layer in self.layers])
        for e in self.edges:
            g.add_edge(e.source, e.target, key=e.label, strength=e.strength, support=e.support)
        return g

    @classmethod
    def from_networkx(cls, graph: Mapping[LayerKey, nx.MultiDiGraph] | nx.MultiDiGraph) -> SocialNetwork:
        edges: list[Edge] = []
        if isinstance(graph, nx.Graph):
            layers = [LayerKey.parse(label) for label in graph.graph.get("layers", ())]
            for u, v, key, data in graph.edges(keys=True, data=True):
                source_role = key.split(LABEL_SEP)[0]
                edges.append(Edge(LayerKey.parse(key), u, v, source_role, data["strength"], data["support"]))
            return cls(Model.MULTIGRAPH, tuple(layers), tuple(edges))
        for layer, g in graph.items():
            for u, v, key, data in g.edges(keys=True, data=True):
                edges.append(Edge(layer, u, v, key, data["strength"], data["support"]))
        return cls(Model.NGRAPH, tuple(graph), tuple(edges))

    def edge_rows(self, edges: Iterable[Edge] | None = None) -> list[str]:
        rows = []
        for e in sorted(self.edges if edges is None else edges, key=lambda e: (e.label, e.source, e.target)):
            rows.append("\t".join((e.source, e.target, format_strength(e.strength), str(e.support), e.label)))
        return rows

    def write(self, directory: str | os.PathLike) -> list[Path]:
        """Write ``edges.tsv`` (multi-graph) or one TSV per layer (n-graph)."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        header = "from_user\tto_user\tstrength\tsupport\tlayer"
        written: list[Path] = []
        if self.model is Model.MULTIGRAPH:
            path = directory / "edges.tsv"
            path.write_text("\n".join([header, *self.edge_rows()]) + "\n", encoding="utf-8")
            return [path]
        used: set[str] = set()
        for layer, edges in self.by_layer().items():
            stem = layer_slug(layer)
            name, n = stem, 1
            while name in used:
                n += 1
                name = f"{stem}_{n}"
            used.add(name)
            path = directory / f"{name}.tsv"
            path.write_text("\n".join([header, *self.edge_rows(edges)]) + "\n", encoding="utf-8")
            written.append(path)
        return written


def layer_slug(layer: LayerKey) -> str:
    return "__".join(re.sub(r"[^0-9A-Za-z]+", "_", role).strip("_") for role in (layer.role_a, layer.role_b))


def read_edges(path: str | os.PathLike) -> list[Edge]:
    edges = []
    with open(path, encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            source, target, value, support, label = line.rstrip("\n").split("\t")
            edges.append(Edge(LayerKey.parse(label), source, target, label.split(LABEL_SEP)[0],
                              parse_strength(value), int(support)))
    return edges


def _select(index: ActivityIndex, layers, naming: RoleNaming) -> list[LayerKey]:
    available = enumerate_layers(index, naming)
    if layers == "all" or layers is None:
        return available
    chosen = [layer if isinstance(layer, LayerKey) else LayerKey.parse(layer) if isinstance(layer, str)
              else LayerKey(*layer) for layer in layers]
    if not chosen:
        raise ValueError("no layers selected")
    missing = [layer.label for layer in chosen if layer not in set(available)]
    if missing:
        raise UnknownLayer(f"layer(s) not present in the network: {', '.join(missing)}")
    return sorted(set(chosen))


def build_sn(
    net: PreSocialNetwork,
    layers: Iterable[LayerKey | str | tuple[str, str]] | str = "all",
    model: Model | str = Model.NGRAPH,
    naming: RoleNaming = RoleNaming(),
    window: TimeWindowSpec | None = None,
    time_range: tuple[Real, Real] | None = None,
) -> SocialNetwork:
    """Compute every positive-strength edge of the selected layers.

    With a ``window`` spec strengths are the weighted sum over time windows;
    edges whose weighted strength is zero are dropped.
    """
    index = ActivityIndex.from_network(net, naming)
    selected = _select(index, layers, naming)
    bases = {render_role(role, naming, net.schema): role.base_role for role in {a.role for a in net.activities}}
    if window is None:
        edges = [e for layer in selected for e in _layer_edges(index, layer)]
        return SocialNetwork(Model(model), tuple(selected), tuple(edges), bases)

    static = {(e.layer, e.source, e.target, e.source_role): e.support
              for layer in selected for e in _layer_edges(index, layer)}
    combined = _windowed_edges(net, selected, window, naming, time_range)
    edges = [
        Edge(layer, x, y, role, value, static[layer, x, y, role])
        for (layer, x, y, role), value in combined.items()
        if value > 0
    ]
    return SocialNetwork(Model(model), tuple(selected), tuple(edges), bases)


@dataclass(frozen=True)
class Window:
    start: Fraction
    end: Fraction
    closed: bool = False  # the last window includes its end point

    def contains(self, t: Real) -> bool:
        return self.start <= t < self.end or (self.closed and t == self.end)


@dataclass(frozen=True)
class TimeWindowSpec:
    """Sliding windows of ``length`` moved by ``step``, or ``k`` equal periods."""

    mode: str
    length: Fraction | None = None
    step: Fraction | None = None
    k: int | None = None
    weights: tuple[Real, ...] | None = None

    @classmethod
    def sliding(cls, length: Real, step: Real, weights: Sequence[Real] | None = None) -> TimeWindowSpec:
        return cls("sliding", Fraction(length), Fraction(step), None, tuple(weights) if weights else None)

    @classmethod
    def equal_periods(cls, k: int, weights: Sequence[Real] | None = None) -> TimeWindowSpec:
        return cls("equal", None, None, int(k), tuple(weights) if weights else None)

    def resolve_weights(self, count: int) -> tuple[Real, ...]:
        if self.weights is None:
            return linear_weights(count)
        if len(self.weights) != count:
            raise ValueError(f"{len(self.weights)} weights given for {count} windows")
        if any(w < 0 for w in self.weights):
            raise ValueError("window weights must be non-negative")
        total = sum(self.weights)
        exact = all(isinstance(w, (int, Fraction)) for w in self.weights)
        if (total != 1) if exact else abs(total - 1) > 1e-9:
            raise ValueError(f"window weights sum to {total}, not 1")
        return self.weights


def linear_weights(count: int) -> tuple[Fraction, ...]:
    """Weight i of m is 2i / (m (m + 1)); the latest window weighs most."""
    return tuple(Fraction(2 * i, count * (count + 1)) for i in range(1, count + 1))


def make_windows(spec: TimeWindowSpec, time_range: tuple[Real, Real]) -> list[Window]:
    start, end = Fraction(time_range[0]), Fraction(time_range[1])
    if end < start:
        raise ValueError("time range ends before it starts")
    if spec.mode == "equal":
        if spec.k is None or spec.k < 1:
            raise ValueError("equal periods need k >= 1")
        if end == start:
            if spec.k > 1:
                raise UncoverableRange(f"cannot split an empty range into {spec.k} periods")
            return [Window(start, end, True)]
        length = step = (end - start) / spec.k
    elif spec.mode == "sliding":
        length, step = spec.length, spec.step
        if length is None or step is None or length <= 0 or step <= 0:
            raise ValueError("sliding windows need positive length and step")
        if step > length:
            raise UncoverableRange(f"step {step} exceeds window length {length}; gaps would go uncovered")
    else:
        raise ValueError(f"unknown window mode {spec.mode!r}")

    windows: list[Window] = []
    lo = start
    while True:
        hi = lo + length
        if hi >= end:
            windows.append(Window(lo, end, True))
            return windows
        windows.append(Window(lo, hi, False))
        lo += step


def activity_time_range(net: PreSocialNetwork) -> tuple[int, int]:
    if not net.activities:
        raise ValueError("network has no activities to take a time range from")
    stamps = [a.timestamp for a in net.activities]
    return min(stamps), max(stamps)


def _windowed_edges(
    net: PreSocialNetwork,
    layers: Sequence[LayerKey],
    spec: TimeWindowSpec,
    naming: RoleNaming,
    time_range: tuple[Real, Real] | None,
) -> dict[tuple[LayerKey, str, str, str], Strength]:
    windows = make_windows(spec, time_range or activity_time_range(net))
    weights = spec.resolve_weights(len(windows))
    combined: dict[tuple[LayerKey, str, str, str], Strength] = {}
    for window, weight in zip(windows, weights):
        index = ActivityIndex.from_network(net, naming, window)
        for layer in layers:
            for e in _layer_edges(index, layer):
                key = (layer, e.source, e.target, e.source_role)
                combined[key] = combined.get(key, 0) + weight * e.strength
    return combined


def windowed_strength(
    net: PreSocialNetwork,
    x: str,
    y: str,
    role_x: str,
    role_y: str,
    spec: TimeWindowSpec,
    time_range: tuple[Real, Real] | None = None,
    naming: RoleNaming = RoleNaming(),
) -> Strength | None:
    """Weighted sum of per-window strengths; ``None`` when no window links x to y."""
    windows = make_windows(spec, time_range or activity_time_range(net))
    weights = spec.resolve_weights(len(windows))
    total: Strength | None = None
    for window, weight in zip(windows, weights):
        value = strength(ActivityIndex.from_network(net, naming, window), x, y, role_x, role_y)
        if value is not None:
            total = (total or 0) + weight * value
    return total
