"""Independent reference computations used by the tests.

Nothing here calls into mlsn's traversal or strength code: ancestors are found
by walking a plain parent dict, descendants by checking every object's
ancestor chain, strengths by literal set definitions.
"""

from __future__ import annotations

import random
from collections import Counter
from fractions import Fraction
from itertools import permutations

from mlsn.core_model import Activity, LevelSchema, ObjectNode, PreSocialNetwork, RolePath, User

LABELS = ("alpha", "beta", "gamma", "delta", "epsilon")
BASE_ROLES = ("writes", "reads", "likes")


def random_hpsn(seed: int, max_levels: int = 5, max_objects: int = 200, max_activities: int = 1000,
                n_users: int | None = None) -> PreSocialNetwork:
    """A random forest with activities scattered over every level.

    Some objects are left childless on purpose so that pushes can vanish.
    """
    rng = random.Random(seed)
    depth = rng.randint(1, max_levels)
    schema = LevelSchema(LABELS[:depth])
    n_objects = rng.randint(depth, max_objects)
    users = {f"u{i}": User(f"u{i}") for i in range(n_users or rng.randint(2, 12))}
    user_ids = sorted(users)

    by_level: dict[int, list[str]] = {lvl: [] for lvl in range(1, depth + 1)}
    objects: dict[str, ObjectNode] = {}
    for i in range(n_objects):
        level = 1 if i == 0 else (i % depth) + 1 if i < depth else rng.randint(1, depth)
        parent = rng.choice(by_level[level - 1]) if level > 1 else None
        oid = f"o{i}"
        objects[oid] = ObjectNode(oid, level, parent, rng.randint(0, 1000), rng.choice(user_ids))
        by_level[level].append(oid)

    all_ids = sorted(objects)
    activities = []
    for _ in range(rng.randint(0, max_activities)):
        oid = rng.choice(all_ids)
        activities.append(Activity(
            rng.choice(user_ids), oid, RolePath.at(rng.choice(BASE_ROLES), schema.label(objects[oid].level)),
            rng.randint(0, 1000),
        ))
    return PreSocialNetwork(schema, users, objects).with_activities(activities)


def chain_up(objects, oid: str) -> list[str]:
    """``oid`` followed by all of its ancestors, nearest first."""
    out = [oid]
    while objects[out[-1]].parent_id is not None:
        out.append(objects[out[-1]].parent_id)
    return out


def oracle_ancestor(objects, oid: str, level: int) -> str:
    for anc in chain_up(objects, oid):
        if objects[anc].level == level:
            return anc
    raise LookupError(oid)


def oracle_descendants(objects, oid: str, level: int) -> set[str]:
    return {o.id for o in objects.values() if o.level == level and oid in chain_up(objects, o.id)[1:]}


def path_closure(net: PreSocialNetwork, end: int) -> Counter:
    """Multiset of (user, end object, base role, path) the flattened network must hold."""
    labels = net.schema.levels
    out: Counter = Counter()
    for act in net.activities:
        level = net.objects[act.object_id].level
        if level > end:
            path = tuple(labels[i - 1] for i in range(level, end - 1, -1))
            out[act.user_id, oracle_ancestor(net.objects, act.object_id, end), act.role.base_role, path] += 1
        elif level < end:
            path = tuple(labels[i - 1] for i in range(level, end + 1))
            for d in oracle_descendants(net.objects, act.object_id, end):
                out[act.user_id, d, act.role.base_role, path] += 1
        else:
            out[act.user_id, act.object_id, act.role.base_role, (labels[level - 1],)] += 1
    return out


def predicted_count(net: PreSocialNetwork, end: int) -> int:
    total = 0
    for act in net.activities:
        level = net.objects[act.object_id].level
        total += len(oracle_descendants(net.objects, act.object_id, end)) if level < end else 1
    return total


def brute_force_edges(triples) -> dict[tuple[str, str, str, str], Fraction]:
    """Every positive strength by literal definition.

    ``triples`` are (user, role, object). Keys are (x, y, role_x, role_y).
    """
    triples = set(triples)
    users = sorted({u for u, _, _ in triples})
    roles = sorted({r for _, r, _ in triples})
    did = lambda u, r: {o for (uu, rr, o) in triples if uu == u and rr == r}  # noqa: E731
    out = {}
    for x, y in permutations(users, 2):
        for a in roles:
            for b in roles:
                mine, theirs = did(x, a), did(y, b)
                shared = len(mine & theirs)
                if not shared:
                    continue
                if a == b:
                    denom = len(mine)
                else:
                    denom = len({o for o in mine if any(z != x and (z, b, o) in triples for z in users)})
                out[x, y, a, b] = Fraction(shared, denom)
    return out
