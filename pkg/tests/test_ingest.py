import io
import random
from collections import Counter

import pytest

from mlsn import ingest
from mlsn.core_model import ViolationKind
from mlsn.ingest import (
    DatasetSchema,
    InferenceRule,
    LevelSchema,
    ParseError,
    build_hpsn,
    cleanse,
    infer_activities,
    load_dataset,
    parse_input,
)
from mlsn.synth import ActivitySpec, GenParams, LevelSpec, case_study_fixture, case_study_schema, generate, generate_files

FORUM_SCHEMA = DatasetSchema(
    LevelSchema(("forum", "topic", "post")),
    {"create": "forum", "topic addition": "topic", "subscribe": "topic", "author": "post"},
    (
        InferenceRule("first_child_creator", "topic", "topic addition"),
        InferenceRule("subscribe_on_child", "topic", "subscribe"),
    ),
)

USERS = "id,label\nA,a\nB,b\nD,d\n"


def _inputs(users=USERS, objects="", activities=""):
    return {
        "user": io.StringIO(users),
        "object": io.StringIO("id,level,parent_id,created_at,creator_id\n" + objects),
        "activity": io.StringIO("user_id,object_id,activity_type,timestamp\n" + activities if activities is not None
                                else ""),
    }


def _load(objects, activities="", schema=FORUM_SCHEMA, users=USERS):
    records, diags = parse_input(_inputs(users, objects, activities), schema)
    assert diags == []
    clean, report = cleanse(records, schema)
    return build_hpsn(clean, schema), report


def test_empty_activity_file_gives_nothing(tmp_path):
    records, diags = parse_input(
        {"user": io.StringIO(USERS), "object": io.StringIO(""), "activity": io.StringIO("")}, FORUM_SCHEMA)
    assert diags == []
    assert [r for r in records if r.kind == "activity"] == []


def test_case_study_files_parse(case_dir):
    schema = ingest.load_schema(case_dir / "schema.json")
    records, diags = parse_input(case_dir, schema)
    assert diags == []
    kinds = Counter(r.kind for r in records)
    assert kinds["user"] == 5
    assert kinds["object"] == 12
    levels = Counter(r.fields["level"] for r in records if r.kind == "object")
    assert levels == {"forum": 2, "topic": 4, "post": 6}


def test_short_row_becomes_line_diagnostic():
    objects = "1,forum,,5,A\n2,forum,,7\n"
    records, diags = parse_input(_inputs(objects=objects), FORUM_SCHEMA)
    assert [(d.line, d.code) for d in diags] == [(3, "MissingField")]
    assert [r.fields["id"] for r in records if r.kind == "object"] == ["1"]


def test_unknown_level_and_duplicates_are_reported():
    objects = "1,forum,,5,A\n1,forum,,5,A\nx,thread,1,5,A\n1.1,topic,1,6,A\n1.1,topic,2,6,A\n"
    _, diags = parse_input(_inputs(objects=objects), FORUM_SCHEMA)
    assert [d.code for d in diags] == ["DuplicateId", "UnknownLevel", "MultipleParents"]


def test_unknown_activity_type_is_reported():
    _, diags = parse_input(_inputs(objects="1,forum,,5,A\n", activities="A,1,dance,5\n"), FORUM_SCHEMA)
    assert [d.code for d in diags] == ["UnknownActivityType"]


def test_header_without_required_column_is_fatal():
    bad = {"user": io.StringIO("id\nA\n"), "object": io.StringIO(""), "activity": io.StringIO("")}
    with pytest.raises(ParseError):
        parse_input(bad, FORUM_SCHEMA)


def test_quoted_fields():
    records, diags = parse_input(_inputs(users='id,label\nA,"Smith, Jo"\n'), FORUM_SCHEMA)
    assert diags == []
    assert records[0].fields["label"] == "Smith, Jo"


def test_missing_creation_date_is_cleansed():
    records, _ = parse_input(_inputs(objects="1,forum,,,A\n2,forum,,3,A\n"), FORUM_SCHEMA)
    clean, report = cleanse(records, FORUM_SCHEMA)
    assert [r.rule for r in report.rejected] == ["MissingCreationDate"]
    assert report.rejected[0].subject == "1"
    assert report.accepted["object"] == 1


def test_valid_fixture_needs_no_cleansing(case_dir):
    schema = ingest.load_schema(case_dir / "schema.json")
    records, _ = parse_input(case_dir, schema)
    clean, report = cleanse(records, schema)
    assert report.rejected == []
    assert len(clean) == len(records)


def test_removed_topic_takes_posts_and_activities_along():
    objects = "1,forum,,1,A\n1.1,topic,1,2,\n1.1.1,post,1.1,3,B\n1.1.2,post,1.1,4,D\n1.2,topic,1,5,A\n"
    activities = "B,1.1.1,author,3\nD,1.1.2,author,4\nA,1.2,subscribe,6\n"
    records, _ = parse_input(_inputs(objects=objects, activities=activities), FORUM_SCHEMA)
    clean, report = cleanse(records, FORUM_SCHEMA)

    # cascade closure by walking the raw parent column
    parents = {r.fields["id"]: r.fields["parent_id"] for r in records if r.kind == "object"}
    subtree = {"1.1"}
    while True:
        more = {k for k, p in parents.items() if p in subtree} - subtree
        if not more:
            break
        subtree |= more
    gone = {r.subject for r in report.rejected if r.kind == "object"}
    assert gone == subtree == {"1.1", "1.1.1", "1.1.2"}
    assert report.counts_by_rule()["MissingCreator"] == 1
    assert report.cascaded == 4  # two posts, two activities
    assert [r.fields["object_id"] for r in clean if r.kind == "activity"] == ["1.2"]
    for kind in ("user", "object", "activity"):
        assert report.total(kind) == sum(1 for r in records if r.kind == kind)


def test_activity_reference_and_timestamp_rules():
    schema = DatasetSchema(FORUM_SCHEMA.levels, FORUM_SCHEMA.activities, (), (0, 100))
    objects = "1,forum,,1,A\n1.1,topic,1,2,Q\n"
    activities = "A,1,create,1\nZ,1,create,1\nA,1,create,soon\nA,1,create,500\nA,1,author,3\n"
    records, _ = parse_input(_inputs(objects=objects, activities=activities), schema)
    _, report = cleanse(records, schema)
    rules = [(r.kind, r.rule) for r in report.rejected]
    assert rules == [
        ("object", "UnknownReference"),  # creator Q unknown
        ("activity", "UnknownReference"),  # user Z
        ("activity", "BadTimestamp"),
        ("activity", "BadTimestamp"),  # outside observation range
        ("activity", "UnknownReference"),  # author does not apply to forums
    ]
    assert report.accepted["activity"] == 1


def test_cleansing_is_idempotent():
    rng = random.Random(7)
    base = ingest.write_dataset
    for seed in range(20):
        lines = ["1,forum,,1,A"]
        for i in range(1, 8):
            created = "" if rng.random() < 0.2 else str(i)
            creator = "" if rng.random() < 0.2 else rng.choice("ABD")
            lines.append(f"1.{i},topic,1,{created},{creator}")
            lines.append(f"1.{i}.1,post,1.{i},{i + 1},{rng.choice('ABDX')}")
        acts = "".join(f"{rng.choice('ABD')},1.{rng.randint(1, 7)}.1,author,{rng.randint(0, 9)}\n" for _ in range(10))
        records, _ = parse_input(_inputs(objects="\n".join(lines) + "\n", activities=acts), FORUM_SCHEMA)
        once, _ = cleanse(records, FORUM_SCHEMA)
        twice, report = cleanse(once, FORUM_SCHEMA)
        assert twice == once
        assert report.rejected == []
    assert base is ingest.write_dataset


def test_topic_creator_is_first_poster():
    objects = "1,forum,,0,A\n1.1,topic,1,0,A\n1.1.1,post,1.1,1,B\n1.1.2,post,1.1,2,D\n"
    net, _ = _load(objects)
    created = [a for a in net.activities if a.role.base_role == "topic addition"]
    # oracle: min over (created_at, id) of the topic's posts
    posts = [(1, "1.1.1", "B"), (2, "1.1.2", "D")]
    t, _, who = min(posts)
    assert [(a.user_id, a.object_id, a.timestamp, a.inferred) for a in created] == [(who, "1.1", t, True)]


def test_explicit_topic_creation_suppresses_inference():
    objects = "1,forum,,0,A\n1.1,topic,1,0,A\n1.1.1,post,1.1,1,B\n"
    net, _ = _load(objects, "D,1.1,topic addition,0\n")
    created = [a for a in net.activities if a.role.base_role == "topic addition"]
    assert [(a.user_id, a.inferred) for a in created] == [("D", False)]


def test_one_subscription_per_user_and_topic():
    objects = "1,forum,,0,A\n1.1,topic,1,0,A\n" + "".join(f"1.1.{i},post,1.1,{i + 3},B\n" for i in range(1, 4))
    objects += "1.1.9,post,1.1,1,D\n"
    net, _ = _load(objects)
    subs = sorted((a.user_id, a.timestamp) for a in net.activities if a.role.base_role == "subscribe")
    assert subs == [("B", 4), ("D", 1)]


def test_tie_on_first_post_breaks_by_id():
    objects = "1,forum,,0,A\n1.1,topic,1,0,A\n1.1.b,post,1.1,5,D\n1.1.a,post,1.1,5,B\n"
    net, _ = _load(objects)
    created = [a for a in net.activities if a.role.base_role == "topic addition"]
    assert [a.user_id for a in created] == ["B"]


def test_inference_adds_at_most_one_per_target():
    for seed in range(10):
        data = generate(GenParams(
            seed=seed,
            levels=(LevelSpec("forum", total=2), LevelSpec("topic", per_parent=(0, 5)),
                    LevelSpec("post", per_parent=(0, 6))),
            users=6,
            inference=FORUM_SCHEMA.inference,
        ))
        net = data.network
        added = infer_activities(net.with_activities(a for a in net.activities if not a.inferred), FORUM_SCHEMA.inference)
        per_topic = Counter(a.object_id for a in added if a.role.base_role == "topic addition")
        per_pair = Counter((a.user_id, a.object_id) for a in added if a.role.base_role == "subscribe")
        assert max(per_topic.values(), default=1) == 1
        assert max(per_pair.values(), default=1) == 1
        topics_with_posts = {o.id for o in net.objects_at(2) if net.children.get(o.id)}
        assert set(per_topic) == topics_with_posts


def test_build_case_study_from_files(case_dir):
    loaded = load_dataset(case_dir)
    assert loaded.network == case_study_fixture()
    roles = Counter(a.role.base_role for a in loaded.network.activities)
    assert roles == {"Is Author": 6, "Is Commentator": 4, "Is Moderator": 4, "Is Creator": 2}


def test_zero_users_builds_empty_network():
    net, _ = _load("", users="id,label\n")
    assert not net.users and not net.objects and not net.activities


def test_cycle_is_fatal_when_building():
    records, _ = parse_input(_inputs(objects="1,forum,,0,A\nt,topic,t,0,A\n"), FORUM_SCHEMA)
    clean, _ = cleanse(records, FORUM_SCHEMA)
    with pytest.raises(ingest.HierarchyError) as info:
        build_hpsn(clean, FORUM_SCHEMA)
    assert ViolationKind.CYCLE_DETECTED in {v.kind for v in info.value.violations}


def test_activities_are_kept_as_a_multiset():
    objects = "1,forum,,0,A\n"
    net, _ = _load(objects, "A,1,create,0\nA,1,create,0\n")
    assert len(net.activities) == 2


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_generated_dataset_round_trips(tmp_path, seed):
    params = GenParams(
        seed=seed,
        levels=(LevelSpec("forum", total=2), LevelSpec("topic", per_parent=(0, 4)),
                LevelSpec("post", per_parent=(0, 5))),
        users=7,
        activities=(ActivitySpec("create", "forum", actor="creator"), ActivitySpec("author", "post", actor="creator"),
                    ActivitySpec("like", "post", rate=0.5, repeat=3)),
        inference=FORUM_SCHEMA.inference,
        time_range=(100, 5000),
    )
    original = generate(params)
    generate_files(params, tmp_path)
    loaded = load_dataset(tmp_path)
    assert loaded.cleansing.rejected == []
    assert loaded.network == original.network
    assert loaded.schema == original.schema


def test_schema_round_trip(tmp_path):
    schema = case_study_schema()
    assert DatasetSchema.from_dict(schema.to_dict()) == schema
    with pytest.raises(ValueError):
        DatasetSchema(schema.levels, {"x": "nowhere"})
