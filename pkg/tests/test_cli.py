import hashlib
import json

import pytest
from click.testing import CliRunner

from mlsn.cli import EXIT_CLEANSE, EXIT_CONFIG, EXIT_HIERARCHY, cli
from mlsn.synth import large_forum_params


def _run(*args, env=None):
    return CliRunner().invoke(cli, [str(a) for a in args], env=env)


def _digests(root):
    return {str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}


def test_valid_fixture_validates(case_dir, tmp_path):
    result = _run("validate", case_dir, "--report", tmp_path / "r.json")
    assert result.exit_code == 0, result.output
    assert json.loads((tmp_path / "r.json").read_text())["violations"] == []


def test_missing_creator_fails_validation(case_dir, tmp_path):
    objects = case_dir / "objects.csv"
    lines = objects.read_text().splitlines()
    lines[3] = ",".join(lines[3].split(",")[:-1] + [""])
    objects.write_text("\n".join(lines) + "\n")
    result = _run("validate", case_dir, "--report", tmp_path / "r.json")
    assert result.exit_code == EXIT_CLEANSE
    assert "MissingCreator" in result.output


def test_cycle_fails_validation(case_dir, tmp_path):
    objects = case_dir / "objects.csv"
    text = objects.read_text().replace("1.1,topic,1,", "1.1,topic,1.1,")
    objects.write_text(text)
    result = _run("validate", case_dir, "--report", tmp_path / "r.json")
    assert result.exit_code == EXIT_HIERARCHY
    assert "CycleDetected" in result.output


def test_pipeline_over_three_levels(case_dir, tmp_path):
    out = tmp_path / "out"
    result = _run("pipeline", case_dir, "-e", "forum", "-e", "topic", "-e", "post", "-o", out)
    assert result.exit_code == 0, result.output
    assert {p.name for p in out.iterdir() if p.is_dir()} == {"forum", "topic", "post"}
    rows = []
    for path in (out / "forum" / "layers").glob("*.tsv"):
        rows += [line.split("\t") for line in path.read_text().splitlines()[1:]]
    assert ["A", "D", "1", "1", "TF Is Moderator | PTF Is Commentator"] in rows
    assert (out / "plot_data.csv").exists()


def test_pipeline_reruns_are_identical(case_dir, tmp_path):
    for name in ("a", "b"):
        assert _run("pipeline", case_dir, "-e", "forum", "-e", "post", "-o", tmp_path / name).exit_code == 0
    assert _digests(tmp_path / "a") == _digests(tmp_path / "b")


def test_pipeline_leaves_inputs_alone(case_dir, tmp_path):
    before = _digests(case_dir)
    _run("pipeline", case_dir, "-e", "topic", "-o", tmp_path / "out")
    assert _digests(case_dir) == before


def test_config_file_and_flags(case_dir, tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"input": str(case_dir), "end_levels": ["forum"], "model": "multigraph",
                                  "output": str(tmp_path / "from-config")}))
    result = _run("pipeline", "--config", config, "-o", tmp_path / "from-flag")
    assert result.exit_code == 0, result.output
    assert (tmp_path / "from-flag" / "forum" / "layers" / "edges.tsv").exists()
    assert not (tmp_path / "from-config").exists()


def test_output_directory_from_environment(case_dir, tmp_path):
    result = _run("pipeline", case_dir, "-e", "forum", env={"MLSN_OUTPUT_DIR": str(tmp_path / "env")})
    assert result.exit_code == 0, result.output
    assert (tmp_path / "env" / "forum").is_dir()


@pytest.mark.parametrize("args", [
    ("-e", "thread"),
    ("-e", "forum", "--window", "sliding:10"),
    ("-e", "forum", "--layer", "nonsense"),
])
def test_bad_pipeline_config(case_dir, tmp_path, args):
    result = _run("pipeline", case_dir, "-o", tmp_path / "out", *args)
    assert result.exit_code == EXIT_CONFIG, result.output


def test_windowed_pipeline(case_dir, tmp_path):
    result = _run("pipeline", case_dir, "-e", "forum", "--window", "equal:2", "-o", tmp_path / "out")
    assert result.exit_code == 0, result.output


def test_generate_needs_a_params_file(tmp_path):
    result = _run("generate", tmp_path / "missing.json")
    assert result.exit_code == 2


def test_generate_with_seed_override(tmp_path):
    params = large_forum_params(seed=1).to_dict()
    params["levels"] = [{"label": "forum", "total": 2}, {"label": "group", "total": 9},
                        {"label": "topic", "total": 20}, {"label": "post", "total": 40},
                        {"label": "comment", "total": 3}]
    params["users"] = 15
    path = tmp_path / "params.json"
    path.write_text(json.dumps(params))
    for name in ("a", "b"):
        assert _run("generate", path, "--seed", 7, "-o", tmp_path / name).exit_code == 0
    assert _digests(tmp_path / "a") == _digests(tmp_path / "b")
    objects = (tmp_path / "a" / "objects.csv").read_text().splitlines()[1:]
    assert len(objects) == 2 + 9 + 20 + 40 + 3
    assert _run("validate", tmp_path / "a", "--report", tmp_path / "r.json").exit_code == 0


def test_fixture_command(tmp_path):
    result = _run("fixture", tmp_path / "fx")
    assert result.exit_code == 0
    assert (tmp_path / "fx" / "objects.csv").exists()
