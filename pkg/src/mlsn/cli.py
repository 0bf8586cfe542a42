"""Command-line front end.

Exit codes: 0 success, 2 usage, 3 unreadable/malformed input, 4 records
rejected by cleansing (validate only), 5 hierarchy violations, 6 bad
configuration, 7 failure while flattening or extracting.
"""

from __future__ import annotations

import json
import logging
import os
import sys
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import click

from . import ingest
from .core_model import ObjectNode, validate_objects
from .flatten import AmbiguousInitials, FlattenError, RoleNaming, flatten
from .layers import LayerKey, Model, TimeWindowSpec, UncoverableRange, UnknownLayer, build_sn
from .report import (
    activity_inventory,
    baseline_network,
    emit_plot_data,
    flattening_stats,
    fpsn_summary,
    layer_stats,
)
from .synth import GenParams, generate_files, write_case_study

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_PARSE = 3
EXIT_CLEANSE = 4
EXIT_HIERARCHY = 5
EXIT_CONFIG = 6
EXIT_PHASE = 7

OUTPUT_ENV = "MLSN_OUTPUT_DIR"


class PipelineFailure(Exception):
    def __init__(self, phase: str, code: int, message: str):
        super().__init__(f"[{phase}] {message}")
        self.phase = phase
        self.code = code


@dataclass
class PipelineConfig:
    input: Path
    output: Path
    end_levels: list[str] = field(default_factory=list)
    schema: Path | None = None
    layers: str | list[str] = "all"
    model: str = "ngraph"
    window: dict | None = None
    naming: str = "initials"
    separator: str = "-"
    total_users: int | None = None

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> dict:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise PipelineFailure("config", EXIT_CONFIG, f"cannot read config {path}: {exc}") from exc
        unknown = set(data) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise PipelineFailure("config", EXIT_CONFIG, f"unknown config key(s): {', '.join(sorted(unknown))}")
        return data

    def window_spec(self) -> TimeWindowSpec | None:
        if not self.window:
            return None
        w = dict(self.window)
        weights = [Fraction(str(x)) for x in w["weights"]] if w.get("weights") else None
        if w.get("mode") == "sliding":
            return TimeWindowSpec.sliding(Fraction(str(w["length"])), Fraction(str(w["step"])), weights)
        if w.get("mode") == "equal":
            return TimeWindowSpec.equal_periods(int(w["k"]), weights)
        raise ValueError(f"unknown window mode {w.get('mode')!r}")

    def role_naming(self) -> RoleNaming:
        return RoleNaming(self.naming, self.separator)


def parse_window(text: str) -> dict:
    """``sliding:LENGTH:STEP`` or ``equal:K``."""
    parts = text.split(":")
    if parts[0] == "sliding" and len(parts) == 3:
        return {"mode": "sliding", "length": parts[1], "step": parts[2]}
    if parts[0] == "equal" and len(parts) == 2:
        return {"mode": "equal", "k": int(parts[1])}
    raise ValueError(f"window must be 'sliding:LENGTH:STEP' or 'equal:K', got {text!r}")


def _write_json(path: Path, data) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def validate_dataset(input_dir: Path, schema_path: Path | None = None) -> tuple[int, dict]:
    """Parse, cleanse and check the hierarchy; return (exit code, report)."""
    report: dict = {"diagnostics": [], "cleansing": None, "violations": []}
    try:
        schema = ingest.load_schema(schema_path or input_dir / ingest.SCHEMA_FILE)
        records, diags = ingest.parse_input(input_dir, schema)
    except ingest.ParseError as exc:
        report["error"] = str(exc)
        return EXIT_PARSE, report
    report["diagnostics"] = [d.to_dict() for d in diags]

    structure = validate_objects(
        (ObjectNode(r.fields["id"], schema.levels.index(r.fields["level"]), r.fields["parent_id"] or None, 0, "")
         for r in records if r.kind == "object"),
        schema.levels,
    )
    clean, cleansing = ingest.cleanse(records, schema)
    report["cleansing"] = cleansing.to_dict()
    violations = list(structure)
    if not structure:
        try:
            ingest.build_hpsn(clean, schema)
        except ingest.HierarchyError as exc:
            violations = exc.violations
    report["violations"] = [{"kind": v.kind.value, "id": v.subject, "detail": v.detail} for v in violations]

    if diags:
        return EXIT_PARSE, report
    if cleansing.rejected:
        return EXIT_CLEANSE, report
    if violations:
        return EXIT_HIERARCHY, report
    return EXIT_OK, report


def run_pipeline(config: PipelineConfig) -> list[Path]:
    """Load, flatten once per end level, extract layers and write every report."""
    try:
        naming = config.role_naming()
        window = config.window_spec()
        model = Model(config.model)
        layers = config.layers if config.layers in ("all", None) else [LayerKey.parse(x) for x in config.layers]
    except (ValueError, KeyError) as exc:
        raise PipelineFailure("config", EXIT_CONFIG, str(exc)) from exc

    try:
        loaded = ingest.load_dataset(config.input, ingest.load_schema(config.schema) if config.schema else None)
    except ingest.ParseError as exc:
        raise PipelineFailure("parse", EXIT_PARSE, str(exc)) from exc
    except ingest.HierarchyError as exc:
        raise PipelineFailure("hierarchy", EXIT_HIERARCHY, str(exc)) from exc
    hpsn = loaded.network

    levels: list[int] = []
    try:
        for level in config.end_levels or [hpsn.schema.levels[0]]:
            levels.append(hpsn.schema.resolve(level))
    except (KeyError, IndexError) as exc:
        raise PipelineFailure("config", EXIT_CONFIG, f"bad end level: {exc}") from exc
    levels = sorted(set(levels))

    out = Path(config.output)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    _write_json(out / "cleansing_report.json", loaded.cleansing.to_dict())
    _write_json(out / "diagnostics.json", [d.to_dict() for d in loaded.diagnostics])
    written += [out / "cleansing_report.json", out / "diagnostics.json"]
    written += activity_inventory(hpsn, config.total_users).write(out, "hpsn_inventory")

    flattened, baselines, labels = {}, {}, {}
    for level in levels:
        label = hpsn.schema.label(level)
        labels[level] = label
        level_dir = out / label
        try:
            fpsn = flatten(hpsn, level)
            base_net = baseline_network(hpsn, level)
        except (FlattenError, LookupError) as exc:
            raise PipelineFailure("flatten", EXIT_PHASE, f"{label}: {exc}") from exc
        try:
            sn = build_sn(fpsn, layers, model, naming, window, loaded.schema.observation_range)
            base = build_sn(base_net, "all", model, naming)
        except (UnknownLayer, AmbiguousInitials, UncoverableRange) as exc:
            raise PipelineFailure("extract", EXIT_CONFIG, f"{label}: {exc}") from exc
        except ValueError as exc:
            raise PipelineFailure("extract", EXIT_PHASE, f"{label}: {exc}") from exc
        flattened[level], baselines[level] = sn, base

        level_dir.mkdir(parents=True, exist_ok=True)
        (level_dir / "fpsn_summary.txt").write_text(fpsn_summary(fpsn, naming), encoding="utf-8")
        written.append(level_dir / "fpsn_summary.txt")
        written += sn.write(level_dir / "layers")
        written += flattening_stats(hpsn, fpsn).write(level_dir, "flattening_stats")
        written += activity_inventory(fpsn, config.total_users, rendered=True, naming=naming).write(
            level_dir, "activity_inventory")
        per_level = layer_stats({level: sn}, {level: base}, {level: label})
        written += per_level.write(level_dir, "layer_stats")
        emit_plot_data(per_level, level_dir / "plot_data.csv")
        written.append(level_dir / "plot_data.csv")

    stats = layer_stats(flattened, baselines, labels)
    written += stats.write(out, "layer_stats")
    emit_plot_data(stats, out / "plot_data.csv")
    written.append(out / "plot_data.csv")
    return written


@click.group(help=__doc__)
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def cli(verbose: bool) -> None:
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(message)s")


FORMATS_HELP = """
Input directory layout: schema.json (levels, activity type -> level map,
inference rules), users.csv (id,label), objects.csv
(id,level,parent_id,created_at,creator_id), activities.csv
(user_id,object_id,activity_type,timestamp). Timestamps are integer epoch
seconds.
"""


@cli.command(help="Parse, cleanse and check a dataset directory.\n" + FORMATS_HELP)
@click.argument("input_dir", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--schema", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Schema file (default INPUT_DIR/schema.json).")
@click.option("--report", type=click.Path(dir_okay=False, path_type=Path),
              help="Where to write the JSON report (default $MLSN_OUTPUT_DIR/validation_report.json).")
def validate(input_dir: Path, schema: Path | None, report: Path | None) -> None:
    code, data = validate_dataset(input_dir, schema)
    if report is None:
        report = Path(os.environ.get(OUTPUT_ENV, "mlsn-out")) / "validation_report.json"
    _write_json(report, data)

    if "error" in data:
        click.echo(f"error: {data['error']}")
    for d in data["diagnostics"]:
        click.echo(f"{d['code']}: {d['source']}:{d['line']}: {d['message']}")
    if data["cleansing"]:
        for r in data["cleansing"]["rejected"]:
            click.echo(f"{r['rule']}: {r['kind']} {r['id']} (line {r['line']}) {r['detail']}")
    for v in data["violations"]:
        click.echo(f"{v['kind']}: {v['id']} {v['detail']}")
    click.echo("valid" if code == EXIT_OK else f"invalid (exit {code}); report in {report}")
    sys.exit(code)


@cli.command(help="Write a synthetic dataset described by a JSON parameter file.")
@click.argument("params_file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("-o", "--out", "out_dir", type=click.Path(file_okay=False, path_type=Path),
              envvar=OUTPUT_ENV, default="mlsn-out", show_default=True)
@click.option("--seed", type=int, help="Override the seed in the parameter file.")
def generate(params_file: Path, out_dir: Path, seed: int | None) -> None:
    try:
        params = GenParams.from_dict(json.loads(params_file.read_text(encoding="utf-8")))
        if seed is not None:
            params = replace(params, seed=seed)
    except (ValueError, KeyError, TypeError) as exc:
        click.echo(f"[config] bad parameters: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    for path in generate_files(params, out_dir):
        click.echo(str(path))


@cli.command(help="Write the five-user forum example as a dataset directory.")
@click.argument("out_dir", type=click.Path(file_okay=False, path_type=Path))
def fixture(out_dir: Path) -> None:
    for path in write_case_study(out_dir):
        click.echo(str(path))


@cli.command(help="Build the multi-layered network for one or more end levels.\n" + FORMATS_HELP)
@click.argument("input_dir", required=False, type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="JSON file with any of the options below; flags override it.")
@click.option("--schema", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("-e", "--end-level", "end_levels", multiple=True,
              help="Level label or 1-based index; repeat for several.")
@click.option("--layer", "layers", multiple=True,
              help="Layer as 'ROLE | ROLE' (rendered names); default all.")
@click.option("--model", type=click.Choice(["ngraph", "multigraph"]))
@click.option("--window", help="'sliding:LENGTH:STEP' or 'equal:K'.")
@click.option("--weights", help="Comma-separated window weights summing to 1 (default linear).")
@click.option("--naming", type=click.Choice(["initials", "full"]))
@click.option("--separator", help="Label separator for --naming full.")
@click.option("--total-users", type=int, help="Registered user count for activity shares.")
@click.option("-o", "--out", "out_dir", type=click.Path(file_okay=False, path_type=Path), envvar=OUTPUT_ENV)
def pipeline(input_dir, config_file, schema, end_levels, layers, model, window, weights, naming, separator,
             total_users, out_dir) -> None:
    try:
        data = PipelineConfig.from_file(config_file) if config_file else {}
        flags = {
            "input": input_dir, "schema": schema, "model": model, "naming": naming,
            "separator": separator, "total_users": total_users, "output": out_dir,
            "end_levels": list(end_levels) or None, "layers": list(layers) or None,
        }
        data.update({k: v for k, v in flags.items() if v is not None})
        if window:
            data["window"] = parse_window(window)
        if weights:
            if not data.get("window"):
                raise ValueError("--weights needs a window")
            data["window"] = {**data["window"], "weights": weights.split(",")}
        if "input" not in data:
            raise ValueError("no input directory given")
        data.setdefault("output", "mlsn-out")
        data["input"], data["output"] = Path(data["input"]), Path(data["output"])
        if data.get("schema"):
            data["schema"] = Path(data["schema"])
        config = PipelineConfig(**data)
    except PipelineFailure as exc:
        click.echo(str(exc), err=True)
        sys.exit(exc.code)
    except (ValueError, TypeError) as exc:
        click.echo(f"[config] {exc}", err=True)
        sys.exit(EXIT_CONFIG)

    try:
        written = run_pipeline(config)
    except PipelineFailure as exc:
        click.echo(str(exc), err=True)
        sys.exit(exc.code)
    click.echo(f"wrote {len(written)} files to {config.output}")


def main(argv: Sequence[str] | None = None) -> None:
    cli.main(args=argv, prog_name="mlsn")


if __name__ == "__main__":
    main()
