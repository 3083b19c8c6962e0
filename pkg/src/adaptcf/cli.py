"""Command-line interface.

Every command takes ``--out DIR`` (default from ``ADAPTCF_OUT``) and an
optional ``--config FILE``. The config file is a JSON object of settings, or
a ``manifest.json`` written by an earlier run. Flags given on the command
line win over the file. Each run writes ``manifest.json`` with the resolved
settings so it can be repeated exactly.

Exit codes: 0 success, 1 usage or I/O error, 2 when nothing could be
compared.
"""

import json
import os
import sys
from pathlib import Path

import click
import numpy as np
from click.core import ParameterSource

from . import __version__
from .counterfactuals import CfSolverConfig, Interval, counterfactual, default_target, pertinent_positive
from .data import BlobSpec, CreditSpec, Task, generate_credit_like, generate_gaussian_blobs, load_csv, write_csv
from .diff import comparable_indices, explain_model_differences
from .interest import InterestConfig, Method, rank_samples, ranking_to_csv, ranking_to_json
from .models import AdaptationConfig, Family, adapt, fit, load_model, save_model
from .persistence import (ConstrainedAdaptConfig, adapt_with_constraints,
                          build_persistent_cf_constraint, build_robustness_constraints,
                          load_constraints, save_constraints)
from .theory import verify_theorems

OUT_ENV = "ADAPTCF_OUT"
EMPTY_RESULT = 2


def _atomic_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=False) + "\n"


def _jsonable(v):
    if isinstance(v, tuple):
        return [_jsonable(u) for u in v]
    if isinstance(v, dict):
        return {k: _jsonable(u) for k, u in v.items()}
    if isinstance(v, np.generic):
        return v.item()
    return v


def _settings(ctx, config_path, skip=("out", "config")):
    """Merge defaults, the config file and explicit flags, in that order."""
    names = sorted(k for k in ctx.params if k not in skip)
    merged = {k: ctx.params[k] for k in names}
    if config_path:
        try:
            doc = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise click.UsageError(f"cannot read config {config_path}: {exc}")
        if isinstance(doc, dict) and "command" in doc and "config" in doc:
            if doc["command"] != ctx.info_name:
                raise click.UsageError(
                    f"manifest is for '{doc['command']}', not '{ctx.info_name}'")
            doc = doc["config"]
        if not isinstance(doc, dict):
            raise click.UsageError("config file must hold a JSON object")
        unknown = sorted(set(doc) - set(names))
        if unknown:
            raise click.UsageError(f"unknown config keys: {', '.join(unknown)}")
        for k, v in doc.items():
            if ctx.get_parameter_source(k) in (ParameterSource.DEFAULT, None):
                merged[k] = v
    # sorted so the manifest does not depend on flag order
    return {k: _jsonable(merged[k]) for k in sorted(merged)}


def _outdir(out) -> Path:
    if not out:
        raise click.UsageError(f"Missing option '--out' (or set {OUT_ENV}).")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _manifest(out: Path, command: str, settings: dict, outputs) -> None:
    doc = {"tool": "adaptcf", "version": __version__, "command": command,
           "config": settings, "outputs": sorted(outputs)}
    _atomic_text(out / "manifest.json", _dump(doc))


def _floats(text, what):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise click.UsageError(f"{what} must be comma-separated numbers, got {text!r}")


def _stage(msg):
    click.echo(msg, err=True)


common = [
    click.option("--out", envvar=OUT_ENV, type=click.Path(file_okay=False),
                 help=f"Output directory (default: ${OUT_ENV})."),
    click.option("--config", "config", type=click.Path(dir_okay=False),
                 help="JSON settings file or a previous manifest.json."),
]


def with_common(f):
    for opt in reversed(common):
        f = opt(f)
    return click.pass_context(f)


def data_options(f):
    f = click.option("--task", type=click.Choice([t.value for t in Task]),
                     default=Task.CLASSIFICATION.value, show_default=True)(f)
    f = click.option("--label-column", default="y", show_default=True)(f)
    return click.option("--data", "data", help="CSV file with features and labels.")(f)


def _load_data(s):
    if not s.get("data"):
        raise click.UsageError("Missing option '--data'.")
    return load_csv(s["data"], s["label_column"], Task(s["task"]))


def _need(s, key, flag):
    if s.get(key) in (None, ""):
        raise click.UsageError(f"Missing option '{flag}'.")
    return s[key]


@click.group()
@click.version_option(__version__)
def cli():
    """Explain model adaptations with contrastive explanations."""


@cli.command("gen-data")
@with_common
@click.option("--dataset", type=click.Choice(["blobs", "credit"]), default="blobs", show_default=True)
@click.option("--seed", type=int, default=None, help="Override the generator seed.")
@click.option("--spec", "spec", default=None, hidden=True)
@click.option("--dump-spec", is_flag=True, help="Print the resolved generator spec and exit.")
def gen_data(ctx, out, config, dataset, seed, spec, dump_spec):
    """Generate the synthetic batches and evaluation set."""
    s = _settings(ctx, config, skip=("out", "config", "dump_spec"))
    fields = dict(s["spec"] or {})
    if s["seed"] is not None:
        fields["seed"] = s["seed"]
    if s["dataset"] == "blobs":
        spec_obj = BlobSpec.from_dict(fields)
    else:
        spec_obj = CreditSpec(**fields)
    if dump_spec:
        click.echo(_dump({"dataset": s["dataset"], "spec": spec_obj.to_dict()}), nl=False)
        return 0
    outdir = _outdir(out)
    sets = generate_gaussian_blobs(spec_obj) if s["dataset"] == "blobs" else generate_credit_like(spec_obj)
    names = ["batch1.csv", "batch2.csv", "eval.csv"]
    for name, d in zip(names, sets):
        write_csv(d, outdir / name)
    s["spec"] = spec_obj.to_dict()
    _manifest(outdir, "gen-data", s, names)
    _stage(f"wrote {', '.join(names)} to {outdir}")
    return 0


@cli.command()
@with_common
@data_options
@click.option("--family", type=click.Choice([f.value for f in Family]), default=None)
@click.option("--max-depth", type=int, default=6, show_default=True)
@click.option("--min-samples-leaf", type=int, default=1, show_default=True)
def train(ctx, out, config, **_):
    """Fit a model on a CSV dataset."""
    s = _settings(ctx, config)
    family = _need(s, "family", "--family")
    data = _load_data(s)
    outdir = _outdir(out)
    model = fit(family, data, max_depth=s["max_depth"], min_samples_leaf=s["min_samples_leaf"])
    save_model(model, outdir / "model.json")
    _manifest(outdir, "train", s, ["model.json"])
    _stage(f"trained {family} on {len(data)} samples")
    return 0


def adapt_options(f):
    f = click.option("--tolerance", type=float, default=1e-8, show_default=True)(f)
    f = click.option("--step-size", type=float, default=1.0, show_default=True)(f)
    f = click.option("--max-iters", type=int, default=5000, show_default=True)(f)
    f = click.option("--proximity-weight", type=float, default=0.1, show_default=True)(f)
    return click.option("--C", "C", type=float, default=1.0, show_default=True)(f)


def _adapt_config(s):
    return AdaptationConfig(C=s["C"], proximity_weight=s["proximity_weight"],
                            max_iters=s["max_iters"], step_size=s["step_size"],
                            tolerance=s["tolerance"])


def _info(model):
    keep = ("objective", "initial_objective", "iterations", "converged")
    return {k: _jsonable(model.info[k]) for k in keep if k in model.info}


@cli.command("adapt")
@with_common
@click.option("--model", "model", help="Model JSON to adapt.")
@data_options
@adapt_options
def adapt_cmd(ctx, out, config, **_):
    """Adapt a trained model to new data."""
    s = _settings(ctx, config)
    model = load_model(_need(s, "model", "--model"))
    data = _load_data(s)
    outdir = _outdir(out)
    new = adapt(model, data, _adapt_config(s))
    save_model(new, outdir / "model.json")
    _atomic_text(outdir / "adapt_info.json", _dump(_info(new)))
    _manifest(outdir, "adapt", s, ["model.json", "adapt_info.json"])
    _stage(f"adapted {model.family.value} to {len(data)} samples")
    return 0


def interest_options(f):
    f = click.option("--eta", type=float, default=1.0, show_default=True)(f)
    return click.option("--epsilon", type=float, default=1e-8, show_default=True)(f)


def _target(s, task):
    if task is Task.REGRESSION:
        if s.get("target_center") is None:
            raise click.UsageError("regression data needs --target-center")
        return Interval(s["target_center"], s["target_deviation"])
    return None


@cli.command("explain-diff")
@with_common
@click.option("--old", "old", help="Model JSON before adaptation.")
@click.option("--new", "new", help="Model JSON after adaptation.")
@data_options
@click.option("--top-k", type=int, default=None, help="Restrict the report to the k most interesting samples.")
@click.option("--interest", type=click.Choice([m.value for m in Method]),
              default=Method.GRADIENT_COSINE.value, show_default=True)
@interest_options
@click.option("--target-center", type=float, default=None, help="Regression target value.")
@click.option("--target-deviation", type=float, default=0.0, show_default=True)
def explain_diff(ctx, out, config, **_):
    """Compare counterfactual explanations of two models on a dataset."""
    s = _settings(ctx, config)
    h = load_model(_need(s, "old", "--old"))
    h_new = load_model(_need(s, "new", "--new"))
    data = _load_data(s)
    outdir = _outdir(out)
    target = _target(s, data.task)
    outputs = ["diff_report.json", "diff_plotdata.csv"]
    indices = None
    if s["top_k"] is not None:
        pool = comparable_indices(h, h_new, data)
        if not pool:
            indices = []
        else:
            k = min(s["top_k"], len(pool))
            cfg = InterestConfig(s["interest"], s["epsilon"], s["eta"])
            ranking = [(pool[i], v) for i, v in rank_samples(data.subset(pool), h, h_new, k, cfg)]
            indices = [i for i, _ in ranking]
            _atomic_text(outdir / "ranking.json", ranking_to_json(ranking))
            _atomic_text(outdir / "ranking.csv", ranking_to_csv(ranking))
            outputs += ["ranking.json", "ranking.csv"]
    report = explain_model_differences(h, h_new, data, target, indices=indices)
    report.write_json(outdir / "diff_report.json")
    report.write_plot_data(outdir / "diff_plotdata.csv")
    _manifest(outdir, "explain-diff", s, outputs)
    _stage(f"compared {len(report.per_sample)} samples, skipped {len(report.skipped)}")
    return 0 if report.per_sample else EMPTY_RESULT


@cli.command("rank-interest")
@with_common
@click.option("--old", "old", help="Model JSON before adaptation.")
@click.option("--new", "new", help="Model JSON after adaptation.")
@data_options
@click.option("--k", "k", type=int, default=10, show_default=True)
@click.option("--method", type=click.Choice([m.value for m in Method]),
              default=Method.GRADIENT_COSINE.value, show_default=True)
@interest_options
def rank_interest(ctx, out, config, **_):
    """Rank dataset rows by how much the adaptation changed their explanation."""
    s = _settings(ctx, config)
    h = load_model(_need(s, "old", "--old"))
    h_new = load_model(_need(s, "new", "--new"))
    data = _load_data(s)
    outdir = _outdir(out)
    ranking = rank_samples(data, h, h_new, s["k"], InterestConfig(s["method"], s["epsilon"], s["eta"]))
    _atomic_text(outdir / "ranking.json", ranking_to_json(ranking))
    _atomic_text(outdir / "ranking.csv", ranking_to_csv(ranking))
    _manifest(outdir, "rank-interest", s, ["ranking.json", "ranking.csv"])
    return 0


@cli.command("adapt-persistent")
@with_common
@click.option("--model", "model", help="Model JSON to adapt.")
@data_options
@adapt_options
@click.option("--c-prime", type=float, default=10.0, show_default=True, help="Constraint weight.")
@click.option("--constraints", "constraints", default=None, help="Constraints JSON file.")
@click.option("--robust-feature", default=None,
              help="Build shift constraints along this feature for rows the model predicts as --robust-label.")
@click.option("--robust-steps", default="1,2,3", show_default=True)
@click.option("--robust-label", type=int, default=0, show_default=True)
@click.option("--persistent-cf", is_flag=True, help="Keep every row's counterfactual valid.")
def adapt_persistent(ctx, out, config, **_):
    """Adapt a model while enforcing persistence constraints."""
    s = _settings(ctx, config)
    h = load_model(_need(s, "model", "--model"))
    data = _load_data(s)
    outdir = _outdir(out)
    cons = load_constraints(s["constraints"]) if s["constraints"] else []
    if s["robust_feature"]:
        j = data.feature_index(s["robust_feature"])
        shifts = [step * np.eye(data.n_features)[j] for step in _floats(s["robust_steps"], "--robust-steps")]
        for i, x in enumerate(data.features):
            if h.predict(x) == s["robust_label"]:
                cons += build_robustness_constraints(x, s["robust_label"], shifts, origin=i)
    if s["persistent_cf"]:
        cons += [build_persistent_cf_constraint(x, h, origin=i) for i, x in enumerate(data.features)]
    cfg = ConstrainedAdaptConfig(C_prime=s["c_prime"], base=_adapt_config(s))
    res = adapt_with_constraints(h, data, cons, cfg)
    save_model(res.model, outdir / "model.json")
    save_constraints(cons, outdir / "constraints.json")
    doc = res.report.to_dict()
    doc["adaptation"] = _info(res.model)
    _atomic_text(outdir / "satisfaction.json", _dump(_jsonable(doc)))
    _manifest(outdir, "adapt-persistent", s, ["model.json", "constraints.json", "satisfaction.json"])
    for w in res.report.warnings:
        _stage(f"warning: {w}")
    _stage(f"{res.report.n_satisfied}/{len(cons)} constraints satisfied")
    return 0


@cli.command("verify-theory")
@with_common
@click.option("--trials", type=int, default=1000, show_default=True)
@click.option("--dims", type=int, multiple=True, default=(2, 5, 20), show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def verify_theory(ctx, out, config, **_):
    """Check the linear-model cosine identity and counterfactual-change bound."""
    s = _settings(ctx, config)
    outdir = _outdir(out)
    reports = [verify_theorems(s["trials"], d, s["seed"]).to_dict() for d in s["dims"]]
    text = _dump(reports)
    _atomic_text(outdir / "theory_report.json", text)
    _manifest(outdir, "verify-theory", s, ["theory_report.json"])
    click.echo(text, nl=False)
    return 0


@cli.command("cf")
@with_common
@click.option("--model", "model", help="Model JSON.")
@click.option("--x", "x", help="Comma-separated input point.")
@click.option("--target", type=float, default=None,
              help="Requested class (default: the other class) or regression value.")
@click.option("--deviation", type=float, default=0.0, show_default=True)
@click.option("--pp", is_flag=True, help="Compute a pertinent positive instead.")
@click.option("--defaults", default=None, help="Comma-separated default values for --pp (default: zeros).")
@click.option("--epsilon", type=float, default=1e-9, show_default=True)
def cf(ctx, out, config, **_):
    """Explain a single prediction and print the result as JSON."""
    s = _settings(ctx, config)
    model = load_model(_need(s, "model", "--model"))
    x = np.array(_floats(_need(s, "x", "--x"), "--x"))
    if s["pp"]:
        defaults = np.zeros(model.n_features) if s["defaults"] is None else _floats(s["defaults"], "--defaults")
        record = pertinent_positive(model, x, defaults, s["epsilon"]).to_dict()
    else:
        if not model.is_classifier:
            target = Interval(_need(s, "target", "--target"), s["deviation"])
        elif s["target"] is None:
            target = default_target(model, x)
        else:
            target = int(s["target"])
        record = counterfactual(model, x, target, CfSolverConfig()).to_dict()
    text = _dump(_jsonable(record))
    if out:
        outdir = _outdir(out)
        _atomic_text(outdir / "cf.json", text)
        _manifest(outdir, "cf", s, ["cf.json"])
    click.echo(text, nl=False)
    return 0


def main(argv=None) -> int:
    """Run the CLI and return its exit code instead of exiting."""
    try:
        rv = cli.main(args=argv, prog_name="adaptcf", standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except (ValueError, OSError, KeyError, TypeError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    return rv if isinstance(rv, int) else 0


def run():
    sys.exit(main())
