"""Command-line interface: one `aerolens` binary with pipeline subcommands.

Configuration comes from an optional JSON file (--config); individual
flags override the file.  Exit codes: 0 success, 1 pipeline failure,
2 configuration or usage error.
"""

from __future__ import annotations

import json
import sys

import click

from .errors import AerolensError
from .pipeline import (
    ConfigError,
    PipelineConfig,
    PipelineError,
    run_exposure,
    run_fit,
    run_learning_curve,
    run_report,
    run_segment,
    run_synth,
)

def _load_config(path: str | None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config file must hold a JSON object")
    return PipelineConfig.from_dict(doc)


def _common_options(fn):
    options = [
        click.option("--config", "config_path", metavar="PATH", default=None,
                     help="JSON configuration file."),
        click.option("--seed", type=int, default=None, help="Master random seed."),
        click.option("--k", type=int, default=None, help="Number of clusters."),
        click.option("--out", "out_dir", metavar="DIR", default=None,
                     help="Output directory for artifacts."),
        click.option("--classifier", "classifier_variant",
                     type=click.Choice(["dt", "rf", "nb", "svm"]), default=None,
                     help="Classifier variant."),
        click.option("--target", type=click.Choice(["cluster", "activity"]), default=None,
                     help="Classification target column."),
        click.option("--beta", type=float, default=None, help="Potency scaling base."),
        click.option("--recluster", is_flag=True, default=False,
                     help="Re-run k-means per person and match clusters greedily."),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _build_config(config_path, seed, k, out_dir, classifier_variant, target, beta, recluster):
    config = _load_config(config_path)
    if seed is not None:
        config.seed = seed
    if k is not None:
        config.k = k
    if out_dir is not None:
        config.out_dir = out_dir
    if classifier_variant is not None:
        config.classifier.variant = classifier_variant
    if target is not None:
        config.target = target
    if beta is not None:
        config.potency.beta = beta
    if recluster:
        config.recluster = True
    config.validate()
    return config


def _run(runner, printer, **flags):
    try:
        config = _build_config(**flags)
        result = runner(config)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    except PipelineError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    except AerolensError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    except click.ClickException:
        raise
    except Exception as exc:  # pragma: no cover - last-resort guard
        click.echo(f"unexpected error: {exc}", err=True)
        sys.exit(1)
    printer(result)
    sys.exit(0)


@click.group()
@click.version_option(package_name="aerolens", prog_name="aerolens")
def main():
    """Indoor air pollution analytics: cluster readings, classify
    activities, explain the model, and score personal exposure."""


@main.command()
@_common_options
def synth(**flags):
    """Generate a synthetic day of sensor readings."""

    def printer(result):
        click.echo(f"wrote {result['n_readings']} readings -> {result['readings_csv']}")
        click.echo(
            f"ground truth: {result['n_segments']} segments -> {result['truth_timeline']}"
        )

    _run(run_synth, printer, **flags)


@main.command()
@_common_options
def fit(**flags):
    """Fit clustering, classifier, explanations, weights, and potency."""

    def printer(result):
        click.echo(
            f"readings: {result['n_readings']} "
            f"(dropped {result['dropped_null']} null, "
            f"{result['dropped_negative']} negative, "
            f"{result['dropped_duplicate']} duplicate)"
        )
        click.echo(
            f"clustering: k={result['k']} wcss={result['wcss']:.6g} "
            f"silhouette={result['silhouette']:.4f} "
            f"(elbow suggests k={result['elbow_chosen_k']})"
        )
        click.echo(
            f"classifier ({result['variant']}, target={result['target']}): "
            f"accuracy={result['accuracy']:.4f} kappa={result['kappa']:.4f} "
            f"mcc={result['mcc']:.4f}"
        )
        click.echo("weights: " + ", ".join(f"{w:.4f}" for w in result["weights"]))
        click.echo("potencies: " + ", ".join(f"{p:g}" for p in result["potencies"]))
        for name, path in sorted(result["artifacts"].items()):
            click.echo(f"artifact: {path}")

    _run(run_fit, printer, **flags)


@main.command()
@_common_options
def exposure(**flags):
    """Score per-person exposure against the fitted reference."""

    def printer(result):
        for person in result["persons"]:
            counts = ", ".join(str(c) for c in person["counts"])
            click.echo(
                f"{person['person_id']}: counts=({counts}) total={person['total']:g}"
            )
        click.echo(f"artifact: {result['exposure_report']}")
        click.echo(f"artifact: {result['cohort_csv']}")

    _run(run_exposure, printer, **flags)


@main.command()
@_common_options
def segment(**flags):
    """Segment a day of readings into an activity timeline."""

    def printer(result):
        for seg in result["segments"]:
            click.echo(
                f"{seg['start']} .. {seg['end']}  {seg['label']} "
                f"(confidence {seg['confidence']:.3f})"
            )
        click.echo(f"artifact: {result['timeline_json']}")
        click.echo(f"artifact: {result['timeline_csv']}")

    _run(run_segment, printer, **flags)


@main.command()
@_common_options
def report(**flags):
    """Print a summary of the artifacts in the output directory."""

    def printer(result):
        docs = result["artifacts"]
        click.echo(f"artifacts in {result['out_dir']}:")
        if "cluster-model.json" in docs:
            doc = docs["cluster-model.json"]
            click.echo(f"  clustering: k={doc['k']} wcss={doc['wcss']:.6g} seed={doc['seed']}")
        if "eval-report.json" in docs:
            doc = docs["eval-report.json"]
            click.echo(
                f"  classifier: {doc['variant']} target={doc['target']} "
                f"accuracy={doc['accuracy']:.4f} kappa={doc['kappa']:.4f} "
                f"mcc={doc['mcc']:.4f} rmse={doc['rmse']:.4f}"
            )
        if "weights.json" in docs:
            weights = docs["weights.json"]["weights"]
            pairs = ", ".join(f"{name}={value:.4f}" for name, value in sorted(weights.items()))
            click.echo(f"  weights: {pairs}")
        if "explain-report.json" in docs:
            doc = docs["explain-report.json"]
            click.echo(
                f"  explanations: target={doc['target']} weight_source={doc['weight_source']} "
                f"lime_rows={len(doc['lime'])}"
            )
        if "potency.json" in docs:
            for row in docs["potency.json"]["clusters"]:
                click.echo(
                    f"  cluster {row['cluster']}: n={row['instance_count']} "
                    f"dominant={row['dominant']} potency={row['potency']:g} "
                    f"rank={row['rank']}"
                )
        if "exposure-report.json" in docs:
            for person in docs["exposure-report.json"]["persons"]:
                click.echo(
                    f"  {person['person_id']} ({person['date']}): "
                    f"total={person['total_exposure']:g}"
                )
        if "timeline.json" in docs:
            n = len(docs["timeline.json"]["segments"])
            click.echo(f"  timeline: {n} segments")

    _run(run_report, printer, **flags)


@main.command(name="learning-curve")
@_common_options
def learning_curve(**flags):
    """Evaluate the classifier over growing random training subsets."""

    def printer(result):
        click.echo(f"learning curve ({result['variant']}, target={result['target']}):")
        for point in result["points"]:
            click.echo(
                f"  n={point['n_train']}: accuracy={point['accuracy']:.4f} "
                f"kappa={point['kappa']:.4f}"
            )
        click.echo(f"artifact: {result['learning_curve_csv']}")

    _run(run_learning_curve, printer, **flags)


if __name__ == "__main__":
    main()
