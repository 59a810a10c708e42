"""Command-line surface.

Commands: simulate, transform, fit, predict, backtransform, tune, benchmark.
Options may come from flags or from a strict JSON config file (flags win);
unknown config keys are rejected. The VDECOR_LOG environment variable sets
log verbosity (debug/info/warning/error). Exit codes: 0 success, 1 usage or
validation error, 2 numerical failure.
"""

import json
import logging
import os
import sys
import time

import click
import numpy as np

from . import dataio
from .bench import DEFAULT_LEARNER_GRIDS, BenchmarkConfig, run_benchmark
from .errors import NumericalError, ValidationError
from .kernel import CorrelationModel
from .pipeline import Pipeline, SpatialData, add_intercept, fit_pipeline
from .simgen import SimulationConfig, generate_scenario
from .tune import CvResult, TuningGrid, cross_validate, final_fit
from .vecchia import compute_factors, prediction_factors, recorrelate_prediction, transform_dataset

CONFIG_VERSION = 1
log = logging.getLogger("vdecor")


def _setup_logging():
    level = os.environ.get("VDECOR_LOG", "warning").strip().lower()
    levels = {"debug": logging.DEBUG, "info": logging.INFO,
              "warning": logging.WARNING, "error": logging.ERROR}
    logging.basicConfig(level=levels.get(level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _load_config(path, allowed):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(cfg, dict):
        raise ValidationError(f"{path}: config must be a JSON object")
    version = cfg.pop("version", None)
    if version != CONFIG_VERSION:
        raise ValidationError(f"{path}: config version must be {CONFIG_VERSION}, got {version!r}")
    unknown = set(cfg) - set(allowed)
    if unknown:
        raise ValidationError(f"{path}: unknown config keys {sorted(unknown)}")
    return cfg


def _merge(flag, cfg, key, default=None):
    if flag is not None:
        return flag
    return cfg.get(key, default)


def _require(value, name):
    if value is None:
        raise click.UsageError(f"missing required option {name}")
    return value


def _kernel(family, range_, nugget, smoothness):
    family = (family or "exponential").lower()
    return CorrelationModel(
        family,
        range=_require(range_, "--range"),
        nugget=nugget if nugget is not None else 0.0,
        smoothness=smoothness if family == "matern" else None,
    )


def _floats_csv(text):
    try:
        return tuple(float(tok) for tok in str(text).split(",") if tok.strip() != "")
    except ValueError:
        raise ValidationError(f"expected comma-separated numbers, got {text!r}") from None


def _learner_spec(kind, k, trees, min_leaf, mtry, seed):
    kind = (kind or "lm").lower()
    spec = {"kind": kind}
    if kind == "knn":
        spec["k"] = int(k) if k is not None else 5
    elif kind in ("trees", "bagged-trees"):
        spec["trees"] = int(trees) if trees is not None else 64
        spec["min_leaf"] = int(min_leaf) if min_leaf is not None else 5
        if mtry is not None:
            spec["mtry"] = int(mtry)
        spec["seed"] = int(seed) if seed is not None else 0
    elif kind not in ("lm", "linear"):
        raise ValidationError(f"unknown learner {kind!r}; expected lm, knn, or trees")
    return spec


@click.group(name="vdecor")
def cli():
    """Spatial decorrelation preprocessing for regression learners."""


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--scenario", default=None, help="1/2/3 or canonical scenario name")
@click.option("--n", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--train-frac", type=float, default=None)
@click.option("--sill", type=float, default=None)
@click.option("--features", "n_features", type=int, default=None)
@click.option("--out", required=True, type=click.Path(file_okay=False))
def simulate(config_path, scenario, n, seed, train_frac, sill, n_features, out):
    """Generate scenario train/test CSVs plus a JSON provenance sidecar."""
    cfg = _load_config(config_path, {"scenario", "n", "seed", "train_frac", "sill", "n_features"})
    sim = SimulationConfig(
        n=int(_require(_merge(n, cfg, "n"), "--n")),
        scenario=_require(_merge(scenario, cfg, "scenario"), "--scenario"),
        seed=int(_merge(seed, cfg, "seed", 0)),
        train_frac=float(_merge(train_frac, cfg, "train_frac", 0.8)),
        sill=float(_merge(sill, cfg, "sill", 100.0)),
        n_features=int(_merge(n_features, cfg, "n_features", 10)),
    )
    t0 = time.perf_counter()
    ds = generate_scenario(sim)
    os.makedirs(out, exist_ok=True)
    tr, te = ds.train_idx, ds.test_idx
    dataio.write_training_csv(os.path.join(out, "train.csv"),
                              ds.coords[tr], ds.features[tr], ds.response[tr])
    dataio.write_training_csv(os.path.join(out, "test.csv"),
                              ds.coords[te], ds.features[te], ds.response[te])
    truth = {k: np.asarray(v).tolist() for k, v in ds.truth.items()}
    meta = {
        "version": CONFIG_VERSION,
        "config": sim.to_dict(),
        "train_rows": int(tr.size),
        "test_rows": int(te.size),
        "truth": truth,
    }
    with open(os.path.join(out, "meta.json"), "w") as fh:
        json.dump(meta, fh, sort_keys=True, indent=2)
    log.info("simulated %s n=%d in %.2fs", sim.scenario, sim.n, time.perf_counter() - t0)
    click.echo(f"wrote {out}/train.csv ({tr.size} rows), test.csv ({te.size} rows), meta.json")


_KERNEL_KEYS = {"kernel", "range", "nugget", "smoothness", "C"}


def _kernel_opts(fn):
    fn = click.option("--kernel", default=None, help="exponential (default) or matern")(fn)
    fn = click.option("--range", "range_", type=float, default=None)(fn)
    fn = click.option("--nugget", type=float, default=None)(fn)
    fn = click.option("--smoothness", type=float, default=None)(fn)
    fn = click.option("--C", "cap", type=int, default=None, help="max conditioning neighbors (default 30)")(fn)
    return fn


def _kernel_from(cfg, kernel, range_, nugget, smoothness, cap):
    model = _kernel(
        _merge(kernel, cfg, "kernel"),
        _merge(range_, cfg, "range"),
        _merge(nugget, cfg, "nugget"),
        _merge(smoothness, cfg, "smoothness"),
    )
    return model, int(_merge(cap, cfg, "C", 30))


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--train", "train_path", type=click.Path(exists=True, dir_okay=False), default=None)
@_kernel_opts
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--factors-out", type=click.Path(dir_okay=False), default=None)
def transform(config_path, train_path, kernel, range_, nugget, smoothness, cap, out, factors_out):
    """Decorrelate a training file; write transformed rows (max-min order)."""
    cfg = _load_config(config_path, {"train"} | _KERNEL_KEYS)
    train_path = _require(_merge(train_path, cfg, "train"), "--train")
    model, cap = _kernel_from(cfg, kernel, range_, nugget, smoothness, cap)
    coords, features, y = dataio.read_training_csv(train_path)
    t0 = time.perf_counter()
    factors = compute_factors(coords, model, cap=min(cap, max(1, len(y) - 1)))
    td = transform_dataset(y, add_intercept(features), factors)
    log.info("transformed %d rows in %.2fs", len(y), time.perf_counter() - t0)
    dataio.write_transformed_csv(out, factors.order, td.ytilde, td.xtilde)
    if factors_out:
        factors.save(factors_out)
    click.echo(f"wrote {out}" + (f" and {factors_out}" if factors_out else ""))


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--train", "train_path", type=click.Path(exists=True, dir_okay=False), default=None)
@_kernel_opts
@click.option("--learner", default=None, help="lm, knn, or trees")
@click.option("--k", type=int, default=None, help="knn neighbor count")
@click.option("--trees", type=int, default=None)
@click.option("--min-leaf", type=int, default=None)
@click.option("--mtry", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--from-cv", "cv_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="take kernel and learner settings from a tune result")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--report", "report_path", type=click.Path(dir_okay=False), default=None)
def fit(config_path, train_path, kernel, range_, nugget, smoothness, cap, learner, k, trees,
        min_leaf, mtry, seed, cv_path, out, report_path):
    """Fit the decorrelation pipeline and persist it as a JSON artifact."""
    cfg = _load_config(config_path, {"train", "learner", "k", "trees", "min_leaf", "mtry", "seed"} | _KERNEL_KEYS)
    train_path = _require(_merge(train_path, cfg, "train"), "--train")
    coords, features, y = dataio.read_training_csv(train_path)
    data = SpatialData(coords, features, y)

    if cv_path is not None:
        cv = CvResult.load(cv_path)
        t0 = time.perf_counter()
        pipe, rep = final_fit(data, cv.best, cv.learner_kind, cap=cv.cap,
                              family=cv.family, smoothness=cv.smoothness,
                              seed=int(_merge(seed, cfg, "seed", cv.seed)))
    else:
        model, cap = _kernel_from(cfg, kernel, range_, nugget, smoothness, cap)
        spec = _learner_spec(_merge(learner, cfg, "learner"), _merge(k, cfg, "k"),
                             _merge(trees, cfg, "trees"), _merge(min_leaf, cfg, "min_leaf"),
                             _merge(mtry, cfg, "mtry"), _merge(seed, cfg, "seed"))
        t0 = time.perf_counter()
        pipe, rep = fit_pipeline(data, model, spec, cap=min(cap, max(1, data.n - 1)))
    pipe.save(out)
    if report_path:
        effective = {
            "train": str(train_path),
            "kernel": pipe.factors.model.to_dict(),
            "C": pipe.factors.cap,
            "learner": pipe.learner.to_dict().get("kind"),
            "rows": data.n,
        }
        with open(report_path, "w") as fh:
            json.dump({"version": CONFIG_VERSION, "config": effective, **rep.to_dict()},
                      fh, sort_keys=True, indent=2)
    log.info("fit %d rows in %.2fs", data.n, time.perf_counter() - t0)
    click.echo(f"wrote {out} (training RMSE {rep.training_rmse:.6g})")


@cli.command()
@click.option("--artifact", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--queries", "queries_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def predict(artifact, queries_path, out):
    """Predict at query locations through a fitted pipeline artifact."""
    pipe = Pipeline.load(artifact)
    coords, features, _ = dataio.read_query_csv(queries_path)
    p = pipe.data.features.shape[1]
    if coords.shape[0] and features.shape[1] != p:
        raise ValidationError(f"query file has {features.shape[1]} features, artifact expects {p}")
    if coords.shape[0] and coords.shape[1] != pipe.data.coords.shape[1]:
        raise ValidationError(
            f"query file has {coords.shape[1]} coordinates, artifact expects {pipe.data.coords.shape[1]}"
        )
    preds = pipe.predict(coords, features) if coords.shape[0] else np.empty(0)
    dataio.write_predictions_csv(out, coords, preds)
    click.echo(f"wrote {out} ({len(preds)} predictions)")


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--train", "train_path", type=click.Path(exists=True, dir_okay=False), default=None)
@_kernel_opts
@click.option("--queries", "queries_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="CSV with loc_* columns and a yt column of decorrelated predictions")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def backtransform(config_path, train_path, kernel, range_, nugget, smoothness, cap, queries_path, out):
    """Re-correlate externally produced decorrelated predictions."""
    cfg = _load_config(config_path, {"train"} | _KERNEL_KEYS)
    train_path = _require(_merge(train_path, cfg, "train"), "--train")
    model, cap = _kernel_from(cfg, kernel, range_, nugget, smoothness, cap)
    coords, _, y = dataio.read_training_csv(train_path)
    qcoords, _, extras = dataio.read_query_csv(queries_path, extra=("yt",))
    if "yt" not in extras:
        raise ValidationError(f"{queries_path}: missing yt column")
    if qcoords.shape[0] == 0:
        dataio.write_predictions_csv(out, qcoords, np.empty(0))
    else:
        pf = prediction_factors(qcoords, coords, model, cap=min(cap, len(y)))
        ystar = recorrelate_prediction(extras["yt"], pf, y)
        dataio.write_predictions_csv(out, qcoords, ystar)
    click.echo(f"wrote {out}")


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--train", "train_path", type=click.Path(exists=True, dir_okay=False), default=None)
@_kernel_opts
@click.option("--learner", default=None)
@click.option("--folds", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--nuggets", default=None, help="comma-separated nugget grid")
@click.option("--ranges", default=None, help="comma-separated range grid")
@click.option("--learner-grid", "learner_grid_json", default=None,
              help='JSON object of learner hyperparameter grids, e.g. {"k": [5, 25]}')
@click.option("--blocked/--random-folds", default=None)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--fit-out", type=click.Path(dir_okay=False), default=None)
def tune(config_path, train_path, kernel, range_, nugget, smoothness, cap, learner, folds, seed,
         nuggets, ranges, learner_grid_json, blocked, out, fit_out):
    """Cross-validated grid search over kernel and learner settings."""
    cfg = _load_config(config_path, {"train", "learner", "folds", "seed", "nuggets", "ranges",
                                     "learner_grid", "blocked", "kernel", "smoothness", "C"})
    train_path = _require(_merge(train_path, cfg, "train"), "--train")
    family = (_merge(kernel, cfg, "kernel") or "exponential").lower()
    smoothness = _merge(smoothness, cfg, "smoothness")
    cap_v = int(_merge(cap, cfg, "C", 30))
    kind = (_merge(learner, cfg, "learner") or "lm").lower()
    if learner_grid_json is not None:
        try:
            lgrid = json.loads(learner_grid_json)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"--learner-grid: invalid JSON ({exc})") from None
    else:
        lgrid = cfg.get("learner_grid", {})
    grid = TuningGrid(
        nuggets=_floats_csv(nuggets) if nuggets is not None else tuple(cfg.get("nuggets", (0.0, 0.25, 0.5, 0.75, 1.0))),
        ranges=_floats_csv(ranges) if ranges is not None else (tuple(cfg["ranges"]) if "ranges" in cfg else None),
        learner_grid={k2: list(v) for k2, v in lgrid.items()},
    )
    coords, features, y = dataio.read_training_csv(train_path)
    data = SpatialData(coords, features, y)
    cv = cross_validate(data, kind, grid,
                        folds=int(_merge(folds, cfg, "folds", 5)),
                        seed=int(_merge(seed, cfg, "seed", 0)),
                        cap=cap_v, family=family, smoothness=smoothness,
                        blocked=bool(_merge(blocked, cfg, "blocked", False)))
    cv.save(out)
    b = cv.best
    click.echo(f"best cell: nugget={b['nugget']} range={b['range']:.6g} "
               f"learner={b['learner']} mean RMSE {b['mean_rmse']:.6g}")
    if fit_out:
        pipe, _ = final_fit(data, b, kind, cap=cap_v, family=family,
                            smoothness=smoothness, seed=cv.seed)
        pipe.save(fit_out)
        click.echo(f"wrote {fit_out}")


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--scenario", default=None)
@click.option("--n", type=int, default=None)
@click.option("--replicates", type=int, default=None)
@click.option("--learners", default=None, help="comma-separated subset of lm,knn,trees")
@click.option("--seed", type=int, default=None)
@click.option("--threads", type=int, default=None)
@click.option("--folds", type=int, default=None)
@click.option("--C", "cap", type=int, default=None)
@click.option("--nuggets", default=None)
@click.option("--ranges", default=None)
@click.option("--out", required=True, type=click.Path(file_okay=False))
def benchmark(config_path, scenario, n, replicates, learners, seed, threads, folds, cap,
              nuggets, ranges, out):
    """Spatial vs nonspatial comparison across replicates (JSON + CSV report)."""
    cfg = _load_config(config_path, {"scenario", "n", "replicates", "learners", "seed", "threads",
                                     "folds", "C", "nuggets", "ranges", "learner_grids"})
    kinds = _merge(learners, cfg, "learners", "lm,knn,trees")
    if isinstance(kinds, str):
        kinds = tuple(s.strip() for s in kinds.split(",") if s.strip())
    lgrids = cfg.get("learner_grids", DEFAULT_LEARNER_GRIDS)
    bench_cfg = BenchmarkConfig(
        scenario=str(_require(_merge(scenario, cfg, "scenario"), "--scenario")),
        n=int(_merge(n, cfg, "n", 2000)),
        replicates=int(_merge(replicates, cfg, "replicates", 10)),
        learners=kinds,
        seed=int(_merge(seed, cfg, "seed", 0)),
        folds=int(_merge(folds, cfg, "folds", 5)),
        cap=int(_merge(cap, cfg, "C", 30)),
        nuggets=_floats_csv(nuggets) if nuggets is not None else tuple(cfg.get("nuggets", (0.0, 0.25, 0.5, 0.75, 1.0))),
        ranges=_floats_csv(ranges) if ranges is not None else (tuple(cfg["ranges"]) if "ranges" in cfg else None),
        learner_grids={k2: {a: list(v) for a, v in g.items()} for k2, g in lgrids.items()},
        threads=int(_merge(threads, cfg, "threads", 1)),
    )
    report = run_benchmark(bench_cfg)
    os.makedirs(out, exist_ok=True)
    report.save_json(os.path.join(out, "report.json"))
    report.save_csv(os.path.join(out, "report.csv"))
    for kind, s in report.summary.items():
        click.echo(f"{kind}: spatial {s['spatial_mean_rmse']:.4g} vs "
                   f"nonspatial {s['nonspatial_mean_rmse']:.4g} (ratio {s['ratio']:.3f})")
    click.echo(f"wrote {out}/report.json and {out}/report.csv in {report.wall_time_s:.1f}s")


def main(argv=None):
    _setup_logging()
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.UsageError as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        if exc.ctx is not None:
            click.echo(exc.ctx.get_usage(), err=True)
        sys.exit(1)
    except click.Abort:
        sys.exit(1)
    except ValidationError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    except NumericalError as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(2)
    sys.exit(0)


if __name__ == "__main__":
    main()
