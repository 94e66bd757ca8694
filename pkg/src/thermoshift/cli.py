"""Config-driven command line front end.

``thermoshift <command> --config run.json [--depth N] [--out dir]`` runs one
experiment and writes ``report.json``, ``metadata.json`` and ``tables/*.csv``
(plus ``summary.txt`` for ``sync``).
Exit status is 0 when every check passes, 1 when a check fails and 2 for a
bad configuration.
"""

from __future__ import annotations

import csv
import io
import json
import math
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import click
import numpy as np

from . import __version__
from ._kernels import HAVE_NUMBA
from .errors import ConfigError, IllegalPoint, IllegalWindow, OracleUnavailable, ThermoshiftError
from .leaf import check_mass_bounds, check_scaling, gibbs_ratio, leaf_measure
from .oracle import oracle_measure, oracle_pressure_data
from .potentials import potential_from_config
from .pressure import normalize_potential, partition_series, pressure_estimate, q_coefficients
from .product import (
    Rectangle,
    check_T_invariance,
    check_lambda_gibbs,
    check_mu_restriction,
    check_q_independence,
    is_rectangle,
    lambda_build,
    mu_build,
    rectangle_point,
    return_structure,
    total_variation,
)
from .symbolic import random_point, shift_from_config
from .sync import SyncParams, find_synchronizing_words, sync_pipeline

COMMANDS = ("pressure", "leaf", "gibbs", "product", "sync", "compare")

DEFAULTS = {
    "depth": 8,
    "refinement": 10,
    "nMax": 16,
    "muDepth": 4,
    "basePoints": 3,
    "sampleSeed": 0,
    "tolerance": 1e-3,
    "widthTolerance": 0.02,
    "independenceTolerance": 1e-6,
    "qRange": [4, 16],
}

# camelCase config keys accepted for the synchronized pipeline
_SYNC_KEYS = {
    "nMax": "n_max",
    "gMax": "g_max",
    "leafDepth": "leaf_depth",
    "refinement": "refinement",
    "muDepth": "mu_depth",
    "entropyDepth": "entropy_depth",
    "gibbsDepth": "gibbs_depth",
    "specCheckLength": "spec_check_len",
    "tvTolerance": "tv_tolerance",
    "variationalTolerance": "variational_tolerance",
}


# ---------------------------------------------------------------- configuration


class RunConfig:
    """Parsed and validated run configuration."""

    def __init__(self, raw: dict, command: str, base_dir: Path):
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        declared = raw.get("command")
        if declared is not None and declared not in COMMANDS:
            raise ConfigError(f"unknown command {declared!r}")
        self.raw = raw
        self.command = command
        self.spec = shift_from_config(raw.get("shift", "full2"))
        pot_cfg = raw.get("potential", "mme")
        if isinstance(pot_cfg, dict) and "tableFile" in pot_cfg:
            pot_cfg = dict(pot_cfg)
            path = base_dir / pot_cfg.pop("tableFile")
            if not path.is_file():
                raise ConfigError(f"potential table file {path} does not exist")
            try:
                pot_cfg["table"] = json.loads(path.read_text())
            except json.JSONDecodeError as exc:
                raise ConfigError(f"potential table file {path}: {exc}") from None
        try:
            self.phi = potential_from_config(self.spec, pot_cfg)
            self.phi.check(self.spec)
        except IllegalWindow as exc:
            raise ConfigError(str(exc)) from None
        self.normalize = pot_cfg.get("normalize", "oracle") if isinstance(pot_cfg, dict) else "oracle"
        if not (self.normalize in ("oracle", "none", "fekete") or _is_number(self.normalize)):
            raise ConfigError(f"normalize must be 'oracle', 'none', 'fekete' or a number, not {self.normalize!r}")
        params = raw.get("parameters", {})
        if not isinstance(params, dict):
            raise ConfigError("parameters must be an object")
        self.params = {**DEFAULTS, **params}
        for key in ("depth", "refinement", "nMax", "muDepth"):
            if not isinstance(self.params[key], int) or self.params[key] < 1:
                raise ConfigError(f"parameter {key} must be an integer >= 1")
        for key in ("tolerance", "widthTolerance", "independenceTolerance"):
            if not _is_number(self.params[key]) or self.params[key] <= 0:
                raise ConfigError(f"parameter {key} must be a positive number")
        q = self.params["qRange"]
        if not (isinstance(q, list) and len(q) == 2 and all(isinstance(a, int) for a in q) and 1 <= q[0] <= q[1]):
            raise ConfigError("qRange must be [first, last] with 1 <= first <= last")

    @property
    def q_range(self) -> range:
        a, b = self.params["qRange"]
        return range(a, b + 1)

    def base_points(self):
        spec = self.spec
        entry = self.params["basePoints"]
        try:
            if isinstance(entry, int):
                if entry < 1:
                    raise ConfigError("basePoints must be >= 1")
                rng = np.random.default_rng(int(self.params["sampleSeed"]))
                return [random_point(spec, rng) for _ in range(entry)]
            points = []
            for p in entry:
                x = spec.point(p.get("left"), p.get("core", ""), p.get("right"), int(p.get("anchor", 0)))
                spec.check_point(x)
                points.append(x)
        except (IllegalPoint, TypeError, AttributeError, KeyError, ValueError) as exc:
            raise ConfigError(f"bad base point: {exc}") from None
        if not points:
            raise ConfigError("basePoints list is empty")
        return points

    def rectangles(self):
        spec = self.spec
        entry = self.params.get("rectangles")
        if entry is None:
            rects = [Rectangle.cylinder(spec, (a,)) for a in range(spec.nsym)]
            rects = [r for r in rects if is_rectangle(spec, r)]
            if not rects:
                sync = find_synchronizing_words(spec, 4)
                if not sync:
                    raise ConfigError("no default rectangle found; list rectangles explicitly")
                rects = [Rectangle.cylinder(spec, sync[0])]
            return rects
        try:
            return [Rectangle.open(spec, r.get("past", r["future"][:1]), r["future"]) for r in entry]
        except (KeyError, TypeError, AttributeError, ThermoshiftError) as exc:
            raise ConfigError(f"bad rectangle entry: {exc}") from None


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def load_config(path: Path, command: str, depth: int | None = None) -> RunConfig:
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if depth is not None:
        if depth < 1:
            raise ConfigError("--depth must be >= 1")
        raw = dict(raw)
        raw["parameters"] = {**raw.get("parameters", {}), "depth": depth}
    return RunConfig(raw, command, path.parent)


# ---------------------------------------------------------------- output helpers


class Run:
    """Collects results, checks and CSV tables for one command."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.results: dict = {}
        self.checks: list = []
        self.tables: dict = {}
        self.texts: dict = {}

    def check(self, name: str, passed: bool, **detail) -> bool:
        self.checks.append({"name": name, "pass": bool(passed), **detail})
        return passed

    def table(self, name: str, header, rows) -> None:
        buf = io.StringIO()
        out = csv.writer(buf, lineterminator="\n")
        out.writerow(header)
        for row in rows:
            out.writerow([repr(v) if isinstance(v, float) else v for v in row])
        self.tables[name] = buf.getvalue()

    @property
    def failures(self) -> list:
        return [c["name"] for c in self.checks if not c["pass"]]

    def report(self) -> dict:
        return {
            "command": self.cfg.command,
            "config": self.cfg.raw,
            "results": self.results,
            "checks": self.checks,
            "failures": self.failures,
            "pass": not self.failures,
        }


def jsonable(obj):
    """Recursively convert to JSON-safe values; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_outputs(run: Run, out_dir: Path, started: float) -> None:
    tables = out_dir / "tables"
    tables.mkdir(parents=True, exist_ok=True)
    report = json.dumps(jsonable(run.report()), indent=2, sort_keys=True, allow_nan=False)
    (out_dir / "report.json").write_text(report + "\n")
    meta = {
        "createdAt": datetime.now(timezone.utc).isoformat(),
        "runtimeSeconds": time.perf_counter() - started,
        "version": __version__,
        "numba": HAVE_NUMBA,
    }
    (out_dir / "metadata.json").write_text(json.dumps(meta, indent=2) + "\n")
    for name, text in sorted(run.tables.items()):
        (tables / f"{name}.csv").write_text(text)
    for name, text in sorted(run.texts.items()):
        (out_dir / name).write_text(text)


# ---------------------------------------------------------------- commands


def _oracle_value(spec, phi):
    try:
        _, data = oracle_pressure_data(spec, phi)
    except OracleUnavailable:
        return None
    return data.log_rho


def cmd_pressure(run: Run) -> None:
    cfg = run.cfg
    spec, phi = cfg.spec, cfg.phi
    # --depth doubles as nMax here: it is the longest word length used
    n_max = max(2, cfg.params["depth"] if "depth" in cfg.raw.get("parameters", {}) else cfg.params["nMax"])
    est = pressure_estimate(spec, phi, n_max, "fekete")
    oracle = _oracle_value(spec, phi)
    run.results.update({"fekete": est.to_dict(), "oracle": oracle, "nMax": n_max})
    run.results["details"] = {k: v for k, v in est.details.items() if k != "logLambda"}
    width = est.upper - est.lower
    run.check("interval_width", width <= cfg.params["widthTolerance"], width=width, tolerance=cfg.params["widthTolerance"])
    if oracle is not None:
        run.check("oracle_inside", est.lower - 1e-12 <= oracle <= est.upper + 1e-12, oracle=oracle)
    reference = oracle if oracle is not None else est.center
    series = partition_series(spec, phi, range(1, n_max + 1))
    run.table("pressure", ["n", "Lambda_n", "log_Lambda_n_over_n", "Q_n"], series.rows(reference))


def _normalized(cfg: RunConfig):
    mode = cfg.normalize
    return normalize_potential(cfg.spec, cfg.phi, float(mode) if _is_number(mode) else mode, cfg.params["nMax"])


def cmd_leaf(run: Run) -> None:
    cfg = run.cfg
    spec = cfg.spec
    bar, pressure = _normalized(cfg)
    points = cfg.base_points()
    q = q_coefficients(spec, bar, points, cfg.q_range, pressure)
    depth, refinement = cfg.params["depth"], cfg.params["refinement"]
    run.results["pressure"] = pressure.to_dict()
    run.results["q"] = q.to_dict()
    measures = []
    for i, x in enumerate(points):
        for orientation, tag in (("forward", "u"), ("backward", "s")):
            m = leaf_measure(spec, bar, x, orientation, depth, refinement, pressure, q.q_bar.hi)
            mass = check_mass_bounds(m, q, raise_on_fail=False)
            run.check(f"mass_bounds[{i},{tag}]", mass.passed, **mass.to_dict())
            zone = _scaling_zone(spec, x, orientation)
            if zone:
                sc = check_scaling(spec, bar, x, zone, orientation, refinement, pressure, q.q_bar.hi)
                run.check(f"scaling[{i},{tag}]", sc.passed, **sc.to_dict())
            measures.append({**json.loads(m.to_json()), "certified": m.certified})
            run.tables[f"leaf_{i}_{tag}"] = m.to_csv()
    run.results["measures"] = measures


def _scaling_zone(spec, x, orientation):
    """All leaf cylinders of length 2 through x_0 x_1 (or x_{-1} x_0 backward)."""
    if orientation == "forward":
        w = x.window(0, 2)
    else:
        w = x.window(-1, 1)
    return [w] if spec.is_legal(w) else []


def cmd_gibbs(run: Run) -> None:
    cfg = run.cfg
    spec = cfg.spec
    bar, pressure = _normalized(cfg)
    points = cfg.base_points()
    q = q_coefficients(spec, bar, points, cfg.q_range, pressure)
    depth, refinement = cfg.params["depth"], cfg.params["refinement"]
    run.results["pressure"] = pressure.to_dict()
    summary = []
    for i, x in enumerate(points):
        for orientation, tag in (("forward", "u"), ("backward", "s")):
            m = leaf_measure(spec, bar, x, orientation, depth, refinement, pressure, q.q_bar.hi)
            rows, bad = [], []
            for w in sorted(m.values, key=lambda v: (len(v), v)):
                rep = gibbs_ratio(spec, bar, x, w, q, orientation, refinement, m, raise_on_fail=False)
                rows.append((spec.fmt(w), rep.ratio.lo, rep.ratio.hi, rep.bounds.lo, rep.bounds.hi, rep.passed))
                if not rep.passed:
                    bad.append(spec.fmt(w))
            run.check(f"gibbs[{i},{tag}]", not bad, wordsChecked=len(rows), violations=bad)
            run.table(f"gibbs_{i}_{tag}", ["word", "ratio_lo", "ratio_hi", "bound_lo", "bound_hi", "pass"], rows)
            summary.append({"base": x.describe(spec), "orientation": tag, "words": len(rows), "violations": len(bad)})
    run.results["gibbs"] = summary


def _product_objects(cfg: RunConfig):
    spec = cfg.spec
    bar, pressure = _normalized(cfg)
    rects = cfg.rectangles()
    depth, n_max, mu_depth = cfg.params["depth"], cfg.params["nMax"], cfg.params["muDepth"]
    span = max(len(r.future) for r in rects)
    refinement = max(cfg.params["refinement"], n_max + span + max(mu_depth, depth) + bar.width - depth)
    q = q_coefficients(spec, bar, [], cfg.q_range, pressure)
    lam = lambda_build(spec, bar, rects, None, depth, refinement, pressure, q.q_bar.hi)
    structure = return_structure(spec, rects, n_max)
    mu = mu_build(lam, structure, n_max, mu_depth)
    return bar, pressure, rects, refinement, q, lam, structure, mu


def cmd_product(run: Run) -> None:
    cfg = run.cfg
    spec = cfg.spec
    bar, pressure, rects, refinement, q, lam, structure, mu = _product_objects(cfg)
    depth = cfg.params["depth"]
    run.results.update(
        {
            "pressure": pressure.to_dict(),
            "rectangles": [r.describe(spec) for r in rects],
            "lambdaMass": lam.mass.to_list(),
            "muMass": mu.mass.to_list(),
            "muTailBound": mu.tail_bound,
            "muNormalized": {spec.fmt(w): v for w, v in sorted(mu.normalized().items(), key=lambda kv: (len(kv[0]), kv[0]))},
        }
    )
    rng = np.random.default_rng(int(cfg.params["sampleSeed"]) + 1)
    others = [rectangle_point(spec, r, rng) for r in rects]
    lam2 = lambda_build(spec, bar, rects, others, depth, refinement, pressure, q.q_bar.hi)
    ind = check_q_independence(lam, lam2, raise_on_fail=False)
    tol = cfg.params["independenceTolerance"]
    run.check("q_independence", ind.all_overlap and ind.max_discrepancy <= tol,
              wordsChecked=ind.words_checked, maxDiscrepancy=ind.max_discrepancy, tolerance=tol)
    inv = check_T_invariance(lam, structure, depth, raise_on_fail=False)
    run.check("return_map_invariance", inv.all_overlap and inv.max_defect <= tol, **inv.to_dict())
    gib = check_lambda_gibbs(lam, raise_on_fail=False)
    run.check("lambda_gibbs", gib.passed, **gib.to_dict())
    restriction = check_mu_restriction(mu)
    run.check("mu_restricts_to_lambda", restriction <= tol, maxDiscrepancy=restriction)
    run.tables["lambda"] = lam.to_csv()
    run.tables["mu"] = mu.to_csv()


def cmd_compare(run: Run) -> None:
    cfg = run.cfg
    spec = cfg.spec
    bar, pressure, rects, _, _, lam, structure, mu = _product_objects(cfg)
    mu_depth = cfg.params["muDepth"]
    graph, data = oracle_pressure_data(spec, bar)
    ref = oracle_measure(graph, data, mu_depth)
    norm = mu.normalized()
    rows, tvs = [], {}
    for n in range(1, mu_depth + 1):
        tvs[n] = total_variation(norm, ref, n)
        for w in sorted({w for w in norm if len(w) == n} | {w for w in ref if len(w) == n}):
            iv = mu.normalized_interval(w) if w in mu.values else None
            rows.append((spec.fmt(w), ref.get(w, 0.0), iv.lo if iv else 0.0, iv.hi if iv else 0.0))
    run.results.update({"pressure": pressure.to_dict(), "rectangles": [r.describe(spec) for r in rects],
                        "totalVariation": tvs})
    tol = cfg.params["tolerance"]
    run.check("total_variation", tvs[mu_depth] <= tol, totalVariation=tvs[mu_depth], depth=mu_depth, tolerance=tol)
    run.table("compare", ["word", "mu_oracle", "mu_artifact_lo", "mu_artifact_hi"], rows)


def cmd_sync(run: Run) -> None:
    cfg = run.cfg
    spec = cfg.spec
    v = cfg.params.get("syncWord", cfg.raw.get("syncWord"))
    if v is None:
        raise ConfigError("sync needs parameters.syncWord")
    try:
        v = spec.word(v)
    except (ValueError, KeyError, ThermoshiftError) as exc:
        raise ConfigError(f"bad syncWord: {exc}") from None
    given = {_SYNC_KEYS[k]: val for k, val in cfg.raw.get("parameters", {}).items() if k in _SYNC_KEYS}
    if "depth" in cfg.raw.get("parameters", {}) and "leaf_depth" not in given:
        given["leaf_depth"] = cfg.params["depth"]
    params = SyncParams.from_dict(given)
    report = sync_pipeline(spec, cfg.phi, v, params, halt=False)
    run.results["sync"] = report.to_dict()
    run.texts["summary.txt"] = report.summary() + "\n"
    for verdict in report.verdicts:
        run.check(verdict.step, verdict.passed, **verdict.detail)
    q_g = report.q_g
    run.table("q_series", ["n", "Q_n_B", "Q_n_G"],
              ((n, qb, q_g[n] if n < len(q_g) else "") for n, qb in enumerate(report.q_b)))
    if report.mu_normalized:
        run.table("mu", ["word", "mu", "oracle"],
                  ((w, m, report.oracle.get(w, "")) for w, m in report.mu_normalized.items()))


HANDLERS = {
    "pressure": cmd_pressure,
    "leaf": cmd_leaf,
    "gibbs": cmd_gibbs,
    "product": cmd_product,
    "sync": cmd_sync,
    "compare": cmd_compare,
}


# ---------------------------------------------------------------- entry point


def execute(command: str, config: Path, depth: int | None = None, out: Path = Path("out")) -> int:
    """Run one command and write its outputs; returns the exit status."""
    started = time.perf_counter()
    try:
        cfg = load_config(Path(config), command, depth)
    except ConfigError as exc:
        click.echo(f"configuration error: {exc}", err=True)
        return 2
    run = Run(cfg)
    try:
        HANDLERS[command](run)
    except ConfigError as exc:
        click.echo(f"configuration error: {exc}", err=True)
        return 2
    except ThermoshiftError as exc:
        run.check("execution", False, error=type(exc).__name__, message=str(exc))
    write_outputs(run, Path(out), started)
    if run.failures:
        click.echo(json.dumps({"failures": run.failures}), err=True)
        return 1
    return 0


@click.command(context_settings={"help_option_names": ["-h", "--help"]})
@click.argument("command", type=click.Choice(COMMANDS))
@click.option("--config", "config", required=True, type=click.Path(path_type=Path), help="JSON run configuration.")
@click.option("--depth", type=int, default=None, help="Override parameters.depth.")
@click.option("--out", type=click.Path(path_type=Path), default=Path("out"), show_default=True, help="Output directory.")
@click.version_option(__version__)
def main(command, config, depth, out):
    """Run a thermoshift experiment described by a JSON config."""
    sys.exit(execute(command, config, depth, out))
