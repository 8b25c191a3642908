"""Scenario simulation, sensor-network fusion and Monte-Carlo evaluation.

A scenario file (YAML) describes the surveillance region, the true tracks,
the sensor and motion models, the birth model, the network topology and the
estimators to score.  :func:`run_network` plays one run; :func:`monte_carlo`
repeats it with independent random streams and aggregates the OSPA and
cardinality statistics.

Randomness: every (run, sensor, step, purpose) tuple owns an independent
stream derived from the base seed with :class:`numpy.random.SeedSequence`,
so results do not depend on execution order or on the degree of parallelism.
"""
from __future__ import annotations

import copy
import csv
import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .fusion import FusionConfig, classical_gci_lmb_fuse, r_gci_glmb_fuse
from .gaussian import GaussianMixture, IncompatibleDensitiesError
from .diagnostics import DiagnosticsReport, DiscreteSpace, discretize, label_inconsistency_indicator
from .labeled_rfs import Label, LmbDensity, glmb_to_lmb, lmb_to_glmb
from .lmb_filter import BirthModel, FilterParams, LmbFilter, MotionModel, SensorModel, extract_estimates
from .ospa import OspaParams, ospa_distance

log = logging.getLogger(__name__)

ESTIMATORS = ("local", "r_gci", "classical_gci")

# streams are keyed by purpose so that e.g. clutter never shares draws with detections
_PURPOSE = {"detection": 0, "clutter": 1, "order": 2, "truth": 3}

DEFAULTS: dict[str, Any] = {
    "name": "unnamed",
    "region": [[-500.0, 500.0], [-500.0, 500.0]],
    "duration": 65,
    "motion": {"dt": 1.0, "sigma_v": 5.0, "p_S": 0.98},
    "sensor": {"sigma": 25.0, "p_D": 0.99, "clutter_rate": 10.0},
    "n_sensors": 2,
    "topology": "line",
    "report_sensor": 0,
    "measurement_stream": "independent",
    "birth": {
        "variant": "adaptive",
        "expected_births": 0.8,
        "r_max": 0.3,
        "covariance_diag": [900.0, 900.0, 400.0, 400.0],
        "prior": [],
        "times": None,
    },
    "filter": {
        "truncation": 1e-4,
        "prune": 1e-5,
        "merge": 4.0,
        "max_components": 10,
        "gate_probability": 0.9999,
        "max_hypotheses": 200,
        "hypothesis_ratio": 1e-9,
        "extraction_threshold": 0.5,
    },
    "fusion": {
        "max_hypotheses": 1000,
        "weight_floor": 1e-6,
        "eta_floor": 1e-30,
        "nodes": "all",
    },
    "estimators": list(ESTIMATORS),
    "ospa": {"c": 100.0, "p": 1.0},
    "settle_steps": 5,
    "truth_noise": False,
    "diagnostics": {"enabled": False, "n_cells": 40, "max_cardinality": 3, "prune": 1e-6},
    "tracks": [],
}


class ConfigError(ValueError):
    """Invalid scenario configuration; the message names the offending field."""


@dataclass(frozen=True)
class TruthTrack:
    birth: int
    death: int | None  # first step at which the object is gone; None = never
    state: tuple

    def alive(self, k: int) -> bool:
        return self.birth <= k and (self.death is None or k < self.death)


@dataclass
class Scenario:
    name: str
    region: tuple
    duration: int
    motion: MotionModel
    sensors: list
    birth: BirthModel
    filter_params: FilterParams
    fusion: dict
    edges: list
    report_sensor: int
    estimators: tuple
    tracks: list
    ospa: OspaParams
    settle_steps: int
    measurement_stream: str
    truth_noise: bool = False
    diagnostics: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    @property
    def n_sensors(self) -> int:
        return len(self.sensors)

    def neighbours(self, s: int) -> list[int]:
        out = set()
        for a, b in self.edges:
            if a == s:
                out.add(b)
            if b == s:
                out.add(a)
        return sorted(out)

    def config_hash(self) -> str:
        blob = json.dumps(self.config, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()


# ---------------------------------------------------------------------------
# configuration


def _merge(base: dict, patch: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in patch.items():
        where = f"{path}{k}"
        if k not in out:
            raise ConfigError(f"unknown configuration key '{where}'")
        if isinstance(out[k], dict) and out[k] and isinstance(v, dict):
            out[k] = _merge(out[k], v, where + ".")
        else:
            out[k] = v
    return out


def _leaf_paths(d: dict, prefix: str = "") -> list[str]:
    out = []
    for k, v in d.items():
        if isinstance(v, dict) and v:
            out.extend(_leaf_paths(v, f"{prefix}{k}."))
        else:
            out.append(f"{prefix}{k}")
    return out


def apply_overrides(cfg: dict, overrides: dict[str, str]) -> dict:
    """Apply ``dotted.key = value`` overrides; a bare leaf name is accepted when unambiguous."""
    cfg = copy.deepcopy(cfg)
    leaves = _leaf_paths(cfg)
    for key, raw in overrides.items():
        path = key
        if path not in leaves:
            matches = [p for p in leaves if p.split(".")[-1] == key]
            if len(matches) != 1:
                raise ConfigError(f"unknown override key '{key}'")
            path = matches[0]
        value = yaml.safe_load(raw) if isinstance(raw, str) else raw
        node = cfg
        parts = path.split(".")
        for p in parts[:-1]:
            node = node[p]
        node[parts[-1]] = value
    return cfg


def load_config(path, overrides: dict[str, str] | None = None) -> dict:
    """Read a scenario file, merge it over the defaults and apply overrides."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"{path}: cannot parse YAML{where}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return config_from_dict(raw, overrides)


def config_from_dict(raw: dict, overrides: dict[str, str] | None = None) -> dict:
    """Merge a (partial) configuration mapping over the defaults and apply overrides."""
    cfg = _merge(DEFAULTS, raw)
    if overrides:
        cfg = apply_overrides(cfg, overrides)
    return cfg


def bundled_scenario(name: str) -> Path:
    """Path of a scenario file shipped with the package (e.g. ``"scenario1_adaptive"``)."""
    p = resources.files("rfs_fusion") / "scenarios" / f"{name}.yaml"
    if not p.is_file():
        raise ConfigError(f"no bundled scenario named {name!r}")
    return Path(str(p))


def bundled_fixture(name: str) -> Path:
    """Path of a serialised density shipped with the package (e.g. ``"example1_sensor1"``)."""
    p = resources.files("rfs_fusion") / "fixtures" / f"{name}.json"
    if not p.is_file():
        raise FileNotFoundError(f"no bundled fixture named {name!r}")
    return Path(str(p))


def _require(cond: bool, msg: str):
    if not cond:
        raise ConfigError(msg)


def build_scenario(cfg: dict) -> Scenario:
    """Validate a merged configuration and instantiate the models."""
    region = tuple(tuple(map(float, b)) for b in cfg["region"])
    _require(len(region) == 2 and all(lo < hi for lo, hi in region), "region: need two (min, max) pairs")
    T = int(cfg["duration"])
    _require(T >= 1, "duration: must be at least 1")
    m = cfg["motion"]
    motion = MotionModel.constant_velocity(float(m["dt"]), float(m["sigma_v"]), float(m["p_S"]))
    s = cfg["sensor"]
    n = int(cfg["n_sensors"])
    _require(n >= 1, "n_sensors: must be at least 1")
    try:
        sensors = [SensorModel.position_sensor(float(s["sigma"]), float(s["p_D"]), float(s["clutter_rate"]), region) for _ in range(n)]
    except ValueError as exc:
        raise ConfigError(f"sensor: {exc}") from exc

    b = cfg["birth"]
    P_B = np.diag(np.asarray(b["covariance_diag"], dtype=float))
    prior = []
    for i, comp in enumerate(b["prior"] or []):
        try:
            cov = np.diag(comp["covariance_diag"]) if "covariance_diag" in comp else P_B
            prior.append((float(comp["r"]), GaussianMixture.single(np.asarray(comp["mean"], dtype=float), cov), int(comp.get("index", i + 1))))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"birth.prior[{i}]: {exc}") from exc
    try:
        times = None if b["times"] is None else tuple(int(t) for t in b["times"])
        birth = BirthModel(b["variant"], tuple(prior), float(b["expected_births"]), float(b["r_max"]), P_B, times)
    except ValueError as exc:
        raise ConfigError(f"birth: {exc}") from exc
    _require(birth.variant == "adaptive" or prior, "birth.prior: a prior birth model needs components")

    fp = FilterParams(**{k: type(getattr(FilterParams(), k))(v) for k, v in cfg["filter"].items()})
    fusion = dict(cfg["fusion"])
    _require(fusion["nodes"] in ("all", "report"), "fusion.nodes: must be 'all' or 'report'")

    topo = cfg["topology"]
    if topo == "line":
        edges = [(i, i + 1) for i in range(n - 1)]
    elif topo == "complete":
        edges = [(i, j) for i in range(n) for j in range(i + 1, n)]
    else:
        try:
            edges = [(int(a), int(b_)) for a, b_ in topo]
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"topology: expected 'line', 'complete' or a list of edges ({exc})") from exc
        _require(all(0 <= a < n and 0 <= b_ < n and a != b_ for a, b_ in edges), "topology: edge endpoint out of range")
    _require(_connected(n, edges), "topology: network must be connected")
    report = int(cfg["report_sensor"])
    _require(0 <= report < n, "report_sensor: out of range")

    est = tuple(cfg["estimators"])
    _require(all(e in ESTIMATORS for e in est) and est, f"estimators: choose from {ESTIMATORS}")
    _require(cfg["measurement_stream"] in ("independent", "shared"), "measurement_stream: 'independent' or 'shared'")

    tracks = []
    for i, t in enumerate(cfg["tracks"]):
        try:
            tr = TruthTrack(int(t["birth"]), None if t.get("death") is None else int(t["death"]), tuple(float(x) for x in t["state"]))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"tracks[{i}]: {exc}") from exc
        _require(len(tr.state) == 4, f"tracks[{i}].state: need [x, y, vx, vy]")
        _require(region[0][0] <= tr.state[0] <= region[0][1] and region[1][0] <= tr.state[1] <= region[1][1], f"tracks[{i}]: starts outside the region")
        tracks.append(tr)
    o = cfg["ospa"]
    return Scenario(
        name=str(cfg["name"]), region=region, duration=T, motion=motion, sensors=sensors, birth=birth,
        filter_params=fp, fusion=fusion, edges=edges, report_sensor=report, estimators=est, tracks=tracks,
        ospa=OspaParams(float(o["c"]), float(o["p"])), settle_steps=int(cfg["settle_steps"]),
        measurement_stream=cfg["measurement_stream"], truth_noise=bool(cfg["truth_noise"]),
        diagnostics=dict(cfg["diagnostics"]), config=cfg,
    )


def load_scenario(path, overrides: dict[str, str] | None = None) -> Scenario:
    return build_scenario(load_config(path, overrides))


def _connected(n: int, edges) -> bool:
    seen, todo = {0}, [0]
    while todo:
        a = todo.pop()
        for x, y in edges:
            for u, v in ((x, y), (y, x)):
                if u == a and v not in seen:
                    seen.add(v)
                    todo.append(v)
    return len(seen) == n


# ---------------------------------------------------------------------------
# truth and measurements


def generate_truth(sc: Scenario, seed: int = 0, run: int = 0) -> list[list[tuple[Label, np.ndarray]]]:
    """Trajectories of the scenario tracks; entry ``k-1`` lists the objects alive at step ``k``.

    Tracks follow their nominal constant-velocity path unless the scenario
    enables ``truth_noise``, in which case the motion model's process noise
    is added (seeded per run and track).
    """
    F, Q = sc.motion.F, sc.motion.Q
    out = [[] for _ in range(sc.duration)]
    for i, tr in enumerate(sc.tracks):
        rng = stream(seed, run, i, 0, "truth") if sc.truth_noise else None
        x = np.asarray(tr.state, dtype=float)
        for k in range(tr.birth, sc.duration + 1):
            if not tr.alive(k):
                break
            out[k - 1].append((Label(tr.birth, i + 1), x.copy()))
            x = F @ x
            if rng is not None:
                x = x + rng.multivariate_normal(np.zeros(len(x)), Q)
    return out


def stream(seed: int, run: int, sensor: int, step: int, purpose: str) -> np.random.Generator:
    """Independent generator for one (run, sensor, step, purpose) tuple."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(run, sensor, step, _PURPOSE[purpose])))


def generate_measurements(truth_states, sensor: SensorModel, rng: np.random.Generator,
                          clutter_rng: np.random.Generator | None = None,
                          order_rng: np.random.Generator | None = None) -> np.ndarray:
    """Detections (with probability p_D, Gaussian noise) plus uniform Poisson clutter, shuffled."""
    clutter_rng = clutter_rng or rng
    order_rng = order_rng or rng
    dz = sensor.H.shape[0]
    L = np.linalg.cholesky(sensor.R)
    dets = []
    for x in truth_states:
        hit = rng.random() < sensor.p_D
        noise = L @ rng.standard_normal(dz)
        if hit:
            dets.append(sensor.H @ np.asarray(x) + noise)
    n_c = clutter_rng.poisson(sensor.clutter_rate)
    lo = np.array([b[0] for b in sensor.region])
    hi = np.array([b[1] for b in sensor.region])
    clutter = lo + (hi - lo) * clutter_rng.random((n_c, dz))
    Z = np.vstack([np.reshape(dets, (-1, dz)), clutter])
    return Z[order_rng.permutation(len(Z))]


# ---------------------------------------------------------------------------
# one run


@dataclass
class RunRecord:
    """Per-step scores of one run.

    ``rows`` holds ``(step, sensor, estimator, card_true, card_est, ospa)``.
    """

    run: int
    seed: int
    rows: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)  # (step, DiagnosticsReport)


def _fuse_node(sc: Scenario, s: int, posts: list[LmbDensity], estimators) -> dict[str, LmbDensity]:
    group = [s] + sc.neighbours(s)
    out = {"local": posts[s]}
    if len(group) == 1:
        for e in ("r_gci", "classical_gci"):
            out[e] = posts[s]
        return out
    f = sc.fusion
    cfg = FusionConfig.uniform(
        len(group), max_hypotheses=int(f["max_hypotheses"]), weight_floor=float(f["weight_floor"]),
        eta_floor=float(f["eta_floor"]), prune=sc.filter_params.prune, merge=sc.filter_params.merge,
        max_components=sc.filter_params.max_components,
    )
    dens = [posts[g] for g in group]
    if "r_gci" in estimators:
        out["r_gci"] = glmb_to_lmb(r_gci_glmb_fuse(dens, cfg, home_sensor=0))
    if "classical_gci" in estimators:
        fused, acc = dens[0], 1.0
        for d in dens[1:]:
            acc += 1.0
            fused = classical_gci_lmb_fuse(fused, d, FusionConfig(weights=((acc - 1) / acc, 1 / acc)))
        out["classical_gci"] = fused
    return out


def run_network(sc: Scenario, seed: int, run: int = 0) -> RunRecord:
    """Play one Monte-Carlo run: filter locally, fuse at the nodes, score every estimator."""
    truth = generate_truth(sc, seed, run)
    filters = [LmbFilter(sc.motion, sensor, sc.birth, sc.filter_params) for sensor in sc.sensors]
    rec = RunRecord(run, seed)
    nodes = range(sc.n_sensors) if sc.fusion["nodes"] == "all" else [sc.report_sensor]
    for k in range(1, sc.duration + 1):
        states = [x for _, x in truth[k - 1]]
        posts = []
        for s, flt in enumerate(filters):
            src = 0 if sc.measurement_stream == "shared" else s
            Z = generate_measurements(
                states, sc.sensors[s], stream(seed, run, src, k, "detection"),
                stream(seed, run, src, k, "clutter"), stream(seed, run, src, k, "order"),
            )
            posts.append(flt.step(k, Z))
        for s in range(sc.n_sensors):
            fused = {"local": posts[s]}
            if s in nodes:
                try:
                    fused = _fuse_node(sc, s, posts, sc.estimators)
                except IncompatibleDensitiesError as exc:
                    rec.errors.append({"step": k, "sensor": s, "error": str(exc), "payload": exc.payload})
            ests = sc.estimators if s in nodes else [e for e in sc.estimators if e == "local"]
            for est in ests:
                if est not in fused:
                    card, dist = math.nan, math.nan
                else:
                    X = [x for _, x in extract_estimates(fused[est], sc.filter_params.extraction_threshold)]
                    card, dist = len(X), ospa_distance(X, states, sc.ospa)
                rec.rows.append((k, s, est, len(states), card, dist))
        if sc.diagnostics.get("enabled"):
            try:
                rec.diagnostics.append((k, node_diagnostics(sc, posts)))
            except (ValueError, MemoryError) as exc:
                rec.errors.append({"step": k, "sensor": sc.report_sensor, "error": f"diagnostics: {exc}"})
    return rec


def node_diagnostics(sc: Scenario, posts: list[LmbDensity]) -> DiagnosticsReport:
    """Label-consistency diagnostics of the report node and its neighbours.

    The posteriors are converted to GLMB form, discretised on the first state
    coordinate and compared with uniform fusion weights.
    """
    opts = sc.diagnostics
    group = [sc.report_sensor] + sc.neighbours(sc.report_sensor)
    glmbs = [lmb_to_glmb(posts[g], prune_threshold=float(opts["prune"])) for g in group]
    space = DiscreteSpace.covering(glmbs, axes=(0,), n_cells=int(opts["n_cells"]), max_cardinality=int(opts["max_cardinality"]))
    w = 1.0 / len(group)
    return label_inconsistency_indicator([(discretize(g, space), w) for g in glmbs])


# ---------------------------------------------------------------------------
# Monte Carlo


def transient_steps(sc: Scenario) -> set[int]:
    """Steps within ``settle_steps`` after any birth or death (inclusive of the event step)."""
    events = set()
    for tr in sc.tracks:
        events.add(tr.birth)
        if tr.death is not None:
            events.add(tr.death)
    out = set()
    for e in events:
        out.update(range(e, e + sc.settle_steps + 1))
    return {k for k in out if 1 <= k <= sc.duration}


def post_transient_window(sc: Scenario) -> list[int]:
    bad = transient_steps(sc)
    return [k for k in range(1, sc.duration + 1) if k not in bad]


@dataclass
class MonteCarloResult:
    scenario: Scenario
    base_seed: int
    records: list

    def table(self) -> dict:
        """``(estimator, sensor) -> {"card_true", "card_est", "ospa"}`` arrays of shape (runs, T)."""
        runs, T = len(self.records), self.scenario.duration
        out: dict = {}
        for r_i, rec in enumerate(self.records):
            for step, s, est, ct, ce, o in rec.rows:
                slot = out.setdefault((est, s), {
                    "card_true": np.full((runs, T), np.nan),
                    "card_est": np.full((runs, T), np.nan),
                    "ospa": np.full((runs, T), np.nan),
                })
                slot["card_true"][r_i, step - 1] = ct
                slot["card_est"][r_i, step - 1] = ce
                slot["ospa"][r_i, step - 1] = o
        return out

    def aggregate(self) -> list[tuple]:
        """Rows ``(estimator, sensor, step, card_true, card_mean, card_std, ospa_mean, ospa_std)``."""
        rows = []
        for (est, s), t in sorted(self.table().items()):
            for k in range(self.scenario.duration):
                rows.append((est, s, k + 1, float(np.nanmean(t["card_true"][:, k])),
                             float(np.nanmean(t["card_est"][:, k])), float(np.nanstd(t["card_est"][:, k])),
                             float(np.nanmean(t["ospa"][:, k])), float(np.nanstd(t["ospa"][:, k]))))
        return rows

    def mean_ospa(self, estimator: str, sensor: int | None = None, steps=None) -> float:
        """OSPA averaged over runs and the given steps (default: the post-transient window)."""
        sensor = self.scenario.report_sensor if sensor is None else sensor
        steps = post_transient_window(self.scenario) if steps is None else list(steps)
        if not steps:
            return math.nan
        t = self.table()[(estimator, sensor)]
        return float(np.nanmean(t["ospa"][:, np.asarray(steps, dtype=int) - 1]))

    def cardinality_mae(self, estimator: str, sensor: int | None = None, steps=None) -> float:
        sensor = self.scenario.report_sensor if sensor is None else sensor
        steps = range(1, self.scenario.duration + 1) if steps is None else steps
        idx = np.asarray(list(steps), dtype=int) - 1
        if not idx.size:
            return math.nan
        t = self.table()[(estimator, sensor)]
        return float(np.nanmean(np.abs(t["card_est"][:, idx] - t["card_true"][:, idx])))

    def summary(self) -> dict:
        out = {}
        for (est, s) in sorted(self.table()):
            out[f"{est}/sensor{s}"] = {
                "post_transient_ospa": self.mean_ospa(est, s),
                "cardinality_mae": self.cardinality_mae(est, s),
            }
        return out

    def errors(self) -> list:
        return [dict(run=r.run, **e) for r in self.records for e in r.errors]


def _run_one(args):
    cfg, seed, run = args
    return run_network(build_scenario(cfg), seed, run)


def monte_carlo(sc: Scenario, runs: int, base_seed: int, jobs: int = 1) -> MonteCarloResult:
    """Run ``runs`` independent replications; the result does not depend on ``jobs``."""
    if runs < 1:
        raise ValueError("runs must be at least 1")
    if jobs <= 1:
        records = [run_network(sc, base_seed, r) for r in range(runs)]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_one, [(sc.config, base_seed, r) for r in range(runs)]))
    records.sort(key=lambda rec: rec.run)
    return MonteCarloResult(sc, base_seed, records)


# ---------------------------------------------------------------------------
# output


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return f"{x:.9g}"


def write_outputs(result: MonteCarloResult, outdir, overrides: dict | None = None) -> list[Path]:
    """One CSV per estimator, an aggregate CSV and a metadata JSON."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    sc = result.scenario
    written = []
    for est in sc.estimators:
        path = outdir / f"{est}.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["run", "step", "sensor", "card_true", "card_est", "ospa"])
            for rec in result.records:
                for step, s, e, ct, ce, o in rec.rows:
                    if e == est:
                        w.writerow([rec.run, step, s, _fmt(ct), _fmt(ce), _fmt(o)])
        written.append(path)
    path = outdir / "aggregate.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["estimator", "sensor", "step", "card_true", "card_mean", "card_std", "ospa_mean", "ospa_std"])
        for row in result.aggregate():
            w.writerow([row[0], row[1], row[2]] + [_fmt(x) for x in row[3:]])
    written.append(path)
    meta = {
        "scenario": sc.name,
        "seed": result.base_seed,
        "runs": len(result.records),
        "config_hash": sc.config_hash(),
        "config": sc.config,
        "overrides": dict(overrides or {}),
        "report_sensor": sc.report_sensor,
        "transient_steps": sorted(transient_steps(sc)),
        "post_transient_window": post_transient_window(sc),
        "summary": result.summary(),
        "errors": result.errors(),
    }
    diag = [(rec.run, k, rep) for rec in result.records for k, rep in rec.diagnostics]
    if diag:
        path = outdir / "diagnostics.csv"
        with path.open("w") as fh:
            fh.write("run," + DiagnosticsReport.csv_header())
            for run, k, rep in diag:
                fh.write(f"{run}," + rep.csv_row(k))
        written.append(path)
    path = outdir / "metadata.json"
    path.write_text(json.dumps(meta, indent=2, sort_keys=True, default=_json_default))
    written.append(path)
    return written


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    return str(o)


# ---------------------------------------------------------------------------
# birth-time ambiguity fixture

EXAMPLE1_PRUNE = 1e-6


def example1_posteriors(k_final: int = 10, seed: int = 2024):
    """Two LMB posteriors of one object whose birth time the sensors disagree on.

    Both sensors run the bundled ``example1`` models (births offered at steps
    4, 5 and 6 around the origin; the object is born at step 5).  The
    measurements are scripted: sensor 1 receives a far-off return at step 5
    and first detects the object at step 6, while sensor 2 receives a false
    alarm next to the origin at step 4.  A few fixed clutter points far from
    the track are added to every scan.

    Returns
    -------
    list of LmbDensity
        The two posteriors after step ``k_final``.
    """
    sc = load_scenario(bundled_scenario("example1"))
    truth = generate_truth(sc)
    rng = np.random.default_rng(seed)
    clutter = np.array([[-600.0, 400.0], [500.0, -450.0], [700.0, 300.0]])
    filters = [LmbFilter(sc.motion, sensor, sc.birth, sc.filter_params) for sensor in sc.sensors]
    out = []
    for s, flt in enumerate(filters):
        for k in range(1, k_final + 1):
            Z = [z for z in clutter]
            for _, x in truth[k - 1]:
                z = sc.sensors[s].H @ x + 2.0 * rng.standard_normal(2)
                if s == 0 and k == 5:
                    z = z + np.array([120.0, -90.0])
                Z.append(z)
            if s == 1 and k == 4:
                Z.append(np.array([-4.0, -6.0]))
            flt.step(k, np.array(Z))
        out.append(flt.posterior)
    return out


def example1_fixture(k_final: int = 10):
    """The pruned GLMB forms of :func:`example1_posteriors` (hypotheses below 1e-6 dropped)."""
    return [lmb_to_glmb(p, prune_threshold=EXAMPLE1_PRUNE) for p in example1_posteriors(k_final)]
