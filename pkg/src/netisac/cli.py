"""Scenario ingestion, single solves, parameter sweeps and CSV emission.

Scenario documents are YAML with four blocks: `scene` (positions in meters),
`channel` (exactly one of `generate` — ChannelConfig fields — or `explicit` —
verbatim matrices), `spec` (gamma_db scalar or per-user list, tau_m2) and an
optional `solver` block overriding SolverConfig fields. Units are embedded in
field names so a value can never be mistaken for the wrong scale.

Exit codes: 0 success, 2 infeasible, 3 numerical failure, 4 schema error.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import yaml

from .channel import ChannelConfig, ChannelSchemaError, CommChannels, RadarChannels, load_channels
from .geometry import DegenerateSceneError, Point2D, Scene
from .metrics import ProblemSpec
from .solvers import (
    Outcome,
    PowerControlInstance,
    SolveFailure,
    SolveResult,
    SolverConfig,
    brute_force_oracle,
    check_feasibility,
    solve_crlb_approx,
    solve_sdr,
    solve_separate,
)

log = logging.getLogger("netisac")

EXIT_SUCCESS = 0
EXIT_INFEASIBLE = 2
EXIT_NUMERICAL = 3
EXIT_SCHEMA = 4

CSV_COLUMNS = (
    "sweep_value", "method", "trial_seed", "total_power_w", "total_power_dbm",
    "min_sinr_margin_db", "crlb_m2", "status", "solve_ms",
)

SWEEP_PARAMETERS = ("sinr_db", "target_x", "crlb_ceiling")


class ScenarioError(ValueError):
    """Scenario document violates the schema; message names the field."""


@dataclass(frozen=True)
class Scenario:
    """A fully parsed scenario document."""

    scene: Scene
    channel_cfg: ChannelConfig | None           # generation path
    explicit: tuple[CommChannels, RadarChannels] | None  # verbatim path
    spec: ProblemSpec
    solver: SolverConfig

    def instance(self, *, target_x: float | None = None,
                 gamma_db: float | None = None,
                 crlb_ceiling: float | None = None,
                 seed: int | None = None) -> PowerControlInstance:
        """Instance with optional sweep overrides applied."""
        scene = self.scene
        if target_x is not None:
            scene = replace(scene, target=Point2D(float(target_x), scene.target.y))
        spec = self.spec
        if gamma_db is not None:
            gamma = 10.0 ** (float(gamma_db) / 10.0)
            spec = replace(spec, sinr_thresholds=np.full(
                scene.num_transmitters, gamma))
        if crlb_ceiling is not None:
            spec = replace(spec, crlb_ceiling=float(crlb_ceiling))
        if self.explicit is not None:
            if target_x is not None or seed is not None:
                raise ScenarioError(
                    "explicit channels cannot be reseeded or re-targeted; "
                    "use a generated channel block for sweeps over target_x "
                    "or fading trials")
            comm, radar = self.explicit
            return PowerControlInstance.from_channels(scene, comm, radar, spec)
        cfg = self.channel_cfg
        if seed is not None:
            cfg = replace(cfg, seed=int(seed))
        return PowerControlInstance.from_scene(scene, cfg, spec)


@dataclass(frozen=True)
class SweepPlan:
    parameter: str                 # one of SWEEP_PARAMETERS
    start: float
    stop: float
    step: float
    methods: tuple[str, ...]
    trials: int = 20
    base_seed: int = 0

    def __post_init__(self):
        if self.parameter not in SWEEP_PARAMETERS:
            raise ScenarioError(
                f"sweep parameter must be one of {SWEEP_PARAMETERS}, "
                f"got {self.parameter!r}")
        if self.step <= 0:
            raise ScenarioError("sweep step must be positive")
        if self.stop < self.start:
            raise ScenarioError("sweep stop must be >= start")
        if not self.methods:
            raise ScenarioError("sweep needs at least one method")
        unknown = set(self.methods) - set(_METHODS)
        if unknown:
            raise ScenarioError(f"unknown methods: {sorted(unknown)}")
        if self.trials < 1:
            raise ScenarioError("trials must be >= 1")

    @property
    def values(self) -> np.ndarray:
        count = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return self.start + self.step * np.arange(count)


def _dispatch_sdr(inst: PowerControlInstance, cfg: SolverConfig) -> SolveResult:
    return solve_sdr(inst, cfg)


def _dispatch_crlb_approx(inst: PowerControlInstance, cfg: SolverConfig) -> SolveResult:
    return solve_crlb_approx(inst, cfg)


def _dispatch_separate(inst: PowerControlInstance, cfg: SolverConfig) -> SolveResult:
    return solve_separate(inst)


def _dispatch_oracle(inst: PowerControlInstance, cfg: SolverConfig) -> SolveResult:
    return brute_force_oracle(inst, cfg)


_METHODS = {
    "sdr": _dispatch_sdr,
    "crlb-approx": _dispatch_crlb_approx,
    "separate": _dispatch_separate,
    "oracle": _dispatch_oracle,
}


# ---------------------------------------------------------------------------
# Document parsing
# ---------------------------------------------------------------------------

def _require(block: dict, field: str, context: str):
    if not isinstance(block, dict) or field not in block:
        raise ScenarioError(f"missing field {context}.{field}")
    return block[field]


def _parse_points(raw, context: str) -> tuple[Point2D, ...]:
    try:
        points = tuple(Point2D(float(x), float(y)) for x, y in raw)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{context} must be a list of [x, y] pairs: {exc}") from exc
    if not points:
        raise ScenarioError(f"{context} must not be empty")
    return points


def parse_scenario(document: dict) -> Scenario:
    """Validate a scenario document tree and build typed objects from it."""
    if not isinstance(document, dict):
        raise ScenarioError("scenario document must be a mapping")
    scene_doc = _require(document, "scene", "scenario")
    try:
        scene = Scene(
            transmitters=_parse_points(
                _require(scene_doc, "transmitters", "scene"), "scene.transmitters"),
            sensing_receivers=_parse_points(
                _require(scene_doc, "sensing_receivers", "scene"),
                "scene.sensing_receivers"),
            cu_receivers=_parse_points(
                _require(scene_doc, "cu_receivers", "scene"), "scene.cu_receivers"),
            target=Point2D(*map(float, _require(scene_doc, "target", "scene"))),
        )
    except (TypeError, ValueError, DegenerateSceneError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"invalid scene block: {exc}") from exc

    channel_doc = _require(document, "channel", "scenario")
    has_generate = isinstance(channel_doc, dict) and "generate" in channel_doc
    has_explicit = isinstance(channel_doc, dict) and "explicit" in channel_doc
    if has_generate == has_explicit:
        raise ScenarioError(
            "channel block must contain exactly one of 'generate' or 'explicit'")
    channel_cfg = None
    explicit = None
    if has_generate:
        gen = channel_doc["generate"] or {}
        known = set(ChannelConfig.__dataclass_fields__)
        unknown = set(gen) - known
        if unknown:
            raise ScenarioError(f"unknown channel.generate fields: {sorted(unknown)}")
        try:
            channel_cfg = ChannelConfig(**gen)
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"invalid channel.generate block: {exc}") from exc
    else:
        try:
            explicit = load_channels(channel_doc["explicit"], scene)
        except ChannelSchemaError as exc:
            raise ScenarioError(f"invalid channel.explicit block: {exc}") from exc

    spec_doc = _require(document, "spec", "scenario")
    gamma_db = np.atleast_1d(np.asarray(
        _require(spec_doc, "gamma_db", "spec"), dtype=float))
    if gamma_db.size == 1:
        gamma_db = np.full(scene.num_transmitters, gamma_db[0])
    if gamma_db.shape != (scene.num_transmitters,):
        raise ScenarioError(
            f"spec.gamma_db must be a scalar or one value per user "
            f"(M={scene.num_transmitters}), got shape {gamma_db.shape}")
    tau = float(_require(spec_doc, "tau_m2", "spec"))
    try:
        spec = ProblemSpec(sinr_thresholds=10.0 ** (gamma_db / 10.0),
                           crlb_ceiling=tau)
    except ValueError as exc:
        raise ScenarioError(f"invalid spec block: {exc}") from exc

    solver_doc = document.get("solver") or {}
    known = set(SolverConfig.__dataclass_fields__)
    unknown = set(solver_doc) - known
    if unknown:
        raise ScenarioError(f"unknown solver fields: {sorted(unknown)}")
    try:
        solver = SolverConfig(**solver_doc)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"invalid solver block: {exc}") from exc

    return Scenario(scene=scene, channel_cfg=channel_cfg, explicit=explicit,
                    spec=spec, solver=solver)


def load_scenario(path: str | Path) -> Scenario:
    try:
        document = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ScenarioError(f"cannot parse {path}: {exc}") from exc
    return parse_scenario(document)


# ---------------------------------------------------------------------------
# Single solve
# ---------------------------------------------------------------------------

def _watts_to_dbm(watts: float) -> float:
    return 10.0 * math.log10(watts) + 30.0


def _exit_code(outcome: Outcome) -> int:
    if outcome is Outcome.SUCCESS:
        return EXIT_SUCCESS
    if outcome is Outcome.NUMERICAL_FAILURE:
        return EXIT_NUMERICAL
    # All remaining outcomes mean no feasible point was produced.
    return EXIT_INFEASIBLE


def run_solve(scenario: Scenario, method: str) -> tuple[SolveResult, str, int]:
    """Solve one scenario; returns (result, human-readable report, exit code)."""
    if method not in _METHODS:
        raise ScenarioError(f"unknown method {method!r}")
    inst = scenario.instance()
    try:
        result = _METHODS[method](inst, scenario.solver)
    except SolveFailure as exc:
        result = SolveResult(method=method, outcome=exc.outcome,
                             diagnostics={"error": str(exc)})
    lines = [f"method: {method}", f"status: {result.outcome.value}"]
    if result.ok:
        gamma_db = 10.0 * np.log10(inst.spec.sinr_thresholds)
        sinr_db = 10.0 * np.log10(result.achieved_sinrs)
        lines += [
            f"total power: {result.total_power:.6g} W "
            f"({_watts_to_dbm(result.total_power):.3f} dBm)",
            "per-transmitter power [W]: "
            + ", ".join(f"{p:.6g}" for p in result.power),
            "per-user SINR [dB]: "
            + ", ".join(f"{s:.3f} (floor {g:.3f})"
                        for s, g in zip(sinr_db, gamma_db)),
            f"CRLB: {result.achieved_crlb:.6g} m^2 "
            f"(ceiling {inst.spec.crlb_ceiling:.6g})",
        ]
    if result.diagnostics:
        lines.append("diagnostics: " + ", ".join(
            f"{k}={v}" for k, v in sorted(result.diagnostics.items())))
    return result, "\n".join(lines), _exit_code(result.outcome)


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

def _fmt(value: float) -> str:
    return format(float(value), ".10g")


def _trial_seed(base_seed: int, point_idx: int, trial: int) -> int:
    seq = np.random.SeedSequence([base_seed, point_idx, trial])
    return int(seq.generate_state(1, np.uint64)[0])


def _sweep_task(args) -> tuple:
    """One (sweep point, method, trial) cell; top-level for process pools."""
    document, parameter, value, method, seed, solver_overrides, timings = args
    scenario = parse_scenario(document)
    if solver_overrides:
        scenario = replace(scenario,
                           solver=replace(scenario.solver, **solver_overrides))
    overrides = {
        "sinr_db": {"gamma_db": value},
        "target_x": {"target_x": value},
        "crlb_ceiling": {"crlb_ceiling": value},
    }[parameter]
    import time
    t0 = time.perf_counter()
    try:
        inst = scenario.instance(seed=seed, **overrides)
        result = _METHODS[method](inst, scenario.solver)
    except SolveFailure as exc:
        result = SolveResult(method=method, outcome=exc.outcome)
    except (DegenerateSceneError, ValueError):
        result = SolveResult(method=method, outcome=Outcome.NUMERICAL_FAILURE)
    elapsed_ms = (time.perf_counter() - t0) * 1e3 if timings else 0.0
    if not result.ok:
        return (result.outcome.value, None, None, None, elapsed_ms)
    gamma = np.broadcast_to(inst.spec.sinr_thresholds, result.achieved_sinrs.shape)
    margin_db = float(10.0 * np.log10(np.min(result.achieved_sinrs / gamma)))
    return (result.outcome.value, result.total_power, margin_db,
            result.achieved_crlb, elapsed_ms, tuple(result.power))


def run_sweep(document: dict, plan: SweepPlan, *, parallel: bool = False,
              timings: bool = False, workers: int | None = None
              ) -> tuple[str, list]:
    """Run the sweep; returns (csv text, list of selected power vectors).

    Rows appear in deterministic (sweep_value, method, trial) order followed
    by per-(value, method) mean/std summary rows, so equal inputs produce
    byte-identical CSV. solve_ms is 0.0 unless timings are requested, which
    keeps the default output reproducible.
    """
    parse_scenario(document)  # fail fast on schema errors
    values = plan.values
    tasks = []
    keys = []
    for point_idx, value in enumerate(values):
        for method in plan.methods:
            for trial in range(plan.trials):
                seed = _trial_seed(plan.base_seed, point_idx, trial)
                tasks.append((document, plan.parameter, float(value), method,
                              seed, {}, timings))
                keys.append((float(value), method, seed))
    if parallel:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_sweep_task, tasks, chunksize=4))
    else:
        outcomes = [_sweep_task(task) for task in tasks]

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    powers = []
    cells = {}
    for (value, method, seed), outcome in zip(keys, outcomes):
        status, total, margin_db, crlb, elapsed_ms = outcome[:5]
        if total is not None:
            powers.append(np.asarray(outcome[5]))
        writer.writerow([
            _fmt(value), method, str(seed),
            "" if total is None else _fmt(total),
            "" if total is None else _fmt(_watts_to_dbm(total)),
            "" if margin_db is None else _fmt(margin_db),
            "" if crlb is None else _fmt(crlb),
            status, _fmt(elapsed_ms),
        ])
        cells.setdefault((value, method), []).append(outcome)
    for value in values:
        for method in plan.methods:
            rows = cells[(float(value), method)]
            ok = [r for r in rows if r[1] is not None]
            for stat, fn in (("mean", np.mean), ("std", np.std)):
                writer.writerow([
                    _fmt(value), method, stat,
                    _fmt(fn([r[1] for r in ok])) if ok else "",
                    _fmt(fn([_watts_to_dbm(r[1]) for r in ok])) if ok else "",
                    _fmt(fn([r[2] for r in ok])) if ok else "",
                    _fmt(fn([r[3] for r in ok])) if ok else "",
                    "summary", _fmt(fn([r[4] for r in rows])),
                ])
    return buffer.getvalue(), powers


# ---------------------------------------------------------------------------
# Templates
# ---------------------------------------------------------------------------

TWO_TX_TEMPLATE = """\
# Two-transmitter scenario: each transmitter serves one communication user
# while two dedicated receivers collect target echoes.
scene:
  transmitters: [[-50.0, 0.0], [0.0, 50.0]]
  cu_receivers: [[-20.0, 0.0], [20.0, 0.0]]
  sensing_receivers: [[-50.0, -10.0], [50.0, 10.0]]
  target: [30.0, 0.0]
channel:
  generate:
    carrier_frequency_hz: 6.0e+9
    bandwidth_hz: 1.0e+6
    rician_k_db: 5.0
    noise_psd_dbm_hz: -174.0
    seed: 0
spec:
  gamma_db: 10.0
  tau_m2: 0.05
solver: {}
"""

THREE_TX_TEMPLATE = """\
# Three-transmitter scenario with two shared sensing receivers.
scene:
  transmitters: [[-100.0, 0.0], [100.0, 0.0], [0.0, 100.0]]
  cu_receivers: [[-80.0, 20.0], [80.0, 20.0], [0.0, 80.0]]
  sensing_receivers: [[-100.0, 50.0], [100.0, 50.0]]
  target: [0.0, 50.0]
channel:
  generate:
    carrier_frequency_hz: 6.0e+9
    bandwidth_hz: 1.0e+6
    rician_k_db: 5.0
    noise_psd_dbm_hz: -174.0
    seed: 0
spec:
  gamma_db: 10.0
  tau_m2: 0.05
solver: {}
"""

TEMPLATES = {"two_tx.yaml": TWO_TX_TEMPLATE, "three_tx.yaml": THREE_TX_TEMPLATE}


def emit_scenario_templates(directory: str | Path) -> list[Path]:
    """Write the built-in scenario files; re-emission is byte-identical."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name, content in TEMPLATES.items():
        path = directory / name
        path.write_text(content)
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# Command line
# ---------------------------------------------------------------------------

def _add_solver_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--randomization-count", type=int)
    parser.add_argument("--step-size", type=float)
    parser.add_argument("--refine-epsilon", type=float)
    parser.add_argument("--rng-seed", type=int)
    parser.add_argument("--oracle-grid-points", type=int)
    parser.add_argument("--oracle-power-cap", type=float)


def _solver_overrides(args) -> dict:
    fields = ("randomization_count", "step_size", "refine_epsilon",
              "rng_seed", "oracle_grid_points", "oracle_power_cap")
    return {f: getattr(args, f) for f in fields if getattr(args, f) is not None}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="netisac",
        description="Coordinated transmit power control for networked "
                    "sensing-and-communication systems")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve one scenario")
    p_solve.add_argument("scenario", help="scenario YAML file")
    p_solve.add_argument("--method", default="sdr", choices=sorted(_METHODS))
    _add_solver_flags(p_solve)

    p_sweep = sub.add_parser("sweep", help="sweep a parameter, emit CSV")
    p_sweep.add_argument("scenario")
    p_sweep.add_argument("--parameter", default="sinr_db",
                         choices=SWEEP_PARAMETERS)
    p_sweep.add_argument("--start", type=float, required=True)
    p_sweep.add_argument("--stop", type=float, required=True)
    p_sweep.add_argument("--step", type=float, required=True)
    p_sweep.add_argument("--methods", default="sdr,crlb-approx,separate",
                         help="comma-separated subset of "
                              + ",".join(sorted(_METHODS)))
    p_sweep.add_argument("--trials", type=int, default=20,
                         help="fading realizations per sweep point")
    p_sweep.add_argument("--base-seed", type=int, default=0)
    p_sweep.add_argument("--output", default="-", help="CSV path, - for stdout")
    p_sweep.add_argument("--parallel", action="store_true")
    p_sweep.add_argument("--workers", type=int)
    p_sweep.add_argument("--timings", action="store_true",
                         help="record wall-clock solve_ms (breaks byte-level "
                              "reproducibility of the CSV)")
    _add_solver_flags(p_sweep)

    p_feas = sub.add_parser("feasibility",
                            help="check whether the scenario admits any "
                                 "feasible power vector")
    p_feas.add_argument("scenario")

    p_tmpl = sub.add_parser("templates", help="write built-in scenario files")
    p_tmpl.add_argument("--output-dir", default=".")
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "templates":
            for path in emit_scenario_templates(args.output_dir):
                log.info("wrote %s", path)
            return EXIT_SUCCESS

        scenario = load_scenario(args.scenario)
        if args.command == "feasibility":
            inst = scenario.instance()
            feasible = check_feasibility(inst.sinr_system()).feasible
            print("feasible" if feasible else "infeasible")
            return EXIT_SUCCESS if feasible else EXIT_INFEASIBLE

        overrides = _solver_overrides(args)
        if overrides:
            scenario = replace(scenario,
                               solver=replace(scenario.solver, **overrides))
        log.info("resolved solver config: %s", scenario.solver)

        if args.command == "solve":
            log.info("spec: gamma=%s (linear), tau=%g m^2",
                     scenario.spec.sinr_thresholds, scenario.spec.crlb_ceiling)
            _, report, code = run_solve(scenario, args.method)
            print(report)
            return code

        # sweep
        document = yaml.safe_load(Path(args.scenario).read_text())
        plan = SweepPlan(
            parameter=args.parameter, start=args.start, stop=args.stop,
            step=args.step, methods=tuple(args.methods.split(",")),
            trials=args.trials, base_seed=args.base_seed)
        if overrides:
            document = dict(document)
            document["solver"] = {**(document.get("solver") or {}), **overrides}
        log.info("sweep plan: %s", plan)
        csv_text, _ = run_sweep(document, plan, parallel=args.parallel,
                                timings=args.timings, workers=args.workers)
        if args.output == "-":
            sys.stdout.write(csv_text)
        else:
            Path(args.output).write_text(csv_text)
            log.info("wrote %s", args.output)
        return EXIT_SUCCESS
    except ScenarioError as exc:
        log.error("schema error: %s", exc)
        return EXIT_SCHEMA
    except FileNotFoundError as exc:
        log.error("%s", exc)
        return EXIT_SCHEMA


if __name__ == "__main__":
    raise SystemExit(main())
