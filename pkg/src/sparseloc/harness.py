"""Scenario assembly and the deterministic Monte Carlo experiment runner.

Every random draw in a trial flows from one seed sequence derived as
``SeedSequence(base_seed, spawn_key=(trial_index,))``, consumed in a fixed
order (fault agents, fault errors, estimate perturbations in ascending
agent order, measurement noise).  Identical scenario plus seed therefore
reproduces byte-identical CSV output, trial by trial, regardless of how
trials are scheduled across processes.
"""
from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np
from scipy.spatial.distance import pdist

from .network import (
    BlockVector,
    Configuration,
    SensorGraph,
    load_network,
)
from .measurement import (
    FAULT_MODES,
    MEASUREMENT_KINDS,
    add_noise,
    inject_faults,
    measurement_map,
    perturb_positions,
)
from .rigidity import distance_rigidity_matrix, rigidity_matrix, rigidity_report
from .solver import ScpParams, as_shrink, default_support_threshold, scp_recover

SCHEMA_VERSION = 1

SWEEP_AXES = ("fault_count", "fault_mode", "noise_grid", "scp_iterations")

# Slack reduction ratios tuned per integer noise radius; ingested through
# as_shrink, so the stored factors live in (0, 1].
SHRINK_REDUCTIONS = {0: 3.0, 1: 2.0, 2: 1.5, 3: 1.5, 4: 1.3, 5: 1.2}

_NETWORK_ATTEMPTS = 200


def shrink_for_noise(noise_radius: float) -> float:
    """Tuned shrink factor for an integer noise radius in 0..5."""
    if float(noise_radius).is_integer() and int(noise_radius) in SHRINK_REDUCTIONS:
        return as_shrink(SHRINK_REDUCTIONS[int(noise_radius)])
    raise ValueError(
        f"no tuned shrink factor for noise radius {noise_radius}; "
        f"known radii: {sorted(SHRINK_REDUCTIONS)}"
    )


@dataclass(frozen=True)
class ScenarioConfig:
    """Complete description of one repeatable experiment.

    ``network`` selects the source: ``{"preset": "uav13", "seed": s}``,
    ``{"agents", "dim", "radius", "box", "seed"}`` for rejection-sampled
    geometric networks, or ``{"path": "net.json"}``.  Solver fields mirror
    :class:`ScpParams`; ``initial_slack`` should cover the expected total
    fault mass (unit-cube faults contribute up to one each).

    A fault whose residual starts inside the slack ball makes the first
    step zero, which trips a positive ``step_tolerance`` before the
    reductions can tighten past it; sweeps over small fault counts should
    set ``step_tolerance=0.0`` and pin ``max_iterations`` to the wanted
    depth instead.
    """

    network: dict = field(default_factory=lambda: {"preset": "uav13", "seed": 0})
    kind: str = "distance"
    fault_count: int = 4
    fault_mode: str = "uncorrelated"
    centered_faults: bool = False
    fault_cube_side: float = 1.0
    noise_radius: float = 0.0
    estimate_perturbation: float = 0.0
    initial_slack: float = 4.0
    shrink: float = 1.0 / 3.0
    step_tolerance: float = 1e-6
    max_iterations: int = 20
    support_threshold: float | None = None
    inner_tolerance: float = 1e-6
    inner_max_iterations: int = 100_000
    relaxation: float = 1.7
    trials: int = 250
    base_seed: int = 0
    regenerate_network: bool = False

    def __post_init__(self) -> None:
        if self.kind not in MEASUREMENT_KINDS:
            raise ValueError(f"kind must be one of {MEASUREMENT_KINDS}")
        if self.fault_mode not in FAULT_MODES:
            raise ValueError(f"fault_mode must be one of {FAULT_MODES}")
        if self.fault_count < 0:
            raise ValueError("fault_count must be non-negative")
        if self.noise_radius < 0 or self.estimate_perturbation < 0:
            raise ValueError("noise radii must be non-negative")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        object.__setattr__(self, "network", dict(self.network))
        object.__setattr__(self, "shrink", as_shrink(self.shrink))

    def scp_params(self) -> ScpParams:
        return ScpParams(
            max_iterations=self.max_iterations,
            initial_slack=self.initial_slack,
            shrink=self.shrink,
            step_tolerance=self.step_tolerance,
            inner_tolerance=self.inner_tolerance,
            inner_max_iterations=self.inner_max_iterations,
            relaxation=self.relaxation,
            support_threshold=self.support_threshold,
        )

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, payload: dict) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise ValueError(f"unknown scenario fields: {sorted(unknown)}")
        return cls(**payload)

    @classmethod
    def from_file(cls, path) -> "ScenarioConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))

    def to_file(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")


@dataclass
class TrialRecord:
    index: int
    derived_seed: str
    true_set: tuple[int, ...]
    identified_set: tuple[int, ...]
    relative_error: float
    iterations: int
    status: str
    wall_time: float = field(default=0.0, compare=False)

    @property
    def identified(self) -> bool:
        return self.identified_set == self.true_set


def uav13_network(seed: int = 0) -> tuple[Configuration, SensorGraph]:
    """13 agents in a 10-unit 3D box joined by a 36-edge proximity graph.

    The connection radius is placed between the 36th and 37th smallest
    pairwise distance, and draws are rejected until the distance Jacobian
    reaches maximal rank (33), so every accepted network has the same agent
    and edge counts and is infinitesimally rigid.
    """
    for attempt in range(_NETWORK_ATTEMPTS):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(attempt,)))
        pos = rng.uniform(0.0, 10.0, size=(13, 3))
        dists = np.sort(pdist(pos))
        radius = 0.5 * (dists[35] + dists[36])
        cfg = Configuration(3, pos)
        edges = []
        for i in range(13):
            for j in range(i + 1, 13):
                if np.linalg.norm(pos[i] - pos[j]) <= radius:
                    edges.append((i, j))
        graph = SensorGraph(13, tuple(edges))
        if graph.num_edges != 36:
            continue
        if rigidity_report(distance_rigidity_matrix(cfg, graph)).is_rigid:
            return cfg, graph
    raise RuntimeError(f"no rigid 13-agent draw within {_NETWORK_ATTEMPTS} attempts")


def build_network(
    source: dict, kind: str, trial_index: int | None = None
) -> tuple[Configuration, SensorGraph]:
    """Materialize a network source; generated draws reject until rigid.

    ``trial_index`` shifts the rejection stream so per-trial regeneration
    stays decoupled from the fixed-network stream.
    """
    source = dict(source)
    if "path" in source:
        return load_network(source["path"])
    if source.get("preset") == "uav13":
        seed = int(source.get("seed", 0))
        if trial_index is None:
            return uav13_network(seed)
        return _uav13_indexed(seed, trial_index)
    if "preset" in source:
        raise ValueError(f"unknown preset {source['preset']!r}")
    agents = int(source["agents"])
    dim = int(source["dim"])
    radius = float(source["radius"])
    box = float(source.get("box", 1.0))
    seed = int(source.get("seed", 0))
    for attempt in range(_NETWORK_ATTEMPTS):
        key = (attempt,) if trial_index is None else (trial_index, attempt)
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))
        pos = rng.uniform(0.0, box, size=(agents, dim))
        cfg = Configuration(dim, pos)
        edges = []
        for i in range(agents):
            for j in range(i + 1, agents):
                if np.linalg.norm(pos[i] - pos[j]) <= radius:
                    edges.append((i, j))
        graph = SensorGraph(agents, tuple(edges))
        if rigidity_report(rigidity_matrix(cfg, graph, kind)).is_rigid:
            return cfg, graph
    raise RuntimeError(
        f"no rigid draw within {_NETWORK_ATTEMPTS} attempts for {source!r} ({kind})"
    )


def _uav13_indexed(seed: int, trial_index: int) -> tuple[Configuration, SensorGraph]:
    for attempt in range(_NETWORK_ATTEMPTS):
        rng = np.random.default_rng(
            np.random.SeedSequence(seed, spawn_key=(trial_index, attempt))
        )
        pos = rng.uniform(0.0, 10.0, size=(13, 3))
        dists = np.sort(pdist(pos))
        radius = 0.5 * (dists[35] + dists[36])
        cfg = Configuration(3, pos)
        edges = [
            (i, j)
            for i in range(13)
            for j in range(i + 1, 13)
            if np.linalg.norm(pos[i] - pos[j]) <= radius
        ]
        graph = SensorGraph(13, tuple(edges))
        if graph.num_edges == 36 and rigidity_report(
            distance_rigidity_matrix(cfg, graph)
        ).is_rigid:
            return cfg, graph
    raise RuntimeError(f"no rigid 13-agent draw within {_NETWORK_ATTEMPTS} attempts")


def _seed_fingerprint(ss: np.random.SeedSequence) -> str:
    words = ss.generate_state(2, np.uint64)
    return f"{int(words[0]):016x}{int(words[1]):016x}"


def run_trial(
    scenario: ScenarioConfig,
    trial_index: int,
    network: tuple[Configuration, SensorGraph] | None = None,
    return_result: bool = False,
):
    """Execute one synthetic fault-injection trial.

    Draw order (single derived stream): fault agents, fault error blocks,
    estimate perturbations for the non-faulty agents in ascending order,
    then the measurement noise direction.  The relative error compares the
    recovered vector against the full truth (fault blocks plus any
    estimate perturbations); it is 0 when both are zero, and an undefined
    (NaN) sentinel when the truth is zero but the solver reports mass above
    the support threshold.

    Returns the :class:`TrialRecord`, or ``(record, recovery_result)`` when
    ``return_result`` is set.
    """
    if network is None:
        idx = trial_index if scenario.regenerate_network else None
        network = build_network(scenario.network, scenario.kind, trial_index=idx)
    cfg, graph = network
    n = cfg.num_agents
    if scenario.fault_count >= n:
        raise ValueError(f"fault_count {scenario.fault_count} must stay below {n}")
    ss = np.random.SeedSequence(scenario.base_seed, spawn_key=(trial_index,))
    rng = np.random.default_rng(ss)

    if scenario.fault_count > 0:
        chosen = rng.choice(n, size=scenario.fault_count, replace=False)
        fault_set = tuple(sorted(int(i) for i in chosen))
    else:
        fault_set = ()
    state = inject_faults(
        cfg,
        fault_set,
        mode=scenario.fault_mode,
        seed=rng,
        centered=scenario.centered_faults,
        side=scenario.fault_cube_side,
    )
    estimates = state.estimates.blocks
    if scenario.estimate_perturbation > 0:
        others = [i for i in range(n) if i not in fault_set]
        estimates = perturb_positions(
            estimates, others, scenario.estimate_perturbation, rng
        )
    p_hat = Configuration(cfg.dim, estimates)
    x_true = BlockVector(cfg.dim, cfg.positions - estimates)

    y = measurement_map(cfg, graph, scenario.kind)
    if scenario.noise_radius > 0:
        y = add_noise(y, scenario.noise_radius, rng)

    start = time.perf_counter()
    result = scp_recover(p_hat, y, graph, scenario.kind, scenario.scp_params())
    wall = time.perf_counter() - start

    if result.failure is not None:
        status = "infeasible" if "infeasible" in result.failure else "degenerate"
    elif result.converged:
        status = "converged"
    else:
        status = "max_iterations"

    threshold = (
        scenario.support_threshold
        if scenario.support_threshold is not None
        else default_support_threshold(result.x_star)
    )
    truth_norm = float(np.linalg.norm(x_true.to_flat()))
    recovered_norm = float(np.linalg.norm(result.x_star.to_flat()))
    if truth_norm > 0:
        rel = float(
            np.linalg.norm(x_true.to_flat() - result.x_star.to_flat()) / truth_norm
        )
    elif recovered_norm <= threshold:
        rel = 0.0
    else:
        rel = float("nan")

    record = TrialRecord(
        index=trial_index,
        derived_seed=_seed_fingerprint(ss),
        true_set=fault_set,
        identified_set=tuple(result.support),
        relative_error=rel,
        iterations=result.iterations_used,
        status=status,
        wall_time=wall,
    )
    if return_result:
        return record, result
    return record


def default_axis_values(axis: str):
    if axis == "fault_count":
        return list(range(1, 7))
    if axis == "fault_mode":
        return list(FAULT_MODES)
    if axis == "noise_grid":
        return [(e, k) for e in range(0, 6) for k in (0.0, 0.3, 0.6, 0.9)]
    if axis == "scp_iterations":
        return list(range(1, 9))
    raise ValueError(f"axis must be one of {SWEEP_AXES}, got {axis!r}")


def scenario_at_point(scenario: ScenarioConfig, axis: str, value) -> ScenarioConfig:
    """Specialize a base scenario to one sweep point.

    The noise axis follows the tuned protocol: the slack grows by the noise
    radius (so the ball still covers the faults plus noise) and integer
    radii adopt the tuned shrink schedule; non-integer radii keep the base
    scenario's shrink.  The schedule assumes a short fixed-depth run
    (``step_tolerance=0.0``, ``max_iterations`` around four) that leaves
    the final ball radius near the noise floor; shrinking much deeper
    squeezes the slack below the unreachable noise component and the
    subproblem minima grow without bound.
    """
    if axis == "fault_count":
        return replace(scenario, fault_count=int(value))
    if axis == "fault_mode":
        return replace(scenario, fault_mode=str(value))
    if axis == "scp_iterations":
        return replace(scenario, max_iterations=int(value))
    if axis == "noise_grid":
        eps, kappa = value
        try:
            shrink = shrink_for_noise(eps)
        except ValueError:
            shrink = scenario.shrink
        return replace(
            scenario,
            noise_radius=float(eps),
            estimate_perturbation=float(kappa),
            initial_slack=scenario.initial_slack + float(eps),
            shrink=shrink,
        )
    raise ValueError(f"axis must be one of {SWEEP_AXES}, got {axis!r}")


def point_columns(axis: str, value) -> dict:
    if axis == "noise_grid":
        eps, kappa = value
        return {"noise_radius": float(eps), "kappa": float(kappa)}
    if axis == "scp_iterations":
        return {"max_iterations": int(value)}
    if axis == "fault_count":
        return {"fault_count": int(value)}
    if axis == "fault_mode":
        return {"fault_mode": str(value)}
    raise ValueError(f"axis must be one of {SWEEP_AXES}, got {axis!r}")


def aggregate_records(records) -> dict:
    """Deterministic fold of per-trial records into summary statistics.

    Relative-error statistics skip undefined (NaN) entries; their count is
    reported separately.  The standard deviation is the population form
    (ddof = 0) so it is exactly recomputable from the per-trial rows.
    """
    rels = np.array([r.relative_error for r in records], dtype=float)
    finite = rels[np.isfinite(rels)]
    ident = np.array([r.identified for r in records], dtype=float)
    iters = np.array([r.iterations for r in records], dtype=float)
    return {
        "trials": len(records),
        "identification_rate": float(ident.mean()) if len(records) else float("nan"),
        "mean_relative_error": float(finite.mean()) if finite.size else float("nan"),
        "std_relative_error": float(finite.std(ddof=0)) if finite.size else float("nan"),
        "median_relative_error": float(np.median(finite)) if finite.size else float("nan"),
        "mean_iterations": float(iters.mean()) if len(records) else float("nan"),
        "undefined_errors": int(np.count_nonzero(~np.isfinite(rels))),
    }


@dataclass(frozen=True, eq=False)
class SweepPoint:
    params: dict
    records: tuple[TrialRecord, ...]
    aggregate: dict


@dataclass(frozen=True, eq=False)
class SweepResult:
    axis: str
    points: tuple[SweepPoint, ...]

    def save(self, out_dir) -> tuple[str, str]:
        """Write trials.csv and aggregate.csv; returns their paths."""
        import os

        os.makedirs(out_dir, exist_ok=True)
        trials_path = os.path.join(out_dir, "trials.csv")
        agg_path = os.path.join(out_dir, "aggregate.csv")
        header = f"# sparseloc-montecarlo schema={SCHEMA_VERSION} axis={self.axis}\n"
        param_cols = list(self.points[0].params) if self.points else []
        with open(trials_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(header)
            writer = csv.writer(fh)
            writer.writerow(
                param_cols
                + [
                    "trial",
                    "derived_seed",
                    "true_set",
                    "identified_set",
                    "relative_error",
                    "iterations",
                    "status",
                ]
            )
            for point in self.points:
                base = [_csv_value(point.params[c]) for c in param_cols]
                for r in point.records:
                    writer.writerow(
                        base
                        + [
                            r.index,
                            r.derived_seed,
                            ";".join(str(i) for i in r.true_set),
                            ";".join(str(i) for i in r.identified_set),
                            repr(r.relative_error),
                            r.iterations,
                            r.status,
                        ]
                    )
        agg_cols = list(self.points[0].aggregate) if self.points else []
        with open(agg_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(header)
            writer = csv.writer(fh)
            writer.writerow(param_cols + agg_cols)
            for point in self.points:
                writer.writerow(
                    [_csv_value(point.params[c]) for c in param_cols]
                    + [_csv_value(point.aggregate[c]) for c in agg_cols]
                )
        return trials_path, agg_path


def _csv_value(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _run_chunk(args) -> list[TrialRecord]:
    scenario_json, indices, dim, positions, edges = args
    scenario = ScenarioConfig.from_json(scenario_json)
    if positions is None:
        network = None
    else:
        cfg = Configuration(dim, np.asarray(positions))
        network = (cfg, SensorGraph(cfg.num_agents, tuple(map(tuple, edges))))
    return [run_trial(scenario, i, network=network) for i in indices]


def monte_carlo_sweep(
    scenario: ScenarioConfig,
    axis: str,
    values=None,
    trials: int | None = None,
    jobs: int = 1,
    out_dir=None,
) -> SweepResult:
    """Run a sweep along one axis; optionally write the two CSVs.

    The network is built once per sweep (from the scenario's network source)
    unless ``regenerate_network`` asks for per-trial draws.  Records are
    ordered by trial index within each point regardless of scheduling.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"axis must be one of {SWEEP_AXES}, got {axis!r}")
    if values is None:
        values = default_axis_values(axis)
    count = trials if trials is not None else scenario.trials
    shared = (
        None
        if scenario.regenerate_network
        else build_network(scenario.network, scenario.kind)
    )
    points: list[SweepPoint] = []
    for value in values:
        sc = scenario_at_point(scenario, axis, value)
        indices = list(range(count))
        if jobs <= 1:
            records = [run_trial(sc, i, network=shared) for i in indices]
        else:
            if shared is None:
                tasks = [
                    (sc.to_json(), chunk, None, None, None)
                    for chunk in _split(indices, jobs)
                ]
            else:
                cfg, graph = shared
                tasks = [
                    (
                        sc.to_json(),
                        chunk,
                        cfg.dim,
                        cfg.positions.tolist(),
                        list(graph.edges),
                    )
                    for chunk in _split(indices, jobs)
                ]
            records = []
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                for part in pool.map(_run_chunk, tasks):
                    records.extend(part)
        records.sort(key=lambda r: r.index)
        points.append(
            SweepPoint(
                params=point_columns(axis, value),
                records=tuple(records),
                aggregate=aggregate_records(records),
            )
        )
    result = SweepResult(axis=axis, points=tuple(points))
    if out_dir is not None:
        result.save(out_dir)
    return result


def _split(indices: list[int], parts: int) -> list[list[int]]:
    size = max(1, (len(indices) + parts - 1) // parts)
    return [indices[k : k + size] for k in range(0, len(indices), size)]
