"""Distance and bearing measurement maps plus synthetic corruption helpers.

Measurements are stacked edge by edge: distances give one scalar per edge,
bearings one unit ``d``-vector per edge.  Noise and estimate imperfections
are drawn on spheres so their Euclidean size is controlled exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import (
    COINCIDENCE_TOL,
    BlockVector,
    Configuration,
    ErrorState,
    SensorGraph,
    _readonly,
)

MEASUREMENT_KINDS = ("distance", "bearing")
FAULT_MODES = ("uncorrelated", "fully_correlated")


class DegenerateEdgeError(ValueError):
    """An edge joins numerically coincident agents."""


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    """Stacked measurement vector of one kind over a fixed edge list."""

    kind: str
    values: np.ndarray
    noise_radius: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in MEASUREMENT_KINDS:
            raise ValueError(f"kind must be one of {MEASUREMENT_KINDS}, got {self.kind!r}")
        if self.noise_radius < 0:
            raise ValueError("noise_radius must be non-negative")
        object.__setattr__(self, "values", _readonly(np.ravel(self.values)))


def _edge_differences(cfg: Configuration, graph: SensorGraph) -> np.ndarray:
    i_idx, j_idx = graph.endpoint_arrays()
    return cfg.positions[i_idx] - cfg.positions[j_idx]


def distance_measurements(cfg: Configuration, graph: SensorGraph) -> MeasurementSet:
    """Half squared distances, one entry per edge (i, j): 0.5 * ||p[i] - p[j]||^2.

    The half keeps the Jacobian free of stray factors of two.
    """
    diffs = _edge_differences(cfg, graph)
    vals = 0.5 * np.einsum("ij,ij->i", diffs, diffs)
    return MeasurementSet("distance", vals)


def bearing_measurements(cfg: Configuration, graph: SensorGraph) -> MeasurementSet:
    """Unit vectors (p[i] - p[j]) / ||p[i] - p[j]||, stacked per edge."""
    diffs = _edge_differences(cfg, graph)
    dists = np.linalg.norm(diffs, axis=1)
    bad = np.flatnonzero(dists < COINCIDENCE_TOL)
    if bad.size:
        k = int(bad[0])
        raise DegenerateEdgeError(
            f"edge {graph.edges[k]} joins coincident agents (separation {dists[k]:.3e})"
        )
    vals = (diffs / dists[:, None]).ravel()
    return MeasurementSet("bearing", vals)


def measurement_map(cfg: Configuration, graph: SensorGraph, kind: str) -> MeasurementSet:
    if kind == "distance":
        return distance_measurements(cfg, graph)
    if kind == "bearing":
        return bearing_measurements(cfg, graph)
    raise ValueError(f"kind must be one of {MEASUREMENT_KINDS}, got {kind!r}")


def residual_vector(
    measured: MeasurementSet, cfg_est: Configuration, graph: SensorGraph
) -> np.ndarray:
    """Measured minus modeled: y - Phi(p_hat), evaluated at the estimates."""
    model = measurement_map(cfg_est, graph, measured.kind)
    if measured.values.shape != model.values.shape:
        raise ValueError(
            f"measurement length {measured.values.shape[0]} does not match "
            f"graph/kind model length {model.values.shape[0]}"
        )
    return measured.values - model.values


def sample_sphere(dim: int, radius: float, seed=None) -> np.ndarray:
    """Uniform draw on the sphere of the given radius in R^dim.

    ``seed`` may be an int, a Generator, or None.  Radius 0 returns the zero
    vector.  The output norm equals ``radius`` exactly up to normalization
    round-off.
    """
    if dim < 1:
        raise ValueError("dim must be at least 1")
    if radius < 0:
        raise ValueError("radius must be non-negative")
    if radius == 0:
        return np.zeros(dim)
    rng = np.random.default_rng(seed)
    while True:
        v = rng.standard_normal(dim)
        norm = np.linalg.norm(v)
        if norm > 1e-12:
            return (radius / norm) * v


def add_noise(measured: MeasurementSet, radius: float, seed=None) -> MeasurementSet:
    """Add a sphere-of-radius draw in the full stacked measurement space."""
    if radius == 0:
        return MeasurementSet(measured.kind, measured.values, noise_radius=0.0)
    e = sample_sphere(measured.values.shape[0], radius, seed)
    return MeasurementSet(measured.kind, measured.values + e, noise_radius=radius)


def perturb_positions(positions: np.ndarray, agents, radius: float, seed=None) -> np.ndarray:
    """Move each listed agent onto the sphere of ``radius`` around itself.

    Agents are processed in the given order, one sphere draw each, so the
    result is deterministic for a fixed seed.
    """
    out = np.array(positions, dtype=float, copy=True)
    if radius == 0:
        return out
    rng = np.random.default_rng(seed)
    for i in agents:
        out[int(i)] += sample_sphere(out.shape[1], radius, rng)
    return out


def inject_faults(
    cfg: Configuration,
    fault_set,
    mode: str = "uncorrelated",
    seed=None,
    centered: bool = False,
    side: float = 1.0,
) -> ErrorState:
    """Corrupt the position estimates of the agents in ``fault_set``.

    Error blocks are uniform over the cube ``[0, side]^d`` (or
    ``[-side/2, side/2]^d`` when ``centered``).  ``fully_correlated`` shares
    one draw across all faulty agents; ``uncorrelated`` draws independently,
    in ascending agent order.  Estimates are ``p - x``, so the true error
    ``x = p - p_hat`` is non-zero exactly on ``fault_set``.
    """
    if mode not in FAULT_MODES:
        raise ValueError(f"mode must be one of {FAULT_MODES}, got {mode!r}")
    if side <= 0:
        raise ValueError("side must be positive")
    idx = sorted(int(i) for i in fault_set)
    n = cfg.num_agents
    for i in idx:
        if not 0 <= i < n:
            raise IndexError(f"fault index {i} leaves 0..{n - 1}")
    if len(set(idx)) != len(idx):
        raise ValueError("fault_set contains repeated agents")
    rng = np.random.default_rng(seed)
    lo, hi = (-side / 2.0, side / 2.0) if centered else (0.0, side)
    x = np.zeros((n, cfg.dim))
    if idx:
        if mode == "fully_correlated":
            x[idx] = rng.uniform(lo, hi, size=cfg.dim)
        else:
            x[idx] = rng.uniform(lo, hi, size=(len(idx), cfg.dim))
    error = BlockVector(cfg.dim, x)
    estimates = BlockVector(cfg.dim, cfg.positions - x)
    return ErrorState(estimates=estimates, true_error=error, fault_set=tuple(idx))


def measurement_to_json(measured: MeasurementSet) -> dict:
    return {
        "kind": measured.kind,
        "values": [float(v) for v in measured.values],
        "noise_radius": float(measured.noise_radius),
    }


def measurement_from_json(payload: dict) -> MeasurementSet:
    return MeasurementSet(
        kind=str(payload["kind"]),
        values=np.asarray(payload["values"], dtype=float),
        noise_radius=float(payload.get("noise_radius", 0.0)),
    )
