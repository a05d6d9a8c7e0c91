"""Shared independent oracles and geometry builders for the test suite.

Everything here is deliberately written against the mathematical
definitions rather than the library internals, so the tests cross-check
two separate derivations.
"""
from __future__ import annotations

import numpy as np

from sparseloc.measurement import measurement_map
from sparseloc.network import Configuration, SensorGraph, random_geometric_network
from sparseloc.rigidity import rigidity_matrix, rigidity_report


def fd_jacobian(cfg: Configuration, graph: SensorGraph, kind: str, step: float = 1e-6):
    """Central-difference Jacobian of the measurement map."""
    n, d = cfg.num_agents, cfg.dim
    base = cfg.positions
    cols = []
    for col in range(n * d):
        bump = np.zeros(n * d)
        bump[col] = step
        plus = Configuration(d, base + bump.reshape(n, d))
        minus = Configuration(d, base - bump.reshape(n, d))
        fp = measurement_map(plus, graph, kind).values
        fm = measurement_map(minus, graph, kind).values
        cols.append((fp - fm) / (2.0 * step))
    return np.column_stack(cols)


def max_relative_error(numeric: np.ndarray, analytic: np.ndarray) -> float:
    scale = max(float(np.abs(analytic).max()), 1e-30)
    return float(np.abs(numeric - analytic).max()) / scale


def rigid_network(
    num_agents: int,
    dim: int,
    kind: str,
    seed: int,
    radius: float,
    box: float = 1.0,
    attempts: int = 100,
):
    """First seeded geometric draw that is infinitesimally rigid for ``kind``."""
    for k in range(attempts):
        cfg, graph = random_geometric_network(
            num_agents, dim, radius, box=box, seed=seed + 100_000 * k
        )
        if rigidity_report(rigidity_matrix(cfg, graph, kind)).is_rigid:
            return cfg, graph
    raise RuntimeError(f"no rigid draw for n={num_agents} d={dim} {kind}")


def char_poly_eigenvalues(A: np.ndarray) -> np.ndarray:
    """Eigenvalues via the Faddeev-LeVerrier characteristic polynomial.

    Independent of LAPACK eigensolvers; adequate for the small symmetric
    matrices used in the tests.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    coeffs = [1.0]
    M = np.zeros_like(A)
    for k in range(1, n + 1):
        M = A @ M + coeffs[-1] * np.eye(n)
        coeffs.append(-np.trace(A @ M) / k)
    roots = np.roots(coeffs)
    return np.sort(roots.real)


def complete_graph(n: int) -> SensorGraph:
    return SensorGraph(n, tuple((i, j) for i in range(n) for j in range(i + 1, n)))


def triangle() -> tuple[Configuration, SensorGraph]:
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.4, 0.9]])
    return Configuration(2, pts), complete_graph(3)


def unit_square() -> tuple[Configuration, SensorGraph]:
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    return Configuration(2, pts), complete_graph(4)


def clustered_line() -> tuple[Configuration, SensorGraph]:
    """Three near-coincident agents plus one far outlier; defeats s=1."""
    pts = np.array([[0.0, 0.0], [0.1, 0.0], [0.2, 0.0], [10.0, 0.0]])
    return Configuration(2, pts), complete_graph(4)


def bent_cluster() -> tuple[Configuration, SensorGraph]:
    """Rigid variant of the clustered line (slightly off-axis)."""
    pts = np.array([[0.0, 0.0], [0.1, 0.02], [0.2, -0.02], [10.0, 0.4]])
    return Configuration(2, pts), complete_graph(4)


def near_colinear(n: int, dim: int, jitter: float = 1e-4, seed: int = 0):
    """Agents almost on a line; stresses Jacobian conditioning."""
    rng = np.random.default_rng(seed)
    t = np.linspace(0.0, 1.0, n)
    pts = np.zeros((n, dim))
    pts[:, 0] = t
    pts[:, 1:] = jitter * rng.standard_normal((n, dim - 1))
    return Configuration(dim, pts), complete_graph(n)
