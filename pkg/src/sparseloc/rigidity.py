"""Measurement Jacobians (rigidity matrices), null spaces, and rank tests.

For the distance map the Jacobian at ``p`` has one row per edge ``(i, j)``:
``(p[i]-p[j])^T`` in column block ``i`` and its negation in block ``j``.
For the bearing map each edge contributes ``d`` rows: ``P/r`` in block ``i``
and ``-P/r`` in block ``j``, where ``u`` is the unit edge vector, ``r`` the
edge length, and ``P = I - u u^T`` projects onto the plane orthogonal to
``u``.

A configuration is infinitesimally rigid for a measurement kind when the
Jacobian reaches the maximal rank possible for that kind, in which case its
kernel is exactly the span of the analytic invariant motions (translations
and rotations for distances; translations and scaling for bearings).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .network import COINCIDENCE_TOL, BlockVector, Configuration, SensorGraph
from .measurement import DegenerateEdgeError, MEASUREMENT_KINDS

# Skew-symmetric generators of infinitesimal rotation, one per rotation plane.
SKEW_2D = np.array([[0.0, 1.0], [-1.0, 0.0]])
SKEW_3D = (
    np.array([[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]),
    np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]),
    np.array([[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]]),
)


def skew_generators(dim: int) -> tuple[np.ndarray, ...]:
    if dim == 2:
        return (SKEW_2D,)
    if dim == 3:
        return SKEW_3D
    raise ValueError(f"no rotation generators for dim={dim}")


@dataclass(frozen=True, eq=False)
class RigidityMatrix:
    """Dense Jacobian of one measurement map at one configuration."""

    kind: str
    dim: int
    num_agents: int
    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.array(self.matrix, dtype=float, copy=True)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def rows_per_edge(self) -> int:
        return 1 if self.kind == "distance" else self.dim

    def rows_for_edge(self, k: int) -> slice:
        r = self.rows_per_edge
        return slice(r * k, r * (k + 1))


@dataclass(frozen=True)
class RigidityReport:
    rank: int
    nullity: int
    is_rigid: bool
    lambda_tilde: float
    max_rank: int
    tolerance: float


@dataclass(frozen=True, eq=False)
class NullBasis:
    kind: str
    dim: int
    vectors: tuple[BlockVector, ...]


def distance_rigidity_matrix(cfg: Configuration, graph: SensorGraph) -> RigidityMatrix:
    n, d = cfg.num_agents, cfg.dim
    R = np.zeros((graph.num_edges, d * n))
    for k, (i, j) in enumerate(graph.edges):
        diff = cfg.positions[i] - cfg.positions[j]
        R[k, d * i : d * i + d] = diff
        R[k, d * j : d * j + d] = -diff
    return RigidityMatrix("distance", d, n, R)


def bearing_rigidity_matrix(cfg: Configuration, graph: SensorGraph) -> RigidityMatrix:
    n, d = cfg.num_agents, cfg.dim
    R = np.zeros((d * graph.num_edges, d * n))
    eye = np.eye(d)
    for k, (i, j) in enumerate(graph.edges):
        diff = cfg.positions[i] - cfg.positions[j]
        r = np.linalg.norm(diff)
        if r < COINCIDENCE_TOL:
            raise DegenerateEdgeError(
                f"edge ({i}, {j}) joins coincident agents (separation {r:.3e})"
            )
        u = diff / r
        proj = (eye - np.outer(u, u)) / r
        rows = slice(d * k, d * (k + 1))
        R[rows, d * i : d * i + d] = proj
        R[rows, d * j : d * j + d] = -proj
    return RigidityMatrix("bearing", d, n, R)


def rigidity_matrix(cfg: Configuration, graph: SensorGraph, kind: str) -> RigidityMatrix:
    if kind == "distance":
        return distance_rigidity_matrix(cfg, graph)
    if kind == "bearing":
        return bearing_rigidity_matrix(cfg, graph)
    raise ValueError(f"kind must be one of {MEASUREMENT_KINDS}, got {kind!r}")


def maximal_rank(kind: str, dim: int, num_agents: int) -> int:
    """Largest Jacobian rank any configuration can achieve.

    The deficit counts the invariant motions: translations plus rotations
    for distances, translations plus one scaling for bearings.
    """
    if kind == "distance":
        deficit = dim + dim * (dim - 1) // 2
    elif kind == "bearing":
        deficit = dim + 1
    else:
        raise ValueError(f"kind must be one of {MEASUREMENT_KINDS}, got {kind!r}")
    return max(0, dim * num_agents - deficit)


def analytic_null_basis(cfg: Configuration, kind: str) -> NullBasis:
    """Closed-form kernel directions of the Jacobian at ``cfg``.

    Distance: ``dim`` coordinate translations and one rotation field
    ``v[i] = S p[i]`` per skew generator ``S``.  Bearing: the translations
    and the scaling field ``v[i] = p[i]``.  The vectors span the full kernel
    whenever the configuration is infinitesimally rigid.
    """
    n, d = cfg.num_agents, cfg.dim
    vectors: list[BlockVector] = []
    for m in range(d):
        blocks = np.zeros((n, d))
        blocks[:, m] = 1.0
        vectors.append(BlockVector(d, blocks))
    if kind == "distance":
        for S in skew_generators(d):
            vectors.append(BlockVector(d, cfg.positions @ S.T))
    elif kind == "bearing":
        vectors.append(BlockVector(d, cfg.positions.copy()))
    else:
        raise ValueError(f"kind must be one of {MEASUREMENT_KINDS}, got {kind!r}")
    return NullBasis(kind, d, tuple(vectors))


def rigidity_report(R: RigidityMatrix) -> RigidityReport:
    """Rank, nullity, rigidity verdict, and the spectral rigidity index.

    The rank cut is ``max(shape) * eps * sigma_max``.  ``lambda_tilde`` is
    the smallest eigenvalue of ``R^T R`` above the squared cut, i.e. the
    squared smallest non-zero singular value; it is 0.0 when the matrix has
    no singular value above the cut.
    """
    m = R.matrix
    cols = m.shape[1]
    if m.shape[0] == 0 or cols == 0:
        return RigidityReport(0, cols, False, 0.0, maximal_rank(R.kind, R.dim, R.num_agents), 0.0)
    sv = np.linalg.svd(m, compute_uv=False)
    tol = max(m.shape) * np.finfo(float).eps * float(sv[0])
    rank = int(np.count_nonzero(sv > tol))
    lam = float(sv[rank - 1] ** 2) if rank > 0 else 0.0
    target = maximal_rank(R.kind, R.dim, R.num_agents)
    return RigidityReport(
        rank=rank,
        nullity=cols - rank,
        is_rigid=(rank == target and target > 0),
        lambda_tilde=lam,
        max_rank=target,
        tolerance=tol,
    )


def save_matrix_csv(R: RigidityMatrix, path) -> None:
    """Dump the Jacobian entries with a small identifying header comment."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# kind={R.kind} dim={R.dim} agents={R.num_agents}\n")
        writer = csv.writer(fh)
        for row in R.matrix:
            writer.writerow([repr(float(v)) for v in row])
