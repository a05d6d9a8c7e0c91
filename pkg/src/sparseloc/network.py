"""Sensor network model: agents, measurement graphs, and block vectors.

Positions of ``n`` agents in ``d`` dimensions (``d`` is 2 or 3) are stored
row-wise in an ``(n, d)`` array.  Stacked vectors over the network (error
vectors, null-space directions) use the same layout: block ``i`` holds the
``d`` components belonging to agent ``i``, and the flat vector is the
row-major raveling of the blocks.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform

# Agents closer than this (in configuration units) are treated as coincident;
# coincident endpoints break bearing measurements and rigidity analysis.
COINCIDENCE_TOL = 1e-9

# Relative floor below which a block counts as zero in the q=0 block norm.
ZERO_BLOCK_RTOL = 1e-9

VALID_DIMS = (2, 3)


def _readonly(a, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class SensorGraph:
    """Undirected measurement graph on ``num_agents`` agents.

    Edges are normalized so the smaller index comes first.  Self-loops and
    duplicates are kept as given so that :func:`validate_configuration` can
    report them; well-formed graphs contain neither.
    """

    num_agents: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        norm = tuple(
            (int(i), int(j)) if i <= j else (int(j), int(i)) for i, j in self.edges
        )
        object.__setattr__(self, "num_agents", int(self.num_agents))
        object.__setattr__(self, "edges", norm)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def endpoint_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Edge endpoints as two index arrays, convenient for vectorized maps."""
        if not self.edges:
            empty = np.empty(0, dtype=int)
            return empty, empty.copy()
        e = np.asarray(self.edges, dtype=int)
        return e[:, 0], e[:, 1]


@dataclass(frozen=True, eq=False)
class Configuration:
    """Agent positions, one row per agent."""

    dim: int
    positions: np.ndarray

    def __post_init__(self) -> None:
        if self.dim not in VALID_DIMS:
            raise ValueError(f"dim must be one of {VALID_DIMS}, got {self.dim}")
        pos = _readonly(np.atleast_2d(self.positions))
        if pos.ndim != 2 or pos.shape[1] != self.dim:
            raise ValueError(
                f"positions must have shape (n, {self.dim}), got {pos.shape}"
            )
        object.__setattr__(self, "positions", pos)

    @property
    def num_agents(self) -> int:
        return self.positions.shape[0]

    def block(self, i: int) -> np.ndarray:
        return self.positions[i]

    def diameter(self) -> float:
        """Largest inter-agent distance; 0 for fewer than two agents."""
        if self.num_agents < 2:
            return 0.0
        return float(pdist(self.positions).max())

    def displaced(self, offset: "BlockVector") -> "Configuration":
        """New configuration with ``offset`` added blockwise."""
        if offset.blocks.shape != self.positions.shape:
            raise ValueError("offset shape does not match configuration")
        return Configuration(self.dim, self.positions + offset.blocks)


@dataclass(frozen=True, eq=False)
class BlockVector:
    """Stacked vector over the network, one length-``dim`` row per agent."""

    dim: int
    blocks: np.ndarray

    def __post_init__(self) -> None:
        blk = _readonly(np.atleast_2d(self.blocks))
        if blk.ndim != 2 or blk.shape[1] != self.dim:
            raise ValueError(f"blocks must have shape (n, {self.dim}), got {blk.shape}")
        object.__setattr__(self, "blocks", blk)

    @classmethod
    def from_flat(cls, flat, dim: int) -> "BlockVector":
        arr = np.asarray(flat, dtype=float).ravel()
        if arr.size % dim != 0:
            raise ValueError(f"flat length {arr.size} is not a multiple of dim={dim}")
        return cls(dim, arr.reshape(-1, dim))

    @classmethod
    def zeros(cls, num_blocks: int, dim: int) -> "BlockVector":
        return cls(dim, np.zeros((num_blocks, dim)))

    @property
    def num_blocks(self) -> int:
        return self.blocks.shape[0]

    def to_flat(self) -> np.ndarray:
        return self.blocks.ravel().copy()

    def block_norms(self) -> np.ndarray:
        return np.linalg.norm(self.blocks, axis=1)


@dataclass(frozen=True, eq=False)
class ErrorState:
    """Ground truth for one synthetic trial.

    ``estimates`` holds the corrupted position estimates and ``true_error``
    the blockwise difference (true positions minus estimates), so the agents
    in ``fault_set`` are exactly the non-zero blocks of ``true_error``.
    """

    estimates: BlockVector
    true_error: BlockVector
    fault_set: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "fault_set", tuple(int(i) for i in self.fault_set))


@dataclass(frozen=True)
class ValidationIssue:
    code: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    issues: tuple[ValidationIssue, ...]


def validate_configuration(cfg: Configuration, graph: SensorGraph) -> ValidationReport:
    """Check a network for modeling hazards.

    Reported issue codes: ``index-out-of-range``, ``self-loop``,
    ``duplicate-edge``, ``coincident-agents``, ``agent-count-mismatch``.
    """
    issues: list[ValidationIssue] = []
    n = cfg.num_agents
    if graph.num_agents != n:
        issues.append(
            ValidationIssue(
                "agent-count-mismatch",
                f"graph declares {graph.num_agents} agents, configuration has {n}",
            )
        )
    seen: set[tuple[int, int]] = set()
    for i, j in graph.edges:
        if not (0 <= i < n and 0 <= j < n):
            issues.append(
                ValidationIssue("index-out-of-range", f"edge ({i}, {j}) leaves 0..{n - 1}")
            )
            continue
        if i == j:
            issues.append(ValidationIssue("self-loop", f"edge ({i}, {j}) is a self-loop"))
            continue
        if (i, j) in seen:
            issues.append(
                ValidationIssue("duplicate-edge", f"edge ({i}, {j}) appears more than once")
            )
        seen.add((i, j))
    if n >= 2:
        close = squareform(pdist(cfg.positions)) < COINCIDENCE_TOL
        for i in range(n):
            for j in range(i + 1, n):
                if close[i, j]:
                    issues.append(
                        ValidationIssue(
                            "coincident-agents",
                            f"agents {i} and {j} are within {COINCIDENCE_TOL}",
                        )
                    )
    return ValidationReport(ok=not issues, issues=tuple(issues))


def _block_norms_of(v) -> np.ndarray:
    if isinstance(v, BlockVector):
        return v.block_norms()
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 2:
        raise ValueError("expected a BlockVector or an (n, dim) array")
    return np.linalg.norm(arr, axis=1)


def block_norm(v, q: float) -> float:
    """Mixed l2/lq norm over blocks.

    ``q=0`` counts the blocks whose Euclidean norm exceeds a relative floor
    of ``ZERO_BLOCK_RTOL * (1 + largest block norm)``; ``q=inf`` returns the
    largest block norm; ``0 < q < inf`` is the usual power sum
    ``(sum ||v[i]||^q)^(1/q)``.
    """
    norms = _block_norms_of(v)
    if norms.size == 0:
        return 0.0
    if q == 0:
        floor = ZERO_BLOCK_RTOL * (1.0 + float(norms.max()))
        return float(np.count_nonzero(norms > floor))
    if q < 0:
        raise ValueError(f"q must be non-negative, got {q}")
    if np.isinf(q):
        return float(norms.max())
    return float((norms**q).sum() ** (1.0 / q))


def restrict_support(v: BlockVector, support) -> BlockVector:
    """Copy of ``v`` with every block outside ``support`` zeroed."""
    idx = [int(i) for i in support]
    for i in idx:
        if not 0 <= i < v.num_blocks:
            raise IndexError(f"support index {i} leaves 0..{v.num_blocks - 1}")
    out = np.zeros_like(v.blocks)
    if idx:
        out[idx] = v.blocks[idx]
    return BlockVector(v.dim, out)


def random_geometric_network(
    num_agents: int,
    dim: int,
    radius: float,
    box: float = 1.0,
    seed=None,
) -> tuple[Configuration, SensorGraph]:
    """Uniform positions in ``[0, box]^dim`` joined when within ``radius``.

    ``seed`` may be anything accepted by :func:`numpy.random.default_rng`.
    Edge order is lexicographic in (i, j), independent of the draw.
    """
    if num_agents < 1:
        raise ValueError("num_agents must be at least 1")
    rng = np.random.default_rng(seed)
    pos = rng.uniform(0.0, box, size=(num_agents, dim))
    cfg = Configuration(dim, pos)
    edges = []
    if num_agents >= 2:
        dists = squareform(pdist(pos))
        for i in range(num_agents):
            for j in range(i + 1, num_agents):
                if dists[i, j] <= radius:
                    edges.append((i, j))
    return cfg, SensorGraph(num_agents, tuple(edges))


def project_to_plane(cfg: Configuration, normal) -> Configuration:
    """Express a 3D configuration in 2D coordinates of the plane with the
    given normal (through the origin), after orthogonal projection.

    The in-plane basis is orthonormal, so inter-point distances within the
    plane are preserved exactly.
    """
    if cfg.dim != 3:
        raise ValueError("plane projection is defined for 3D configurations")
    n = np.asarray(normal, dtype=float).ravel()
    if n.shape != (3,):
        raise ValueError("normal must be a 3-vector")
    nn = np.linalg.norm(n)
    if nn < COINCIDENCE_TOL:
        raise ValueError("normal has (numerically) zero length")
    n = n / nn
    helper = np.zeros(3)
    helper[int(np.argmin(np.abs(n)))] = 1.0
    b1 = np.cross(n, helper)
    b1 /= np.linalg.norm(b1)
    b2 = np.cross(n, b1)
    coords = cfg.positions @ np.column_stack([b1, b2])
    return Configuration(2, coords)


def save_network(path, cfg: Configuration, graph: SensorGraph) -> None:
    """Write a network to JSON (floats round-trip exactly)."""
    payload = {
        "dim": cfg.dim,
        "positions": [[float(x) for x in row] for row in cfg.positions],
        "edges": [[i, j] for i, j in graph.edges],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_network(path) -> tuple[Configuration, SensorGraph]:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    cfg = Configuration(int(payload["dim"]), np.asarray(payload["positions"], dtype=float))
    edges = tuple((int(i), int(j)) for i, j in payload["edges"])
    return cfg, SensorGraph(cfg.num_agents, edges)
