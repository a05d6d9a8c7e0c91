"""Brute-force reference implementations, deliberately exhaustive and slow.

These exist so the fast paths can be checked against something that is
obviously correct.  They enumerate supports or sample kernels directly and
are guarded against instance sizes where enumeration stops being practical;
nothing here belongs on a hot path.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .network import BlockVector
from .rigidity import NullBasis, RigidityMatrix

MAX_L0_AGENTS = 12
MAX_L0_SUPPORT = 4
MAX_SPARK_COLUMNS = 24

# A candidate support "fits" when the least-squares residual is below this,
# relative to the residual scale.
EXACT_FIT_RTOL = 1e-8


class OracleGuardError(ValueError):
    """Instance too large for exhaustive enumeration."""


@dataclass(frozen=True, eq=False)
class OracleResult:
    value: object
    instances_examined: int
    unique: bool | None = None


@dataclass(frozen=True, eq=False)
class NspWorstCase:
    """Worst sampled kernel direction for the top-s versus rest comparison."""

    ratio: float
    vector: BlockVector
    subset: tuple[int, ...]
    samples: int


def _column_blocks(R: RigidityMatrix, support) -> np.ndarray:
    d = R.dim
    cols = []
    for i in support:
        cols.append(R.matrix[:, d * i : d * (i + 1)])
    return np.hstack(cols) if cols else np.empty((R.matrix.shape[0], 0))


def brute_force_block_spark(R: RigidityMatrix, cap: int | None = None) -> OracleResult:
    """Smallest number of column blocks that are linearly dependent.

    Enumerates supports by ascending size; the first size admitting a
    rank-deficient column submatrix is the block spark (any dependent set
    with fewer blocks would have been found at a smaller size).  Returns
    ``value=None`` when every size up to the cap is independent.
    """
    n, d = R.num_agents, R.dim
    if d * n > MAX_SPARK_COLUMNS:
        raise OracleGuardError(
            f"{d * n} columns exceeds the enumeration guard ({MAX_SPARK_COLUMNS})"
        )
    limit = n if cap is None else min(cap, n)
    examined = 0
    for k in range(1, limit + 1):
        for support in itertools.combinations(range(n), k):
            examined += 1
            cols = _column_blocks(R, support)
            if np.linalg.matrix_rank(cols) < d * k:
                return OracleResult(value=k, instances_examined=examined)
    return OracleResult(value=None, instances_examined=examined)


def brute_force_l0_recover(R: RigidityMatrix, z: np.ndarray, s_max: int) -> OracleResult:
    """Sparsest blockwise explanation of ``z = R x`` by support enumeration.

    Scans support sizes 0..s_max; at the first size with any exact fit,
    returns one fitting solution (enumeration order, so deterministic) and
    whether it is the only one.  Distinct supports at the minimal size give
    distinct solutions, and a rank-deficient fitting support means a whole
    affine family fits, so uniqueness is decided by counting fits at that
    size plus a rank check.  ``value=None`` if nothing fits within s_max.
    """
    n, d = R.num_agents, R.dim
    if n > MAX_L0_AGENTS:
        raise OracleGuardError(f"{n} agents exceeds the enumeration guard ({MAX_L0_AGENTS})")
    if s_max > MAX_L0_SUPPORT:
        raise OracleGuardError(f"s_max={s_max} exceeds the enumeration guard ({MAX_L0_SUPPORT})")
    z = np.asarray(z, dtype=float).ravel()
    if z.shape[0] != R.matrix.shape[0]:
        raise ValueError("residual length does not match the matrix row count")
    scale = max(1.0, float(np.linalg.norm(z)))
    examined = 0
    for k in range(0, s_max + 1):
        fits: list[tuple[tuple[int, ...], np.ndarray]] = []
        degenerate = False
        for support in itertools.combinations(range(n), k):
            examined += 1
            cols = _column_blocks(R, support)
            if cols.shape[1]:
                sol, *_ = np.linalg.lstsq(cols, z, rcond=None)
                resid = float(np.linalg.norm(cols @ sol - z))
            else:
                sol = np.empty(0)
                resid = float(np.linalg.norm(z))
            if resid <= EXACT_FIT_RTOL * scale:
                fits.append((support, sol))
                if cols.shape[1] and np.linalg.matrix_rank(cols) < cols.shape[1]:
                    degenerate = True
        if fits:
            support, sol = fits[0]
            blocks = np.zeros((n, d))
            for pos, agent in enumerate(support):
                blocks[agent] = sol[d * pos : d * (pos + 1)]
            unique = (len(fits) == 1) and not degenerate
            return OracleResult(
                value=BlockVector(d, blocks), instances_examined=examined, unique=unique
            )
    return OracleResult(value=None, instances_examined=examined)


def _basis_matrix(basis) -> tuple[np.ndarray, int]:
    if isinstance(basis, NullBasis):
        dim = basis.dim
        cols = [v.to_flat() for v in basis.vectors]
        return np.column_stack(cols), dim
    raise TypeError("expected a NullBasis")


def brute_force_nsp(
    basis: NullBasis, s: int, q: float = 1.0, samples: int = 200_000, seed=None
) -> NspWorstCase:
    """Sample kernel directions and track the worst top-s to rest ratio.

    Coefficients are drawn uniformly on the unit sphere of the basis
    coefficient space (the ratio is scale invariant).  For each sample the
    blocks are ranked by Euclidean norm and the l2/lq mass of the ``s``
    largest is compared against the rest; the certificate condition asks
    this ratio to stay below one for every kernel direction.
    """
    if s < 1:
        raise ValueError("s must be at least 1")
    if q <= 0:
        raise ValueError("q must be positive")
    B, dim = _basis_matrix(basis)
    num_blocks = B.shape[0] // dim
    if s >= num_blocks:
        raise ValueError("s must leave at least one block in the complement")
    rng = np.random.default_rng(seed)
    best_ratio = -np.inf
    best_v: np.ndarray | None = None
    batch = 50_000
    done = 0
    while done < samples:
        m = min(batch, samples - done)
        coefs = rng.standard_normal((m, B.shape[1]))
        coefs /= np.linalg.norm(coefs, axis=1, keepdims=True)
        V = coefs @ B.T
        norms = np.linalg.norm(V.reshape(m, num_blocks, dim), axis=2)
        powered = norms**q
        part = np.partition(powered, num_blocks - s, axis=1)
        top = part[:, num_blocks - s :].sum(axis=1)
        rest = part[:, : num_blocks - s].sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.where(rest > 0, (top / rest) ** (1.0 / q), np.inf)
        k = int(np.argmax(ratios))
        if ratios[k] > best_ratio:
            best_ratio = float(ratios[k])
            best_v = V[k].copy()
        done += m
    assert best_v is not None
    vec = BlockVector(dim, best_v.reshape(num_blocks, dim))
    order = np.argsort(-vec.block_norms(), kind="stable")
    subset = tuple(sorted(int(i) for i in order[:s]))
    return NspWorstCase(ratio=best_ratio, vector=vec, subset=subset, samples=samples)
