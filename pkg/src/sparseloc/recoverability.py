"""Certificates for unique recoverability of block-sparse localization errors.

Two regimes are covered.  The counting regime bounds how many faulty agents
a combinatorial search could ever pin down uniquely (block spark of the
Jacobian).  The convex regime certifies when l2/l1 minimization recovers
them, via a geometric null space property: for every kernel direction of
the Jacobian, the mass on any ``s`` blocks must stay below the mass on the
rest.  For rigid networks every kernel direction comes from the analytic
invariant motions, whose block norms have a closed form: distances from a
center ``c`` (rotation or scaling fields) or a constant profile
(translations).  That turns the certificate into a low-dimensional search
over ``c``, handled by a grid sweep plus derivative-free refinement.

``holds = "yes"`` is a search-bounded certificate (no violation found over
the declared budget), not a formal proof; ``"violated"`` always carries an
explicit witness that can be re-checked by direct evaluation.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.spatial.distance import cdist

from .network import BlockVector, Configuration, SensorGraph, block_norm
from .rigidity import rigidity_matrix, rigidity_report

DEFAULT_COLINEAR_RTOL = 1e-6


class NotRigidError(ValueError):
    """The certificate theory needs a maximal-rank Jacobian."""


class NspViolatedError(ValueError):
    """Robust constants are undefined when the certificate fails."""


@dataclass(frozen=True)
class NspSearch:
    """Search budget for the certificate optimizers.

    ``grid`` points per axis sweep the bounding box expanded by ``expand``
    configuration diameters; the best ``refine_starts`` cells seed
    Nelder-Mead for ``refine_iterations`` each.  Plane parameters apply to
    the 3D distance check, ``volume_grid`` to the 3D bearing sweep.
    """

    grid: int = 101
    expand: float = 1.0
    refine_starts: int = 5
    refine_iterations: int = 200
    plane_refine_starts: int = 5
    plane_refine_iterations: int = 80
    volume_grid: int = 21

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class NspCertificate:
    """Outcome of one null-space-property search at level ``s``.

    ``margin`` is the minimum over every searched center of
    ``sum_rest - sum_subset`` (positive means certified room).  When
    violated, ``witness_c`` is a center where the subset mass reaches the
    rest (margin there ≤ 0) and ``witness_subset`` the ``s`` agents
    furthest from it.  For the 3D distance check the witness also carries
    the projection plane normal.
    """

    s: int
    q: float
    holds: str
    margin: float
    witness_c: tuple[float, ...] | None
    witness_subset: tuple[int, ...] | None
    witness_normal: tuple[float, float, float] | None
    search_budget: dict
    note: str = ""

    def to_json(self) -> dict:
        return {
            "s": self.s,
            "q": self.q,
            "holds": self.holds,
            "margin": self.margin,
            "witness_c": list(self.witness_c) if self.witness_c is not None else None,
            "witness_subset": list(self.witness_subset)
            if self.witness_subset is not None
            else None,
            "witness_normal": list(self.witness_normal)
            if self.witness_normal is not None
            else None,
            "search_budget": dict(self.search_budget),
            "note": self.note,
        }

    def to_json_str(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


@dataclass(frozen=True)
class RobustConstants:
    """Constants of the robust recovery bound at q = 1.

    The recovered error differs from the truth by at most
    ``c_stability * sigma_qs(x, s, 1) + c_noise * eps`` in the mixed norm,
    where ``sigma_qs`` measures how far the truth is from block s-sparsity
    and ``eps`` bounds the measurement noise.
    """

    s: int
    tau_bar: float
    tau: float
    gamma: float
    lambda_tilde: float
    c_stability: float
    c_noise: float


def max_colinear_count(cfg: Configuration, tol: float | None = None) -> int:
    """Size of the largest subset of agents within ``tol`` of a common line.

    Exhaustive over lines through all point pairs; default tolerance is
    ``1e-6`` times the configuration diameter.
    """
    pts = cfg.positions
    n = cfg.num_agents
    if n <= 2:
        return n
    if tol is None:
        tol = DEFAULT_COLINEAR_RTOL * cfg.diameter()
    best = 2
    for i in range(n):
        for j in range(i + 1, n):
            direction = pts[j] - pts[i]
            length = np.linalg.norm(direction)
            if length < 1e-15:
                continue
            direction = direction / length
            rel = pts - pts[i]
            perp = rel - np.outer(rel @ direction, direction)
            count = int(np.count_nonzero(np.linalg.norm(perp, axis=1) <= tol))
            best = max(best, count)
    return best


def l0_recovery_limit(
    num_agents: int, kind: str, dim: int, s_tilde: int | None = None
) -> int:
    """Largest integer strictly below (|V| - s_tilde) / 2.

    ``s_tilde`` counts the fixed points of the invariant motions: 1 for 2D
    distance and for bearings, and the maximum number of colinear agents for
    3D distance (pass the value from :func:`max_colinear_count`).
    """
    if s_tilde is None:
        if kind == "distance" and dim == 2:
            s_tilde = 1
        elif kind == "bearing":
            s_tilde = 1
        elif kind == "distance" and dim == 3:
            raise ValueError(
                "3D distance needs s_tilde = max_colinear_count(cfg); no default"
            )
        else:
            raise ValueError(f"unsupported kind/dim: {kind!r}/{dim}")
    return max(0, (num_agents - s_tilde - 1) // 2)


def _subset_split(powered: np.ndarray, s: int) -> tuple[np.ndarray, np.ndarray]:
    """Sum of the s largest entries per row, and sum of the rest."""
    n = powered.shape[1]
    part = np.partition(powered, n - s, axis=1)
    return part[:, n - s :].sum(axis=1), part[:, : n - s].sum(axis=1)


def _margin_f(points: np.ndarray, s: int, q: float, cands: np.ndarray) -> np.ndarray:
    """f(c) = sum over the s furthest agents of ||p-c||^q minus the rest.

    The certificate needs f < 0 everywhere; the furthest-s subset is always
    the worst for fixed c, so no subset enumeration is required.
    """
    powered = cdist(np.atleast_2d(cands), points) ** q
    top, rest = _subset_split(powered, s)
    return top - rest


def nsp_margin(cfg: Configuration, s: int, q: float, c) -> float:
    """Certified-room margin ``sum_rest - sum_subset`` at one center."""
    c = np.asarray(c, dtype=float).reshape(1, -1)
    if c.shape[1] != cfg.dim:
        raise ValueError(f"center must live in dim {cfg.dim}")
    return float(-_margin_f(cfg.positions, s, q, c)[0])


def _furthest_subset(points: np.ndarray, s: int, c: np.ndarray) -> tuple[int, ...]:
    d = cdist(np.atleast_2d(c), points)[0]
    order = np.argsort(-d, kind="stable")
    return tuple(sorted(int(i) for i in order[:s]))


def _grid_candidates(points: np.ndarray, grid: int, expand: float) -> np.ndarray:
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    diam = float(np.linalg.norm(hi - lo)) if points.shape[0] > 1 else 0.0
    pad = expand * diam if diam > 0 else 1.0
    axes = [np.linspace(lo[k] - pad, hi[k] + pad, grid) for k in range(points.shape[1])]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def _validate_level(n: int, s: int, q: float) -> None:
    if not 0 < q <= 1:
        raise ValueError(f"q must lie in (0, 1], got {q}")
    if s < 1:
        raise ValueError(f"s must be at least 1, got {s}")


def _translation_violation(
    points: np.ndarray, s: int, q: float, budget: dict
) -> NspCertificate:
    # With 2s >= n the margin coefficient at infinity is non-negative and the
    # constant-profile (translation) kernel direction already ties or wins;
    # any agent position gives a finite witness with margin <= 0.
    f = _margin_f(points, s, q, points)
    k = int(np.argmax(f))
    c = points[k]
    return NspCertificate(
        s=s,
        q=q,
        holds="violated",
        margin=float(-f[k]),
        witness_c=tuple(float(v) for v in c),
        witness_subset=_furthest_subset(points, s, c),
        witness_normal=None,
        search_budget=budget,
        note=f"s={s} is at least half of {points.shape[0]} agents; "
        "translation directions alone defeat the certificate",
    )


def _search_center(
    points: np.ndarray, s: int, q: float, search: NspSearch, grid: int
) -> tuple[float, np.ndarray]:
    """Maximize f over centers; returns (max f, argmax)."""
    cands = np.vstack([_grid_candidates(points, grid, search.expand), points])
    f = _margin_f(points, s, q, cands)
    order = np.argsort(-f, kind="stable")
    best_f = float(f[order[0]])
    best_c = cands[order[0]].copy()
    scale = max(1.0, float(np.abs(points).max()))
    for idx in order[: search.refine_starts]:
        res = minimize(
            lambda c: -_margin_f(points, s, q, c.reshape(1, -1))[0],
            cands[idx],
            method="Nelder-Mead",
            options={
                "maxiter": search.refine_iterations,
                "xatol": 1e-10 * scale,
                "fatol": 1e-12,
            },
        )
        if -res.fun > best_f:
            best_f = float(-res.fun)
            best_c = np.asarray(res.x, dtype=float)
    return best_f, best_c


def _pointwise_certificate(
    points: np.ndarray,
    s: int,
    q: float,
    search: NspSearch,
    grid: int,
    budget: dict,
    note: str = "",
) -> NspCertificate:
    n = points.shape[0]
    _validate_level(n, s, q)
    if 2 * s >= n:
        return _translation_violation(points, s, q, budget)
    best_f, best_c = _search_center(points, s, q, search, grid)
    if best_f >= 0:
        return NspCertificate(
            s=s,
            q=q,
            holds="violated",
            margin=float(-best_f),
            witness_c=tuple(float(v) for v in best_c),
            witness_subset=_furthest_subset(points, s, best_c),
            witness_normal=None,
            search_budget=budget,
            note=note,
        )
    return NspCertificate(
        s=s,
        q=q,
        holds="yes",
        margin=float(-best_f),
        witness_c=None,
        witness_subset=None,
        witness_normal=None,
        search_budget=budget,
        note=note,
    )


def nsp_check_2d(
    cfg: Configuration, s: int, q: float = 1.0, search: NspSearch = NspSearch()
) -> NspCertificate:
    """Certificate for 2D networks (distance or bearing, same geometry).

    Every kernel direction's block-norm profile is either constant
    (translation) or proportional to the distances from some center ``c``
    (rotation about ``c`` for distances, scaling about ``c`` for bearings),
    so the condition reduces to: the ``s`` agents furthest from any ``c``
    never carry at least as much ``q``-mass as the remaining agents.
    """
    if cfg.dim != 2:
        raise ValueError("nsp_check_2d expects a 2D configuration")
    budget = {"kind": "planar", "grid": search.grid, **search.as_dict()}
    return _pointwise_certificate(cfg.positions, s, q, search, search.grid, budget)


def nsp_check_bearing(
    cfg: Configuration, s: int, q: float = 1.0, search: NspSearch = NspSearch()
) -> NspCertificate:
    """Certificate for bearing networks in dimension 2 or 3.

    The kernel is translations plus scaling about a center, so the same
    center search applies with ``c`` ranging over the full ambient space.
    The 3D variant extends the planar statement and is annotated as such.
    """
    note = ""
    grid = search.grid
    if cfg.dim == 3:
        note = "3D bearing check: same center inequality swept over R^3 (extension)"
        grid = search.volume_grid
    budget = {"kind": f"bearing-{cfg.dim}d", "grid": grid, **search.as_dict()}
    return _pointwise_certificate(cfg.positions, s, q, search, grid, budget, note=note)


def _fibonacci_directions(count: int) -> np.ndarray:
    i = np.arange(count) + 0.5
    z = 1.0 - 2.0 * i / count
    r = np.sqrt(np.maximum(0.0, 1.0 - z**2))
    golden = (1.0 + math.sqrt(5.0)) / 2.0
    phi = 2.0 * math.pi * i / golden
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def _plane_basis(normal: np.ndarray) -> np.ndarray:
    """Orthonormal in-plane basis, continuous in ``normal`` near the input."""
    n = normal / np.linalg.norm(normal)
    helper = np.zeros(3)
    helper[int(np.argmin(np.abs(n)))] = 1.0
    b1 = np.cross(n, helper)
    b1 /= np.linalg.norm(b1)
    b2 = np.cross(n, b1)
    return np.column_stack([b1, b2])


def nsp_check_3d_distance(
    cfg: Configuration,
    s: int,
    q: float = 1.0,
    plane_count: int = 200,
    search: NspSearch = NspSearch(),
) -> NspCertificate:
    """Certificate for 3D distance networks via plane projections.

    A kernel direction is a screw field: rotation about some axis plus a
    slide h along it, with block norms sqrt(k^2 r_i^2 + h^2) where r_i is
    the distance of agent i from the axis.  Both the margin and the
    worst-case mass ratio are maximized at h = 0 (the s furthest agents
    have the larger r_i, and d/dh of each compared sum pairs them against
    smaller-r agents with the opposite sign), so it suffices to check every
    projection onto a plane orthogonal to a candidate axis.  Axes sample a
    low-discrepancy spiral on the sphere; the worst few are refined jointly
    over (axis, in-plane center).
    """
    if cfg.dim != 3:
        raise ValueError("nsp_check_3d_distance expects a 3D configuration")
    points = cfg.positions
    n = points.shape[0]
    _validate_level(n, s, q)
    budget = {"kind": "planar-projections", "plane_count": plane_count, **search.as_dict()}
    if 2 * s >= n:
        return _translation_violation(points, s, q, budget)

    normals = _fibonacci_directions(plane_count)
    per_plane: list[tuple[float, np.ndarray]] = []
    coarse = max(21, search.grid // 3)
    for normal in normals:
        basis = _plane_basis(normal)
        proj = points @ basis
        cands = np.vstack([_grid_candidates(proj, coarse, search.expand), proj])
        f = _margin_f(proj, s, q, cands)
        k = int(np.argmax(f))
        per_plane.append((float(f[k]), cands[k]))

    order = np.argsort([-m for m, _ in per_plane], kind="stable")
    best_f, best_normal, best_c2 = -np.inf, None, None
    scale = max(1.0, float(np.abs(points).max()))

    def objective(theta: np.ndarray, base_normal: np.ndarray) -> float:
        normal = base_normal + theta[0] * tangent[:, 0] + theta[1] * tangent[:, 1]
        norm = np.linalg.norm(normal)
        if norm < 1e-12:
            return np.inf
        basis = _plane_basis(normal / norm)
        proj = points @ basis
        return -_margin_f(proj, s, q, theta[2:].reshape(1, 2))[0]

    for idx in order[: search.plane_refine_starts]:
        base_normal = normals[idx]
        tangent = _plane_basis(base_normal)
        f0, c0 = per_plane[idx]
        if f0 > best_f:
            best_f, best_normal, best_c2 = f0, base_normal.copy(), c0.copy()
        res = minimize(
            objective,
            np.array([0.0, 0.0, c0[0], c0[1]]),
            args=(base_normal,),
            method="Nelder-Mead",
            options={
                "maxiter": search.plane_refine_iterations,
                "xatol": 1e-10 * scale,
                "fatol": 1e-12,
            },
        )
        if -res.fun > best_f:
            theta = np.asarray(res.x, dtype=float)
            normal = base_normal + theta[0] * tangent[:, 0] + theta[1] * tangent[:, 1]
            best_f = float(-res.fun)
            best_normal = normal / np.linalg.norm(normal)
            best_c2 = theta[2:].copy()

    assert best_normal is not None and best_c2 is not None
    basis = _plane_basis(best_normal)
    witness_c3 = basis @ best_c2
    if best_f >= 0:
        proj = points @ basis
        return NspCertificate(
            s=s,
            q=q,
            holds="violated",
            margin=float(-best_f),
            witness_c=tuple(float(v) for v in witness_c3),
            witness_subset=_furthest_subset(proj, s, best_c2),
            witness_normal=tuple(float(v) for v in best_normal),
            search_budget=budget,
        )
    return NspCertificate(
        s=s,
        q=q,
        holds="yes",
        margin=float(-best_f),
        witness_c=None,
        witness_subset=None,
        witness_normal=None,
        search_budget=budget,
    )


def nsp_check(
    cfg: Configuration, kind: str, s: int, q: float = 1.0, search: NspSearch = NspSearch()
) -> NspCertificate:
    """Certificate for level ``s``, dispatched on measurement kind and dimension."""
    if kind == "bearing":
        return nsp_check_bearing(cfg, s, q, search)
    if kind == "distance" and cfg.dim == 2:
        return nsp_check_2d(cfg, s, q, search)
    if kind == "distance" and cfg.dim == 3:
        return nsp_check_3d_distance(cfg, s, q, search=search)
    raise ValueError(f"unsupported kind/dim: {kind!r}/{cfg.dim}")


def max_certified_errors(
    cfg: Configuration,
    graph: SensorGraph,
    kind: str,
    q: float = 1.0,
    search: NspSearch = NspSearch(),
    max_s: int | None = None,
) -> int:
    """Largest level ``s`` whose certificate holds; 0 when s=1 already fails.

    The condition is nested in ``s`` (a larger furthest-subset only gains
    mass), so the scan stops at the first violation.
    """
    report = rigidity_report(rigidity_matrix(cfg, graph, kind))
    if not report.is_rigid:
        raise NotRigidError(
            f"configuration is not infinitesimally rigid for {kind} "
            f"(rank {report.rank} of {report.max_rank}); certificates assume maximal rank"
        )
    n = cfg.num_agents
    upper = (n - 1) // 2
    if max_s is not None:
        upper = min(upper, max_s)
    level = 0
    for s in range(1, upper + 1):
        cert = nsp_check(cfg, kind, s, q, search)
        if cert.holds != "yes":
            break
        level = s
    return level


def c_stability(q: float, tau: float) -> float:
    """Multiplier of the block-compressibility tail in the robust bound."""
    if not 0 < q <= 1:
        raise ValueError(f"q must lie in (0, 1], got {q}")
    if not 0 <= tau < 1:
        raise ValueError(f"tau must lie in [0, 1), got {tau}")
    return 2.0 ** (2.0 / q - 1.0) * ((1.0 + tau**q) / (1.0 - tau**q)) ** (1.0 / q)


def c_noise(q: float, tau: float, gamma: float) -> float:
    """Multiplier of the noise radius in the robust bound."""
    if not 0 < q <= 1:
        raise ValueError(f"q must lie in (0, 1], got {q}")
    if not 0 <= tau < 1:
        raise ValueError(f"tau must lie in [0, 1), got {tau}")
    return 2.0 ** (2.0 / q) * (1.0 / (1.0 - tau**q)) ** (1.0 / q) * gamma


def _ratio_values(points: np.ndarray, s: int, cands: np.ndarray) -> np.ndarray:
    dists = cdist(np.atleast_2d(cands), points)
    top, rest = _subset_split(dists, s)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(rest > 0, top / rest, np.inf)


def _max_ratio_center(points: np.ndarray, s: int, search: NspSearch, grid: int) -> float:
    cands = np.vstack([_grid_candidates(points, grid, search.expand), points])
    r = _ratio_values(points, s, cands)
    finite = np.where(np.isfinite(r), r, -np.inf)
    order = np.argsort(-finite, kind="stable")
    best = float(finite[order[0]])
    scale = max(1.0, float(np.abs(points).max()))
    for idx in order[: search.refine_starts]:
        res = minimize(
            lambda c: -_ratio_values(points, s, c.reshape(1, -1))[0],
            cands[idx],
            method="Nelder-Mead",
            options={
                "maxiter": search.refine_iterations,
                "xatol": 1e-10 * scale,
                "fatol": 1e-14,
            },
        )
        if np.isfinite(res.fun) and -res.fun > best:
            best = float(-res.fun)
    return best


def _tau_bar(cfg: Configuration, kind: str, s: int, search: NspSearch) -> float:
    """Worst top-s to rest block-mass ratio over the analytic kernel (q=1).

    The translation direction gives the constant profile ratio s/(n-s);
    center-type directions give distance profiles handled by the center
    search; for 3D distance the screw slide is again worst at h = 0, so the
    plane projections cover everything.
    """
    points = cfg.positions
    n = points.shape[0]
    best = s / (n - s)
    if kind == "bearing" or cfg.dim == 2:
        grid = search.volume_grid if cfg.dim == 3 else search.grid
        best = max(best, _max_ratio_center(points, s, search, grid))
        return best
    # 3D distance: ratio of projected distance profiles per candidate axis.
    normals = _fibonacci_directions(200)
    coarse = max(21, search.grid // 3)
    per_plane: list[float] = []
    projections = []
    for normal in normals:
        proj = points @ _plane_basis(normal)
        projections.append(proj)
        cands = np.vstack([_grid_candidates(proj, coarse, search.expand), proj])
        r = _ratio_values(proj, s, cands)
        per_plane.append(float(np.max(np.where(np.isfinite(r), r, -np.inf))))
    order = np.argsort([-v for v in per_plane], kind="stable")
    best = max(best, per_plane[order[0]])
    for idx in order[: search.plane_refine_starts]:
        refined = _max_ratio_center(projections[idx], s, search, coarse)
        best = max(best, refined)
    return best


def robust_constants(
    cfg: Configuration,
    graph: SensorGraph,
    kind: str,
    s: int,
    tau_choice: float | None = None,
    search: NspSearch = NspSearch(),
) -> RobustConstants:
    """Evaluate the q=1 robust recovery constants for one network and level.

    ``tau_bar`` is the supremum of the top-s to rest mass ratio over the
    analytic kernel; any ``tau`` in [tau_bar, 1) is admissible and trades
    tightness between the two constants.  ``gamma`` couples the certificate
    to the spectral rigidity index: (1 + tau_bar + tau) * sqrt(n / lambda).
    """
    if s < 1 or s >= cfg.num_agents:
        raise ValueError("s must satisfy 1 <= s < num_agents")
    report = rigidity_report(rigidity_matrix(cfg, graph, kind))
    if not report.is_rigid:
        raise NotRigidError(
            f"configuration is not infinitesimally rigid for {kind}; "
            "robust constants assume maximal rank"
        )
    tau_bar = _tau_bar(cfg, kind, s, search)
    if tau_bar >= 1.0:
        raise NspViolatedError(
            f"certificate fails at s={s} (worst mass ratio {tau_bar:.6f} >= 1); "
            "robust constants are undefined"
        )
    if tau_choice is None:
        tau = tau_bar
    else:
        if not tau_bar <= tau_choice < 1.0:
            raise ValueError(
                f"tau_choice must lie in [{tau_bar:.6f}, 1), got {tau_choice}"
            )
        tau = float(tau_choice)
    gamma = (1.0 + tau_bar + tau) * math.sqrt(cfg.num_agents / report.lambda_tilde)
    return RobustConstants(
        s=s,
        tau_bar=float(tau_bar),
        tau=tau,
        gamma=float(gamma),
        lambda_tilde=report.lambda_tilde,
        c_stability=c_stability(1.0, tau),
        c_noise=c_noise(1.0, tau, gamma),
    )


def sigma_qs(x: BlockVector, s: int, q: float = 1.0) -> float:
    """Distance (in the mixed norm) from ``x`` to the nearest s-block-sparse
    vector: the norm of ``x`` with its s largest blocks zeroed.

    Ties between equal block norms keep the lower index among the removed
    blocks, so the result is deterministic.
    """
    if s < 0:
        raise ValueError("s must be non-negative")
    if s == 0:
        return block_norm(x, q)
    norms = x.block_norms()
    if s >= norms.size:
        return 0.0
    keep = np.ones(norms.size, dtype=bool)
    order = np.argsort(-norms, kind="stable")
    keep[order[:s]] = False
    return block_norm(x.blocks[keep], q)
