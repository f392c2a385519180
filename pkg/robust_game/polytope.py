"""
Convex polytopes over the masked adversary-policy parameters.

H-representation {theta : E theta <= b} is the working form; vertices are
enumerated on demand. Every LP goes through scipy's HiGHS interface.
"""
import itertools
import logging
from dataclasses import dataclass
from math import comb
from typing import NamedTuple, Optional, Union

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import ConvexHull, HalfspaceIntersection, QhullError, cKDTree

from robust_game.errors import ContractViolationError, FalsificationError
from robust_game.settings import get_settings
from robust_game.utils import numerical_rank

logger = logging.getLogger(__name__)

# Upper limit on p-subsets tried by the combinatorial fallback in high dimension.
MAX_COMBINATORIAL_SUBSETS = 200_000
_CHUNK = 200_000


@dataclass(frozen=True)
class HPolytope:
    """Inequality representation {theta : E theta <= b}."""

    E: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        E = np.atleast_2d(np.asarray(self.E, dtype=float))
        b = np.asarray(self.b, dtype=float).ravel()
        if E.shape[0] != b.size:
            raise ContractViolationError(f"E has {E.shape[0]} rows but b has {b.size} entries")
        if E.shape[0] and np.any(np.all(E == 0.0, axis=1)):
            raise ContractViolationError("HPolytope rows must be nonzero")
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "b", b)

    @classmethod
    def box(cls, lower, upper) -> "HPolytope":
        lower = np.asarray(lower, dtype=float).ravel()
        upper = np.asarray(upper, dtype=float).ravel()
        p = lower.size
        return cls(E=np.vstack([np.eye(p), -np.eye(p)]), b=np.concatenate([upper, -lower]))

    @property
    def p(self) -> int:
        return self.E.shape[1]

    @property
    def m(self) -> int:
        return self.E.shape[0]

    def contains(self, theta: np.ndarray, tol: float = 1e-9) -> Union[bool, np.ndarray]:
        """Membership of one point (p,) or a batch (n, p)."""
        theta = np.asarray(theta, dtype=float)
        inside = np.all(theta @ self.E.T <= self.b + tol, axis=-1)
        return bool(inside) if theta.ndim == 1 else inside

    def to_dict(self) -> dict:
        return {"E": self.E.tolist(), "b": self.b.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "HPolytope":
        return cls(E=np.asarray(data["E"], dtype=float), b=np.asarray(data["b"], dtype=float))


@dataclass(frozen=True)
class VPolytope:
    """Vertex representation. degenerate marks a lower-dimensional set."""

    vertices: np.ndarray
    degenerate: bool = False

    def __post_init__(self):
        object.__setattr__(self, "vertices", np.atleast_2d(np.asarray(self.vertices, dtype=float)))

    @property
    def n_v(self) -> int:
        return 0 if self.vertices.size == 0 else self.vertices.shape[0]

    @property
    def p(self) -> int:
        return self.vertices.shape[1]

    def to_dict(self) -> dict:
        return {"vertices": self.vertices.tolist(), "degenerate": self.degenerate}


class CutReport(NamedTuple):
    """Vertices removed by and created by a cut."""

    removed: np.ndarray
    created: np.ndarray
    kept: np.ndarray


def _lp_max(c: np.ndarray, E: np.ndarray, b: np.ndarray):
    """max c.theta over E theta <= b. Returns (status, value, argmax); status 0 ok, 2 infeasible, 3 unbounded."""
    if E.shape[0] == 0:
        return (0, 0.0, np.zeros(E.shape[1])) if not np.any(c) else (3, None, None)
    res = linprog(-np.asarray(c, dtype=float), A_ub=E, b_ub=b, bounds=[(None, None)] * E.shape[1], method="highs")
    if res.status == 0:
        return 0, float(-res.fun), res.x
    return res.status, None, None


def is_empty(poly: HPolytope) -> bool:
    if poly.m == 0:
        return False
    status, _, _ = _lp_max(np.zeros(poly.p), poly.E, poly.b)
    return status == 2


def _drop_zero_rows(E: np.ndarray, b: np.ndarray, tol: float):
    zero = np.all(np.abs(E) == 0.0, axis=1)
    if np.any(b[zero] < -tol):
        raise FalsificationError("A zero-regressor constraint violates the disturbance bound")
    return E[~zero], b[~zero]


def add_halfspaces(poly: HPolytope, E_new: np.ndarray, b_new: np.ndarray, prune: bool = True,
                   tol: Optional[float] = None) -> HPolytope:
    """
    Intersect poly with {theta : E_new theta <= b_new}.

    With prune, a new row is stored only when it cuts the current set, and
    stored rows that the cut made redundant are removed afterwards.

    Raises:
        ContractViolationError: If E_new does not have p columns
        FalsificationError: If the intersection is empty
    """
    tol = get_settings().lp_tolerance if tol is None else tol
    E_new = np.atleast_2d(np.asarray(E_new, dtype=float))
    b_new = np.asarray(b_new, dtype=float).ravel()
    if E_new.size == 0:
        return poly
    if E_new.shape[1] != poly.p:
        raise ContractViolationError(f"New constraints have {E_new.shape[1]} columns, polytope has p={poly.p}")
    E_new, b_new = _drop_zero_rows(E_new, b_new, tol)

    if not prune:
        out = HPolytope(np.vstack([poly.E, E_new]), np.concatenate([poly.b, b_new]))
        if is_empty(out):
            raise FalsificationError("Halfspace intersection is empty")
        return out

    E, b = poly.E, poly.b
    added = 0
    for row, rhs in zip(E_new, b_new):
        status, upper, _ = _lp_max(row, E, b)
        if status == 2:
            raise FalsificationError("Halfspace intersection is empty")
        if status == 0 and upper <= rhs + tol:
            logger.debug("Redundant halfspace skipped (max %.3e <= %.3e)", upper, rhs)
            continue
        status, neg_lower, _ = _lp_max(-row, E, b)
        if status == 0 and -neg_lower > rhs + tol:
            raise FalsificationError("Halfspace intersection is empty")
        E = np.vstack([E, row])
        b = np.append(b, rhs)
        added += 1

    if not added:
        return poly
    E, b = _remove_redundant(E, b, tol)
    return HPolytope(E, b)


def _remove_redundant(E: np.ndarray, b: np.ndarray, tol: float):
    keep = np.ones(len(b), dtype=bool)
    for i in range(len(b)):
        keep[i] = False
        others = keep.copy()
        status, value, _ = _lp_max(E[i], E[others], b[others]) if others.any() else (3, None, None)
        if status == 0 and value <= b[i] + tol:
            logger.debug("Stored halfspace %d became redundant", i)
        else:
            keep[i] = True
    return E[keep], b[keep]


def is_bounded_by_data(states) -> bool:
    """True iff the recorded states span the whole state space."""
    X = np.atleast_2d(np.asarray(states, dtype=float))
    if X.size == 0:
        return False
    return numerical_rank(X.T, get_settings().rank_tolerance) == X.shape[1]


def is_bounded(poly: HPolytope) -> bool:
    """
    True iff every coordinate is bounded above and below on the set.

    Raises:
        ContractViolationError: If the polytope is empty
    """
    for i in range(poly.p):
        for sign in (1.0, -1.0):
            c = np.zeros(poly.p)
            c[i] = sign
            status, _, _ = _lp_max(c, poly.E, poly.b) if poly.m else (3, None, None)
            if status == 2:
                raise ContractViolationError("Boundedness test on an empty polytope")
            if status != 0:
                return False
    return True


def bounding_box(poly: HPolytope):
    """Tightest axis-aligned box (lower, upper) around a bounded polytope."""
    lower = np.empty(poly.p)
    upper = np.empty(poly.p)
    for i in range(poly.p):
        c = np.zeros(poly.p)
        c[i] = 1.0
        s_hi, hi, _ = _lp_max(c, poly.E, poly.b)
        s_lo, neg_lo, _ = _lp_max(-c, poly.E, poly.b)
        if s_hi != 0 or s_lo != 0:
            raise ContractViolationError("Bounding box of an unbounded or empty polytope")
        lower[i], upper[i] = -neg_lo, hi
    return lower, upper


def chebyshev_center(poly: HPolytope):
    """Center and radius of the largest inscribed ball."""
    norms = np.linalg.norm(poly.E, axis=1)
    A_ub = np.hstack([poly.E, norms[:, None]])
    c = np.zeros(poly.p + 1)
    c[-1] = -1.0
    bounds = [(None, None)] * poly.p + [(0, None)]
    res = linprog(c, A_ub=A_ub, b_ub=poly.b, bounds=bounds, method="highs")
    if res.status == 2:
        raise FalsificationError("Chebyshev center of an empty polytope")
    if res.status != 0:
        raise ContractViolationError(f"Chebyshev center LP failed: {res.message}")
    return res.x[:-1], float(res.x[-1])


def _dedupe(V: np.ndarray, tol: float) -> np.ndarray:
    if len(V) <= 1:
        return V
    tree = cKDTree(V)
    removed = np.zeros(len(V), dtype=bool)
    keep = []
    for i in range(len(V)):
        if removed[i]:
            continue
        keep.append(i)
        for j in tree.query_ball_point(V[i], tol):
            if j > i:
                removed[j] = True
    V = V[keep]
    return V[np.lexsort(V.T[::-1])]


def _normalized(poly: HPolytope):
    norms = np.linalg.norm(poly.E, axis=1)
    return poly.E / norms[:, None], poly.b / norms


def _feasible(V: np.ndarray, En: np.ndarray, bn: np.ndarray, tol_feas: float) -> np.ndarray:
    return V[np.all(V @ En.T <= bn + tol_feas, axis=1)]


def _combinatorial_vertices(poly: HPolytope, tol_feas: float) -> np.ndarray:
    p = poly.p
    En, bn = _normalized(poly)
    found = []
    subsets = itertools.combinations(range(poly.m), p)
    while True:
        chunk = np.array(list(itertools.islice(subsets, _CHUNK)), dtype=int)
        if chunk.size == 0:
            break
        A = En[chunk]
        rhs = bn[chunk]
        regular = np.abs(np.linalg.det(A)) > 1e-12
        if not regular.any():
            continue
        theta = np.linalg.solve(A[regular], rhs[regular][..., None])[..., 0]
        found.append(_feasible(theta, En, bn, tol_feas))
    return np.vstack(found) if found else np.empty((0, p))


def _extreme_points(V: np.ndarray) -> np.ndarray:
    """Drop candidates that are not vertices of their own convex hull (full-dimensional sets only)."""
    p = V.shape[1]
    if len(V) <= p + 1:
        return V
    scale = float(np.ptp(V, axis=0).max())
    if scale == 0.0:
        return V[:1]
    try:
        hull = ConvexHull((V - V.mean(axis=0)) / scale)
    except QhullError:
        return V
    return V[np.sort(hull.vertices)]


def _interval_vertices(poly: HPolytope) -> np.ndarray:
    s_hi, hi, _ = _lp_max(np.ones(1), poly.E, poly.b)
    s_lo, neg_lo, _ = _lp_max(-np.ones(1), poly.E, poly.b)
    return np.array([[-neg_lo], [hi]])


def independent_blocks(poly: HPolytope) -> list[np.ndarray]:
    """Groups of coordinates that never appear together in a row; the polytope is their Cartesian product."""
    support = csr_matrix(poly.E != 0, dtype=float)
    n_blocks, labels = connected_components(support.T @ support, directed=False)
    return [np.flatnonzero(labels == k) for k in range(n_blocks)]


def restrict(poly: HPolytope, coords: np.ndarray) -> HPolytope:
    """Rows touching `coords`, projected onto them; exact when `coords` is an independent block."""
    rows = np.any(poly.E[:, coords] != 0, axis=1)
    return HPolytope(poly.E[np.ix_(rows, coords)], poly.b[rows])


def _product_vertices(poly: HPolytope, blocks: list[np.ndarray], tol_merge: Optional[float]) -> VPolytope:
    parts = [enumerate_vertices(restrict(poly, idx), tol_merge) for idx in blocks]
    grids = np.meshgrid(*[np.arange(part.n_v) for part in parts], indexing="ij")
    V = np.empty((grids[0].size, poly.p))
    for idx, part, grid in zip(blocks, parts, grids):
        V[:, idx] = part.vertices[grid.ravel()]
    logger.debug("Vertex set is a product of %d blocks of sizes %s", len(blocks), [part.n_v for part in parts])
    return VPolytope(V[np.lexsort(V.T[::-1])], degenerate=any(part.degenerate for part in parts))


def enumerate_vertices(poly: HPolytope, tol_merge: Optional[float] = None) -> VPolytope:
    """
    Exact vertex set of a bounded, nonempty polytope.

    Independent coordinate blocks are enumerated separately and combined.
    Within a block, p <= 3 solves every p-subset of rows and keeps the feasible points;
    p > 3 uses Qhull's halfspace intersection around the Chebyshev center.
    Feasibility is checked on unit-norm rows with a tolerance tied to the
    inscribed radius. In low dimension, candidates that are not extreme
    points of their own hull are dropped.

    Raises:
        ContractViolationError: If the polytope is unbounded, or degenerate in too high a dimension
        FalsificationError: If the polytope is empty
    """
    settings = get_settings()
    tol_merge = settings.vertex_merge_tol if tol_merge is None else tol_merge
    if not is_bounded(poly):
        raise ContractViolationError("Vertex enumeration needs a bounded polytope; collect more data")
    blocks = independent_blocks(poly)
    if len(blocks) > 1:
        return _product_vertices(poly, blocks, tol_merge)
    center, radius = chebyshev_center(poly)
    degenerate = radius <= tol_merge
    En, bn = _normalized(poly)
    tol_feas = max(1e-11 * max(1.0, float(np.abs(bn).max())), 1e-9 * radius)

    if poly.p == 1:
        return VPolytope(_dedupe(_interval_vertices(poly), tol_merge), degenerate=degenerate)

    if poly.p <= 3:
        V = _combinatorial_vertices(poly, tol_feas)
    elif not degenerate:
        try:
            hs = HalfspaceIntersection(np.hstack([En, -bn[:, None]]), center)
            V = hs.intersections
            V = _feasible(V[np.all(np.isfinite(V), axis=1)], En, bn, tol_feas)
        except QhullError as e:
            logger.warning("Qhull halfspace intersection failed (%s); trying combinatorial enumeration", e)
            V = _degenerate_fallback(poly, tol_feas)
    else:
        V = _degenerate_fallback(poly, tol_feas)

    n_candidates = len(V)
    V = _dedupe(V, tol_merge)
    if not degenerate and poly.p <= 3:
        V = _dedupe(_extreme_points(V), tol_merge)
    logger.debug("Enumerated %d vertices from %d candidates in dimension %d", len(V), n_candidates, poly.p)
    return VPolytope(V, degenerate=degenerate)


def _degenerate_fallback(poly: HPolytope, tol_feas: float) -> np.ndarray:
    n_subsets = comb(poly.m, poly.p)
    if n_subsets > MAX_COMBINATORIAL_SUBSETS:
        raise ContractViolationError(
            f"Degenerate polytope in dimension {poly.p} with {poly.m} constraints; "
            f"{n_subsets} subsets exceed the combinatorial limit"
        )
    return _combinatorial_vertices(poly, tol_feas)


def hull_to_hpolytope(vpoly: VPolytope) -> HPolytope:
    """H-representation of the convex hull of a full-dimensional vertex set."""
    V = vpoly.vertices
    if vpoly.p == 1:
        return HPolytope(E=np.array([[1.0], [-1.0]]), b=np.array([V.max(), -V.min()]))
    hull = ConvexHull(V)
    eq = hull.equations
    return HPolytope(E=eq[:, :-1], b=-eq[:, -1])


def _shoelace(V: np.ndarray) -> float:
    centroid = V.mean(axis=0)
    order = np.argsort(np.arctan2(V[:, 1] - centroid[1], V[:, 0] - centroid[0]))
    x, y = V[order, 0], V[order, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def volume_with_error(poly: Union[HPolytope, VPolytope], n_samples: int = 1_000_000, seed: int = 0):
    """
    Volume and its standard error.

    p = 2 is exact (shoelace); p >= 3 is a Monte-Carlo hit ratio over the
    tightest bounding box, seeded for reproducibility.
    """
    if isinstance(poly, HPolytope):
        if is_empty(poly):
            return 0.0, 0.0
        if poly.p <= 2:
            poly_v = enumerate_vertices(poly)
            return volume_with_error(poly_v, n_samples, seed)
        hpoly = poly
        lower, upper = bounding_box(hpoly)
    else:
        if poly.n_v == 0 or poly.degenerate or poly.n_v < poly.p + 1:
            return 0.0, 0.0
        V = poly.vertices
        if poly.p == 1:
            return float(V.max() - V.min()), 0.0
        if poly.p == 2:
            return float(_shoelace(V)), 0.0
        try:
            hpoly = hull_to_hpolytope(poly)
        except QhullError:
            return 0.0, 0.0
        lower, upper = V.min(axis=0), V.max(axis=0)

    if hpoly.p == 1:
        return float(upper[0] - lower[0]), 0.0
    box_volume = float(np.prod(upper - lower))
    if box_volume <= 0.0:
        return 0.0, 0.0
    rng = np.random.default_rng(seed)
    hits = 0
    remaining = n_samples
    while remaining > 0:
        n = min(_CHUNK, remaining)
        U = lower + (upper - lower) * rng.random((n, hpoly.p))
        hits += int(np.count_nonzero(hpoly.contains(U)))
        remaining -= n
    ratio = hits / n_samples
    return box_volume * ratio, box_volume * np.sqrt(ratio * (1.0 - ratio) / n_samples)


def volume(poly: Union[HPolytope, VPolytope], n_samples: int = 1_000_000, seed: int = 0) -> float:
    return volume_with_error(poly, n_samples, seed)[0]


def cut_report(before: VPolytope, after: VPolytope, tol: float = 1e-7) -> CutReport:
    """Compare vertex sets across a cut: which vertices vanished and which appeared."""
    if before.n_v == 0 or after.n_v == 0:
        return CutReport(before.vertices, after.vertices, np.empty((0, after.p)))
    dist_after, _ = cKDTree(after.vertices).query(before.vertices)
    dist_before, _ = cKDTree(before.vertices).query(after.vertices)
    return CutReport(
        removed=before.vertices[dist_after > tol],
        created=after.vertices[dist_before > tol],
        kept=after.vertices[dist_before <= tol],
    )
