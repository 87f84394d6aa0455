"""Polyhedral sets and cones.

Sets are kept in halfspace form, optionally *lifted* with auxiliary
variables::

    {x : exists u with  A @ x + aux @ u <= b}

which lets nonlinear-looking solvency regions (epigraphs of piecewise
linear costs) stay exact without projecting them. Cones additionally have
a generator form, :class:`VCone`; the two are converted by a small double
description routine meant for desk-scale dimensions.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, InputError, NumericalError
from .lp import LPBuilder, solve_lp

ZERO_TOL = 1e-9
RI_SLACK = 1e-7
MAX_DD_DIM = 6


@dataclass(frozen=True, eq=False)
class HPolyhedron:
    """``{x : exists u, A x + aux u <= b}``; a cone when ``b == 0``."""

    A: np.ndarray
    b: np.ndarray
    aux: np.ndarray = field(default=None)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        if A.size == 0:
            A = A.reshape(0, A.shape[-1] if A.ndim == 2 else 0)
        b = np.asarray(self.b, dtype=float).ravel()
        if b.size != A.shape[0]:
            raise DimensionError(f"A has {A.shape[0]} rows but b has {b.size}")
        if self.aux is None:
            aux = np.zeros((A.shape[0], 0))
        else:
            aux = np.asarray(self.aux, dtype=float)
            n_aux = aux.shape[-1] if aux.ndim == 2 else (aux.size // max(A.shape[0], 1))
            aux = aux.reshape(A.shape[0], n_aux)
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b)) and np.all(np.isfinite(aux))):
            raise InputError("polyhedron entries must be finite")
        for arr in (A, b, aux):
            arr.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "aux", aux)

    @classmethod
    def cone(cls, A) -> "HPolyhedron":
        A = np.atleast_2d(np.asarray(A, dtype=float))
        return cls(A, np.zeros(A.shape[0]))

    @classmethod
    def full_space(cls, d: int) -> "HPolyhedron":
        return cls(np.zeros((0, d)), np.zeros(0))

    @classmethod
    def negative_orthant(cls, d: int) -> "HPolyhedron":
        return cls(np.eye(d), np.zeros(d))

    @property
    def d(self) -> int:
        return self.A.shape[1]

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n_aux(self) -> int:
        return self.aux.shape[1]

    @property
    def lifted(self) -> bool:
        return self.n_aux > 0

    @property
    def is_cone(self) -> bool:
        return bool(np.all(np.abs(self.b) <= ZERO_TOL))

    def contains(self, x, tol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        if not self.lifted:
            return bool(np.all(self.A @ x <= self.b + tol))
        bld = LPBuilder()
        u = bld.add_vars(self.n_aux, lb=-np.inf)
        bld.add_rows(u, self.aux, "<=", self.b - self.A @ x + tol)
        bld.set_objective(u[:1], [0.0])
        return solve_lp(bld.build()).status == "optimal"

    def __repr__(self) -> str:
        kind = "cone" if self.is_cone else "polyhedron"
        lift = f", aux={self.n_aux}" if self.lifted else ""
        return f"HPolyhedron({kind}, d={self.d}, m={self.m}{lift})"


@dataclass(frozen=True, eq=False)
class VCone:
    """``cone(generators) + span(lineality)``."""

    generators: np.ndarray
    lineality: np.ndarray = field(default=None)

    def __post_init__(self):
        g = np.asarray(self.generators, dtype=float)
        if g.ndim == 1:
            g = g.reshape(1, -1) if g.size else g.reshape(0, 0)
        lin = self.lineality
        if lin is None:
            lin = np.zeros((0, g.shape[1]))
        lin = np.asarray(lin, dtype=float)
        if lin.ndim == 1:
            lin = lin.reshape(1, -1) if lin.size else lin.reshape(0, g.shape[1])
        if g.size == 0:
            g = np.zeros((0, lin.shape[1]))
        if lin.size == 0:
            lin = np.zeros((0, g.shape[1]))
        if g.shape[1] != lin.shape[1]:
            raise DimensionError("generator and lineality dimensions differ")
        g.setflags(write=False)
        lin.setflags(write=False)
        object.__setattr__(self, "generators", g)
        object.__setattr__(self, "lineality", lin)

    @classmethod
    def of_dim(cls, d: int, generators=(), lineality=()) -> "VCone":
        g = np.asarray(generators, dtype=float).reshape(-1, d)
        lin = np.asarray(lineality, dtype=float).reshape(-1, d)
        return cls(g, lin)

    @property
    def d(self) -> int:
        return self.generators.shape[1]

    def __repr__(self) -> str:
        return f"VCone(d={self.d}, generators={len(self.generators)}, lineality={len(self.lineality)})"


# ---------------------------------------------------------------------------
# Double description


def _normalize_rows(M: np.ndarray) -> np.ndarray:
    if M.size == 0:
        return M
    scale = np.max(np.abs(M), axis=1, keepdims=True)
    scale[scale == 0] = 1.0
    return M / scale


def _orthonormal_basis(M: np.ndarray, d: int) -> np.ndarray:
    if M.size == 0:
        return np.zeros((0, d))
    _, s, vt = np.linalg.svd(M, full_matrices=False)
    rank = int(np.sum(s > 1e-10 * max(1.0, s[0])))
    return vt[:rank]


def _canonical_lineality(B: np.ndarray, d: int) -> np.ndarray:
    """Reproducible basis of ``span(B)``: reduced row echelon form, max-abs 1 rows."""
    B = _orthonormal_basis(B, d)
    if B.size == 0:
        return B
    R = B.copy()
    piv_row = 0
    for col in range(d):
        if piv_row >= R.shape[0]:
            break
        p = piv_row + int(np.argmax(np.abs(R[piv_row:, col])))
        if abs(R[p, col]) < 1e-10:
            continue
        R[[piv_row, p]] = R[[p, piv_row]]
        R[piv_row] /= R[piv_row, col]
        for i in range(R.shape[0]):
            if i != piv_row:
                R[i] -= R[i, col] * R[piv_row]
        piv_row += 1
    R[np.abs(R) < 1e-12] = 0.0
    return _normalize_rows(R[:piv_row])


def _dedupe(R: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    out = []
    for r in R:
        if not any(np.max(np.abs(r - q)) <= tol for q in out):
            out.append(r)
    return np.array(out).reshape(-1, R.shape[1] if R.ndim == 2 else 0)


def cone_rays(A: np.ndarray, max_dim: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Extreme rays and lineality basis of ``{z : A z <= 0}``.

    Rays come back normalized to max-abs coordinate 1 and sorted
    lexicographically so that output does not depend on floating noise in
    the processing order.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[1]
    if max_dim is not None and n > max_dim:
        raise DimensionError(f"double description capped at dimension {max_dim}, got {n}")
    rows = [a / np.max(np.abs(a)) for a in A if np.max(np.abs(a), initial=0) > ZERO_TOL]
    L = np.eye(n)
    R = np.zeros((0, n))
    done: list[np.ndarray] = []
    for a in rows:
        a = a / np.linalg.norm(a)
        vl = L @ a if L.size else np.zeros(0)
        if vl.size and np.max(np.abs(vl)) > ZERO_TOL:
            k = int(np.argmax(np.abs(vl)))
            l0 = L[k] * (-np.sign(vl[k]))
            al0 = float(a @ l0)
            others = np.delete(L, k, axis=0)
            L = others - np.outer(others @ a / al0, l0) if others.size else np.zeros((0, n))
            L = _orthonormal_basis(L, n)
            if R.size:
                R = R - np.outer(R @ a / al0, l0)
            R = _normalize_rows(np.vstack([R, l0[None, :]]))
            done.append(a)
            continue
        s = R @ a if R.size else np.zeros(0)
        pos = np.flatnonzero(s > ZERO_TOL)
        neg = np.flatnonzero(s < -ZERO_TOL)
        keep = np.flatnonzero(s <= ZERO_TOL)
        new = []
        if pos.size and neg.size:
            P = np.array(done) if done else np.zeros((0, n))
            Z = np.abs(R @ P.T) <= 1e-8 if P.size else np.zeros((R.shape[0], 0), dtype=bool)
            need = n - L.shape[0] - 2
            for p in pos:
                for q in neg:
                    common = Z[p] & Z[q]
                    if common.sum() < need:
                        continue
                    covers = np.all(Z[:, common], axis=1)
                    covers[[p, q]] = False
                    if covers.any():
                        continue
                    r = s[p] * R[q] - s[q] * R[p]
                    new.append(r)
        parts = [R[keep]]
        if new:
            parts.append(np.array(new))
        R = _normalize_rows(np.vstack(parts))
        R = R[np.max(np.abs(R), axis=1) > ZERO_TOL] if R.size else R
        done.append(a)
    lin = _canonical_lineality(L, n)
    if R.size and lin.size:
        # strip lineality components so rays are canonical modulo span(lin)
        Q = _orthonormal_basis(lin, n)
        R = R - (R @ Q.T) @ Q
        R = R[np.max(np.abs(R), axis=1) > 1e-10]
    R = _dedupe(_normalize_rows(R)) if R.size else np.zeros((0, n))
    R[np.abs(R) < 1e-12] = 0.0
    if R.size:
        order = np.lexsort(R.T[::-1])
        R = R[order]
    return R, lin


def halfspaces_to_generators(K: HPolyhedron, max_dim: int | None = MAX_DD_DIM) -> VCone:
    """Generator form of a cone ``{z : A z <= 0}``."""
    if K.lifted:
        K = project(K, max_dim=None)
    if not K.is_cone:
        raise InputError("halfspaces_to_generators needs a cone (b = 0)")
    if K.m == 0:
        return VCone(np.zeros((0, K.d)), np.eye(K.d))
    R, L = cone_rays(K.A, max_dim=max_dim)
    return VCone(R, L)


def generators_to_halfspaces(K: VCone, max_dim: int | None = MAX_DD_DIM) -> HPolyhedron:
    """Halfspace form of ``cone(G) + span(L)`` via the rays of its polar."""
    d = K.d
    rows = np.vstack([K.generators, K.lineality, -K.lineality])
    if rows.shape[0] == 0:
        # the zero cone
        return HPolyhedron.cone(np.vstack([np.eye(d), -np.eye(d)]))
    R, L = cone_rays(rows, max_dim=max_dim)
    A = np.vstack([R, L, -L]) if (R.size or L.size) else np.zeros((0, d))
    return HPolyhedron(A, np.zeros(A.shape[0]))


def polyhedron_vrep(P: HPolyhedron, max_dim: int | None = None):
    """Vertices, recession rays and lineality basis of a plain polyhedron."""
    if P.lifted:
        raise InputError("project a lifted polyhedron before enumerating vertices")
    d = P.d
    H = np.vstack([np.hstack([P.A, -P.b[:, None]]), np.eye(1, d + 1, d) * -1.0])
    R, L = cone_rays(H, max_dim=None if max_dim is None else max_dim + 1)
    tau = R[:, d] if R.size else np.zeros(0)
    verts = R[tau > ZERO_TOL] if R.size else np.zeros((0, d + 1))
    verts = verts[:, :d] / verts[:, d:]
    rays = R[tau <= ZERO_TOL, :d] if R.size else np.zeros((0, d))
    lin = L[:, :d] if L.size else np.zeros((0, d))
    if verts.shape[0] == 0:
        raise InputError("polyhedron is empty")
    return verts, _normalize_rows(rays), lin


def polyhedron_from_vrep(vertices, rays=None, lineality=None, max_dim: int | None = None) -> HPolyhedron:
    """``conv(vertices) + cone(rays) + span(lineality)`` in halfspace form."""
    V = np.atleast_2d(np.asarray(vertices, dtype=float))
    d = V.shape[1]
    R = np.zeros((0, d)) if rays is None else np.asarray(rays, dtype=float).reshape(-1, d)
    L = np.zeros((0, d)) if lineality is None else np.asarray(lineality, dtype=float).reshape(-1, d)
    gens = np.vstack([np.hstack([V, np.ones((V.shape[0], 1))]), np.hstack([R, np.zeros((R.shape[0], 1))])])
    lin = np.hstack([L, np.zeros((L.shape[0], 1))])
    H = generators_to_halfspaces(VCone(gens, lin), max_dim=None if max_dim is None else max_dim + 1)
    A_h = H.A[:, :d]
    beta = H.A[:, d]
    keep = np.max(np.abs(A_h), axis=1) > ZERO_TOL if A_h.size else np.zeros(0, dtype=bool)
    A = A_h[keep]
    b = -beta[keep]
    scale = np.max(np.abs(A), axis=1) if A.size else np.ones(0)
    b = b / scale if A.size else b
    A = A / scale[:, None] if A.size else A
    b[np.abs(b) < 1e-12] = 0.0
    return HPolyhedron(A, b)


def project(P: HPolyhedron, max_dim: int | None = None) -> HPolyhedron:
    """Eliminate the auxiliary variables of a lifted polyhedron."""
    if not P.lifted:
        return P
    full = HPolyhedron(np.hstack([P.A, P.aux]), P.b)
    V, R, L = polyhedron_vrep(full)
    d = P.d
    Vx = _dedupe(V[:, :d])
    Rx = R[:, :d] if R.size else np.zeros((0, d))
    Rx = Rx[np.max(np.abs(Rx), axis=1) > ZERO_TOL] if Rx.size else Rx
    Lx = L[:, :d] if L.size else np.zeros((0, d))
    Lx = Lx[np.max(np.abs(Lx), axis=1) > ZERO_TOL] if Lx.size else Lx
    return polyhedron_from_vrep(Vx, Rx, Lx, max_dim=max_dim)


def minkowski_sum(*sets: HPolyhedron) -> HPolyhedron:
    """Sum of plain polyhedra through their vertex/ray forms."""
    parts = [polyhedron_vrep(P) for P in sets]
    V = parts[0][0]
    for verts, _, _ in parts[1:]:
        V = (V[:, None, :] + verts[None, :, :]).reshape(-1, V.shape[1])
        V = _dedupe(V)
    R = np.vstack([p[1] for p in parts])
    L = np.vstack([p[2] for p in parts])
    return polyhedron_from_vrep(V, R, L)


# ---------------------------------------------------------------------------
# Cone operations


def polar_cone(K: VCone) -> HPolyhedron:
    """``{y : g.y <= 0 for generators g, l.y = 0 for lineality l}``."""
    A = np.vstack([K.generators, K.lineality, -K.lineality])
    return HPolyhedron(A, np.zeros(A.shape[0]))


def _feasible(P: HPolyhedron) -> bool:
    bld = LPBuilder()
    x = bld.add_vars(P.d + P.n_aux, lb=-np.inf)
    if P.m:
        bld.add_rows(x, np.hstack([P.A, P.aux]), "<=", P.b)
    sol = solve_lp(bld.build())
    if sol.status == "numerical":
        raise NumericalError(sol.message)
    return sol.status == "optimal"


def is_empty(P: HPolyhedron) -> bool:
    if P.m == 0 or np.all(P.b >= 0):
        return False
    return not _feasible(P)


def recession_cone(P: HPolyhedron) -> HPolyhedron:
    """``{z : A z <= 0}`` (lifted variables kept, right-hand side dropped)."""
    if is_empty(P):
        raise InputError("recession cone of an empty set")
    return HPolyhedron(P.A, np.zeros(P.m), P.aux)


def lineality_space(K: HPolyhedron) -> VCone:
    """Largest subspace inside a cone: the null space of its rows."""
    if K.lifted:
        K = project(K)
    if not K.is_cone:
        raise InputError("lineality_space expects a cone")
    if K.m == 0:
        return VCone(np.zeros((0, K.d)), np.eye(K.d))
    _, s, vt = np.linalg.svd(K.A)
    rank = int(np.sum(s > 1e-10 * max(1.0, s[0] if s.size else 1.0)))
    null = vt[rank:]
    return VCone(np.zeros((0, K.d)), _canonical_lineality(null, K.d))


def support_function_value(P: HPolyhedron, y) -> float:
    """``sup {x . y : x in P}``; ``inf`` when unbounded."""
    y = np.asarray(y, dtype=float)
    if y.shape != (P.d,):
        raise DimensionError(f"direction must have {P.d} entries")
    bld = LPBuilder()
    x = bld.add_vars(P.d, lb=-np.inf)
    u = bld.add_vars(P.n_aux, lb=-np.inf)
    if P.m:
        bld.add_rows(np.concatenate([x, u]), np.hstack([P.A, P.aux]), "<=", P.b)
    bld.set_objective(x, y)
    sol = solve_lp(bld.build())
    if sol.status == "unbounded":
        return float("inf")
    if sol.status == "infeasible":
        raise InputError("support function of an empty set")
    if sol.status != "optimal":
        raise NumericalError(sol.message)
    if P.is_cone:
        return 0.0
    return float(sol.objective)


def implicit_rows(K: HPolyhedron, box: float = 1.0, tol: float = ZERO_TOL) -> np.ndarray:
    """Rows of a cone ``{y : G y <= 0}`` that hold with equality on the whole cone.

    Row ``g`` is implicit iff ``min g.y`` over the cone intersected with the
    box ``[-box, box]^d`` is zero.
    """
    if K.lifted:
        raise InputError("implicit_rows needs a plain cone")
    G = K.A
    out = np.zeros(K.m, dtype=bool)
    for i in range(K.m):
        if np.max(np.abs(G[i])) <= tol:
            out[i] = True
            continue
        bld = LPBuilder()
        y = bld.add_vars(K.d, lb=-box, ub=box)
        bld.add_rows(y, G, "<=", 0.0)
        bld.set_objective(y, -G[i])
        sol = solve_lp(bld.build())
        if sol.status != "optimal":
            raise NumericalError(f"implicit row test: {sol.status} {sol.message}")
        out[i] = -sol.objective >= -tol
    return out


def affine_hull_basis(K: HPolyhedron, implicit: np.ndarray | None = None) -> np.ndarray:
    """Orthonormal basis of ``aff K`` (= span K for a cone)."""
    if implicit is None:
        implicit = implicit_rows(K)
    E = K.A[implicit]
    if E.size == 0:
        return np.eye(K.d)
    _, s, vt = np.linalg.svd(E)
    rank = int(np.sum(s > 1e-10 * max(1.0, s[0])))
    return vt[rank:]


def relative_interior_membership(K: HPolyhedron, y, slack: float = RI_SLACK,
                                 implicit: np.ndarray | None = None) -> bool:
    """True iff ``y`` lies in the relative interior of the cone ``K``.

    Implicit rows must vanish at ``y`` (within ``slack``); every other row
    must be at most ``-slack``.
    """
    y = np.asarray(y, dtype=float)
    if implicit is None:
        implicit = implicit_rows(K)
    vals = K.A @ y
    if np.any(np.abs(vals[implicit]) > slack):
        return False
    return bool(np.all(vals[~implicit] <= -slack))


def polygon_ball(n_sides: int = 8, radius: float = 1.0) -> HPolyhedron:
    """Regular polygon circumscribing the disc of ``radius`` in the plane.

    Facet normals sit at angles ``2 pi k / n_sides``; with ``n_sides``
    divisible by 4 both coordinate axes are normals.
    """
    if n_sides < 3:
        raise InputError("a polygon needs at least 3 sides")
    theta = 2 * np.pi * np.arange(n_sides) / n_sides
    A = np.column_stack([np.cos(theta), np.sin(theta)])
    A[np.abs(A) < 1e-15] = 0.0
    return HPolyhedron(A, np.full(n_sides, float(radius)))


def orthant_plus(P: HPolyhedron) -> HPolyhedron:
    """``R^d_- + P``."""
    d = P.d
    V, R, L = polyhedron_vrep(P)
    return polyhedron_from_vrep(V, np.vstack([R, -np.eye(d)]), L)


def same_set(P: HPolyhedron, Q: HPolyhedron, tol: float = 1e-7) -> bool:
    """Mutual inclusion of two plain polyhedra, tested row by row with LPs."""
    return includes(P, Q, tol) and includes(Q, P, tol)


def includes(outer: HPolyhedron, inner: HPolyhedron, tol: float = 1e-7) -> bool:
    """``inner`` is a subset of ``outer`` (``outer`` must be plain)."""
    if outer.lifted:
        outer = project(outer)
    for a, beta in zip(outer.A, outer.b):
        if support_function_value(inner, a) > beta + tol * (1 + abs(beta)):
            return False
    return True
