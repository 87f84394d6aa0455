"""Randomized geometry property cases; each returns a list of failure messages."""
from __future__ import annotations

import numpy as np

from illiq.geometry import (HPolyhedron, VCone, affine_hull_basis, generators_to_halfspaces,
                            halfspaces_to_generators, implicit_rows, polar_cone, recession_cone,
                            relative_interior_membership, same_set, support_function_value)

PROBE_EPS = 1e-9
RI_SLACK = 1e-7


def random_cone(rng, d: int | None = None) -> VCone:
    """Cone containing the negative orthant, sometimes with a lineality direction."""
    d = d or int(rng.integers(2, 5))
    extra = rng.normal(size=(int(rng.integers(0, 4)), d))
    gens = np.vstack([-np.eye(d), extra])
    lin = np.zeros((0, d))
    if rng.random() < 0.3:
        v = rng.normal(size=d)
        v[0] = abs(v[0]) + 0.1
        v[1] = -abs(v[1]) - 0.1    # a line through the second orthant stays compatible
        lin = v[None, :]
    return VCone(gens, lin)


def random_polyhedron(rng, d: int | None = None) -> HPolyhedron:
    """``{A x <= b}`` with ``A >= 0`` and ``b >= 0``: contains the negative orthant."""
    d = d or int(rng.integers(2, 5))
    m = int(rng.integers(1, 6))
    A = np.abs(rng.normal(size=(m, d)))
    A[rng.random(A.shape) < 0.3] = 0.0
    b = rng.uniform(0, 2, m)
    return HPolyhedron(A, b)


def bipolar_case(rng) -> list[str]:
    K = random_cone(rng)
    H = generators_to_halfspaces(K)
    dual = halfspaces_to_generators(polar_cone(K))
    back = polar_cone(dual)
    if not same_set(H, back):
        return [f"bipolar mismatch for {K}"]
    return []


def recession_case(rng) -> list[str]:
    P = random_polyhedron(rng)
    R = recession_cone(P)
    out = []
    if not same_set(recession_cone(R), R):
        out.append("recession cone not idempotent")
    if not all(R.contains(-e) for e in np.eye(P.d)):
        out.append("recession cone misses the negative orthant")
    K = HPolyhedron.cone(P.A)
    if not same_set(recession_cone(K), K):
        out.append("recession cone of a cone differs from the cone")
    return out


def support_case(rng) -> list[str]:
    P = random_polyhedron(rng)
    y1 = np.abs(rng.normal(size=P.d))
    y2 = np.abs(rng.normal(size=P.d))
    alpha = float(rng.uniform(0.1, 10))
    s1, s2 = support_function_value(P, y1), support_function_value(P, y2)
    out = []
    sa = support_function_value(P, alpha * y1)
    if np.isfinite(s1):
        if abs(sa - alpha * s1) > 1e-7 * (1 + abs(alpha * s1)):
            out.append(f"homogeneity: {sa} vs {alpha * s1}")
    elif np.isfinite(sa):
        out.append("homogeneity: finite value for a scaled unbounded direction")
    s12 = support_function_value(P, y1 + y2)
    if s12 > s1 + s2 + 1e-7 * (1 + abs(s1) + abs(s2)):
        out.append(f"sublinearity: {s12} > {s1} + {s2}")
    neg = y1.copy()
    neg[int(rng.integers(P.d))] = -1.0
    if np.isfinite(support_function_value(P, neg)):
        out.append("finite support value at a direction with a negative entry")
    return out


def ri_case(rng) -> list[str]:
    """Whenever a point is classified as relative-interior, small probes along aff K stay in K."""
    K = polar_cone(random_cone(rng))
    V = halfspaces_to_generators(K)
    pts = np.vstack([V.generators, V.lineality, -V.lineality])
    if pts.size == 0:
        return []
    w = rng.uniform(0, 1, pts.shape[0])
    if rng.random() < 0.4:
        w[int(rng.integers(pts.shape[0]))] = 0.0     # push some samples to the boundary
    y = w @ pts
    implicit = implicit_rows(K)
    inside = relative_interior_membership(K, y, slack=RI_SLACK, implicit=implicit)
    if not inside:
        return []
    out = []
    if np.any(K.A @ y > RI_SLACK):
        out.append("ri point outside the cone")
    B = affine_hull_basis(K, implicit)
    scale = max(1.0, float(np.max(np.abs(K.A)))) * K.d
    for b in B:
        for s in (1.0, -1.0):
            probe = y + s * PROBE_EPS * b
            if np.any(K.A @ probe > RI_SLACK * scale):
                out.append("probe inside aff K leaves the cone")
    return out


PROPERTIES = {
    "bipolar round-trip": bipolar_case,
    "recession idempotence": recession_case,
    "support homogeneity/sublinearity": support_case,
    "ri-membership probe": ri_case,
}


def run_cases(n: int, seed: int = 0) -> dict[str, list[str]]:
    rng = np.random.default_rng(seed)
    failures: dict[str, list[str]] = {name: [] for name in PROPERTIES}
    for _ in range(n):
        for name, case in PROPERTIES.items():
            failures[name].extend(case(rng))
    return failures
