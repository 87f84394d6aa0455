"""Shared LP assembly over a market model."""
from __future__ import annotations

import numpy as np

from .geometry import HPolyhedron
from .lp import LPBuilder


def add_membership(bld: LPBuilder, P: HPolyhedron, terms, const=None) -> np.ndarray:
    """Constrain ``sum_k M_k x[idx_k] + const`` to lie in ``P``.

    ``terms`` holds ``(index_array, M)`` pairs where ``M`` is a scalar
    (index array of length ``P.d``) or a ``(P.d, len(idx))`` matrix.
    Auxiliary variables of a lifted ``P`` are created here and returned.
    """
    u = bld.add_vars(P.n_aux, lb=-np.inf)
    if P.m == 0:
        return u
    rhs = P.b.copy()
    if const is not None:
        rhs = rhs - P.A @ np.asarray(const, dtype=float)
    idx = np.concatenate([np.asarray(i, dtype=int) for i, _ in terms] + [u])
    blocks = [P.A * M if np.isscalar(M) else P.A @ np.asarray(M, dtype=float) for _, M in terms]
    bld.add_rows(idx, np.hstack(blocks + [P.aux]), "<=", rhs)
    return u
