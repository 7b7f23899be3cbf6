"""Separated and spanning numbers of finite metric spaces.

Exact solvers split the space into connected components first (points at
distance >= eps never interact for separation, points at distance > eps
never interact for spanning) and run a bitmask branch and bound on each
component.  The point cap applies per component.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .caps import EXACT_SOLVER_POINTS
from .errors import ArgumentError, ResourceError

METRIC_TOL = 1e-12


class FiniteMetricSpace:
    def __init__(self, points, dist, validate: bool = True, tol: float = METRIC_TOL):
        d = np.asarray(dist, dtype=float)
        points = list(points)
        if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] != len(points):
            raise ArgumentError("distance matrix must be square and match the point list")
        if validate:
            if np.any(~np.isfinite(d)) or np.any(d < 0):
                raise ArgumentError("distances must be finite and nonnegative")
            if np.any(np.abs(np.diag(d)) > tol):
                raise ArgumentError("distance matrix must have zero diagonal")
            if np.any(np.abs(d - d.T) > tol):
                raise ArgumentError("distance matrix must be symmetric")
            for j in range(len(points)):
                if np.any(d > d[:, [j]] + d[[j], :] + tol):
                    raise ArgumentError("distance matrix violates the triangle inequality")
        self.points = points
        self.dist = d

    def __len__(self):
        return len(self.points)

    @classmethod
    def from_points(cls, coords) -> "FiniteMetricSpace":
        """Euclidean metric on rows of ``coords``."""
        x = np.asarray(coords, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        d = np.sqrt(((x[:, None, :] - x[None, :, :]) ** 2).sum(axis=-1))
        return cls([tuple(row) for row in x.tolist()], d)


@dataclass(frozen=True)
class SetCertificate:
    """A cardinality together with a witness set of point indices."""

    count: int
    witness: tuple[int, ...]
    kind: str  # exact | lower | upper
    mode: str


def _popcount(x: int) -> int:
    return bin(x).count("1")


def _bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def _components(adj: list[int]) -> list[list[int]]:
    n = len(adj)
    seen = 0
    comps = []
    for v in range(n):
        if seen >> v & 1:
            continue
        comp, stack = 0, 1 << v
        while stack:
            comp |= stack
            nxt = 0
            for u in _bits(stack):
                nxt |= adj[u]
            stack = nxt & ~comp
        seen |= comp
        comps.append(list(_bits(comp)))
    return comps


def _max_independent(adj: dict[int, int], verts: int) -> int:
    best = [0]

    def rec(chosen: int, rest: int):
        if _popcount(chosen) + _popcount(rest) <= _popcount(best[0]):
            return
        if rest == 0:
            best[0] = chosen
            return
        # branch on the vertex of highest degree inside rest, lowest index on ties
        v, deg = -1, -1
        for u in _bits(rest):
            du = _popcount(adj[u] & rest)
            if du > deg:
                v, deg = u, du
        if deg == 0:
            if _popcount(chosen | rest) > _popcount(best[0]):
                best[0] = chosen | rest
            return
        bit = 1 << v
        rec(chosen | bit, rest & ~bit & ~adj[v])
        rec(chosen, rest & ~bit)

    rec(0, verts)
    return best[0]


def _min_dominating(closed: dict[int, int], verts: int) -> int:
    # greedy start gives the incumbent
    covered, greedy = 0, 0
    while covered != verts:
        v = max(_bits(verts), key=lambda u: (_popcount(closed[u] & ~covered), -u))
        greedy |= 1 << v
        covered |= closed[v]
    best = [greedy]
    max_cover = max(_popcount(closed[u]) for u in _bits(verts))

    def rec(chosen: int, covered: int):
        k = _popcount(chosen)
        uncovered = verts & ~covered
        if uncovered == 0:
            if k < _popcount(best[0]):
                best[0] = chosen
            return
        lower = -(-_popcount(uncovered) // max_cover)
        if k + lower >= _popcount(best[0]):
            return
        u = min(_bits(uncovered), key=lambda x: (_popcount(closed[x]), x))
        for w in _bits(closed[u]):
            rec(chosen | (1 << w), covered | closed[w])

    rec(0, 0)
    return best[0]


def _check_eps(eps):
    if not eps > 0:
        raise ArgumentError("eps must be positive")


def sep_number(M: FiniteMetricSpace, eps: float, mode: str = "exact", cap: int = EXACT_SOLVER_POINTS) -> SetCertificate:
    """Largest subset with pairwise distances >= eps."""
    _check_eps(eps)
    n = len(M)
    if mode == "greedy":
        chosen: list[int] = []
        for i in range(n):
            if all(M.dist[i, j] >= eps for j in chosen):
                chosen.append(i)
        return SetCertificate(len(chosen), tuple(chosen), "lower", "greedy")
    if mode != "exact":
        raise ArgumentError(f"unknown mode {mode!r}")
    close = (M.dist < eps) & ~np.eye(n, dtype=bool)
    adj = [sum(1 << int(j) for j in np.flatnonzero(close[i])) for i in range(n)]
    witness = []
    for comp in _components(adj):
        if len(comp) > cap:
            raise ResourceError(f"component of {len(comp)} points exceeds exact cap {cap}")
        verts = sum(1 << v for v in comp)
        witness.extend(_bits(_max_independent({v: adj[v] for v in comp}, verts)))
    witness.sort()
    return SetCertificate(len(witness), tuple(witness), "exact", "exact")


def span_number(M: FiniteMetricSpace, eps: float, mode: str = "exact", cap: int = EXACT_SOLVER_POINTS) -> SetCertificate:
    """Smallest subset within distance <= eps of every point."""
    _check_eps(eps)
    n = len(M)
    near = M.dist <= eps
    closed = [sum(1 << int(j) for j in np.flatnonzero(near[i])) for i in range(n)]
    if mode == "greedy":
        covered, chosen, full = 0, [], (1 << n) - 1
        while covered != full:
            v = max(range(n), key=lambda u: (_popcount(closed[u] & ~covered), -u))
            chosen.append(v)
            covered |= closed[v]
        return SetCertificate(len(chosen), tuple(sorted(chosen)), "upper", "greedy")
    if mode != "exact":
        raise ArgumentError(f"unknown mode {mode!r}")
    adj = [c & ~(1 << i) for i, c in enumerate(closed)]
    witness = []
    for comp in _components(adj):
        if len(comp) > cap:
            raise ResourceError(f"component of {len(comp)} points exceeds exact cap {cap}")
        verts = sum(1 << v for v in comp)
        witness.extend(_bits(_min_dominating({v: closed[v] for v in comp}, verts)))
    witness.sort()
    return SetCertificate(len(witness), tuple(witness), "exact", "exact")


def is_separated(M: FiniteMetricSpace, idx, eps: float) -> bool:
    idx = list(idx)
    return all(M.dist[i, j] >= eps for a, i in enumerate(idx) for j in idx[a + 1:])


def is_spanning(M: FiniteMetricSpace, idx, eps: float) -> bool:
    idx = list(idx)
    if not idx:
        return len(M) == 0
    return bool(np.all(M.dist[:, idx].min(axis=1) <= eps))
