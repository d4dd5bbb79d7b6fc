"""Population-sorting kernels with a compiled fast path.

The O(N^2) pairwise constrained-domination scan is the sorting hot loop;
it is implemented twice: in Cython (srsearch._native) and as a numpy
fallback.  The backend is picked once at import.  Front peeling and
crowding distances are shared numpy code so both backends return
identical results.

Objective rows are *minimization* keys; `violations` follow the
feasibility-first rule: unequal violations decide domination outright,
equal violations fall back to the Pareto comparison.
"""

from __future__ import annotations

import numpy as np

try:
    from srsearch import _native
except ImportError:  # pragma: no cover - exercised via explicit backend arg
    _native = None

BACKEND = "native" if _native is not None else "python"

_CHUNK = 256


def _as_arrays(keys, violations):
    keys = np.ascontiguousarray(keys, dtype=np.float64)
    violations = np.ascontiguousarray(violations, dtype=np.float64)
    if keys.ndim != 2 or violations.shape != (keys.shape[0],):
        raise ValueError("keys must be (N, M) and violations (N,)")
    return keys, violations


def _domination_matrix_py(keys: np.ndarray, violations: np.ndarray) -> np.ndarray:
    le = (keys[:, None, :] <= keys[None, :, :]).all(axis=-1)
    lt = (keys[:, None, :] < keys[None, :, :]).any(axis=-1)
    pareto = le & lt
    vi, vj = violations[:, None], violations[None, :]
    dom = np.where(vi == vj, pareto, vi < vj)
    np.fill_diagonal(dom, False)
    return dom.astype(np.uint8)


def domination_matrix(keys, violations, backend: str | None = None) -> np.ndarray:
    keys, violations = _as_arrays(keys, violations)
    backend = backend or BACKEND
    if backend == "native":
        if _native is None:
            raise RuntimeError("native kernel requested but srsearch._native is not built")
        out = np.empty((keys.shape[0], keys.shape[0]), dtype=np.uint8)
        _native.domination_matrix(keys, violations, out)
        return out
    return _domination_matrix_py(keys, violations)


def nondominated_mask(keys, violations, backend: str | None = None) -> np.ndarray:
    """Boolean mask of front-0 members; memory-safe for large archives."""
    keys, violations = _as_arrays(keys, violations)
    backend = backend or BACKEND
    n = keys.shape[0]
    if backend == "native":
        if _native is None:
            raise RuntimeError("native kernel requested but srsearch._native is not built")
        out = np.empty(n, dtype=np.uint8)
        _native.nondominated_mask(keys, violations, out)
        return out.astype(bool)
    mask = np.empty(n, dtype=bool)
    for start in range(0, n, _CHUNK):
        stop = min(start + _CHUNK, n)
        chunk = slice(start, stop)
        le = (keys[:, None, :] <= keys[None, chunk, :]).all(axis=-1)
        lt = (keys[:, None, :] < keys[None, chunk, :]).any(axis=-1)
        pareto = le & lt
        vi = violations[:, None]
        vj = violations[None, chunk]
        dom = np.where(vi == vj, pareto, vi < vj)
        idx = np.arange(start, stop)
        dom[idx, idx - start] = False
        mask[chunk] = ~dom.any(axis=0)
    return mask


def peel_fronts(dom: np.ndarray) -> np.ndarray:
    """Deb-style front assignment from a domination matrix; returns ranks."""
    n = dom.shape[0]
    n_dominators = dom.sum(axis=0).astype(np.int64)
    ranks = np.full(n, -1, dtype=np.int64)
    rank = 0
    current = np.flatnonzero(n_dominators == 0)
    sentinel = -(n + 1)
    while current.size:
        ranks[current] = rank
        n_dominators[current] = sentinel
        n_dominators -= dom[current, :].sum(axis=0, dtype=np.int64)
        rank += 1
        current = np.flatnonzero(n_dominators == 0)
    return ranks


def assign_fronts(keys, violations, backend: str | None = None) -> np.ndarray:
    return peel_fronts(domination_matrix(keys, violations, backend=backend))


def crowding_distances(values: np.ndarray) -> np.ndarray:
    """Canonical crowding distance over a single front.

    Per objective the boundary points get +inf and interior points
    accumulate (next - prev) / range; zero-range objectives contribute
    nothing to interior points.  Fronts of size <= 2 are all infinite.
    Stable sorts make ties deterministic.
    """
    values = np.asarray(values, dtype=np.float64)
    k = values.shape[0]
    dist = np.zeros(k, dtype=np.float64)
    if k <= 2:
        dist[:] = np.inf
        return dist
    for col in range(values.shape[1]):
        column = values[:, col]
        order = np.argsort(column, kind="stable")
        dist[order[0]] = np.inf
        dist[order[-1]] = np.inf
        span = column[order[-1]] - column[order[0]]
        if span <= 0.0:
            continue
        gaps = (column[order[2:]] - column[order[:-2]]) / span
        np.add.at(dist, order[1:-1], gaps)
    return dist
