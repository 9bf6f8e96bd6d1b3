"""Distance computations: exact 1-Wasserstein between diagrams, entropic
histogram Wasserstein (Sinkhorn), Hamming distance on binary codes, L2 between
dense vectors, and all-pairs distance matrices.

The exact q-Wasserstein between diagrams augments each diagram with one
diagonal slot per opposing point and solves the resulting square assignment
problem; matched points pay the Chebyshev distance to the q-th power,
unmatched points pay |birth - death|^q / 2^(q-1).

The histogram Wasserstein treats two count grids as discrete measures on cell
centers (masses normalized to 1, ground cost L1 between centers by default)
and runs a stabilized Sinkhorn with epsilon scaling; the reported value is the
transport cost <T, C> of the converged plan, entropy excluded.
"""

from __future__ import annotations

import math
import struct
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from numba import config as _numba_config
from numba import njit, prange
from scipy.optimize import linear_sum_assignment

# portable threading backend; tbb/omp probing warns on some installs
_numba_config.THREADING_LAYER = "workqueue"

from .codes import BinaryCode, codes_to_array
from .diagrams import PersistenceDiagram
from .vectorize import DenseVector, HistogramVector

__all__ = [
    "DistanceMatrix",
    "SinkhornConfig",
    "SinkhornConvergenceWarning",
    "DistanceComputationError",
    "wasserstein",
    "sinkhorn_hw",
    "hamming",
    "hamming_matrix",
    "l2",
    "distance_matrix",
    "default_epsilon",
    "save_matrix_csv",
    "load_matrix_csv",
    "save_matrix_binary",
    "load_matrix_binary",
]

METRICS = ("wasserstein", "sinkhorn_hw", "hamming", "l2")


class SinkhornConvergenceWarning(RuntimeWarning):
    """Sinkhorn hit its iteration cap before the marginals met tolerance."""


class DistanceComputationError(RuntimeError):
    """A pairwise distance failed; carries the (i, j) indices."""


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric n x n distance matrix with zero diagonal."""

    n: int
    values: np.ndarray
    metric_tag: str = "unknown"

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != (self.n, self.n):
            raise ValueError(f"expected shape ({self.n}, {self.n}), got {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def validate(self) -> None:
        v = self.values
        if not np.array_equal(v, v.T):
            raise ValueError("distance matrix is not symmetric")
        if np.any(np.asarray(np.diag(v)) != 0):
            raise ValueError("distance matrix diagonal is not zero")
        if np.any(v < 0):
            raise ValueError("distance matrix has negative entries")


@dataclass(frozen=True)
class SinkhornConfig:
    """Entropic-OT settings.

    ``epsilon`` is the entropic regularization strength; the dataset default
    is 0.1 divided by the mean diagram size (see :func:`default_epsilon`).
    Iterations stop once both marginal L1 violations drop below ``tolerance``.
    ``ground_metric`` is "l1" (default) or "l2" between cell centers.
    """

    epsilon: float
    max_iterations: int = 2000
    tolerance: float = 1e-6
    ground_metric: str = "l1"

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.ground_metric not in ("l1", "l2"):
            raise ValueError(f"unknown ground metric {self.ground_metric!r}")


def default_epsilon(sizes: Sequence[int]) -> float:
    """Dataset default regularization: 0.1 / (mean point count)."""
    sizes = list(sizes)
    if not sizes:
        raise ValueError("need at least one diagram size")
    mean = sum(sizes) / len(sizes)
    if mean <= 0:
        raise ValueError("mean diagram size must be positive")
    return 0.1 / mean


# ---------------------------------------------------------------------------
# Exact q-Wasserstein via diagonal-augmented assignment
# ---------------------------------------------------------------------------


def _diagonal_cost(points: np.ndarray, q: float) -> np.ndarray:
    return np.abs(points[:, 0] - points[:, 1]) ** q / 2.0 ** (q - 1.0)


def wasserstein(
    p1: PersistenceDiagram, p2: PersistenceDiagram, q: float = 1.0
) -> float:
    """Exact q-Wasserstein distance between two diagrams (q >= 1).

    Builds the (n1 + n2) square assignment problem in which each diagram is
    augmented with one diagonal slot per opposing point and diagonal-to-
    diagonal transport is free, then solves it with the Jonker-Volgenant
    algorithm.  Symmetric in its arguments.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    a, b = p1.points, p2.points
    n1, n2 = len(a), len(b)
    if n1 == 0 and n2 == 0:
        return 0.0
    size = n1 + n2
    cost = np.full((size, size), np.inf)
    if n1 and n2:
        cheb = np.max(np.abs(a[:, None, :] - b[None, :, :]), axis=2)
        cost[:n1, :n2] = cheb**q
    if n1:
        cost[:n1, n2:] = np.inf
        cost[np.arange(n1), n2 + np.arange(n1)] = _diagonal_cost(a, q)
    if n2:
        cost[n1:, :n2] = np.inf
        cost[n1 + np.arange(n2), np.arange(n2)] = _diagonal_cost(b, q)
    cost[n1:, n2:] = 0.0
    rows, cols = linear_sum_assignment(cost)
    total = float(cost[rows, cols].sum())
    return total ** (1.0 / q)


# ---------------------------------------------------------------------------
# Histogram Wasserstein (stabilized Sinkhorn with epsilon scaling)
# ---------------------------------------------------------------------------

_STAGE_ITERS = 6  # fixed sweeps per warm-up stage of the epsilon schedule
_STAGE_RATIO = 0.25
_CHECK_EVERY = 8


@njit(cache=True)
def _sinkhorn_pair(xa, ya, ma, xb, yb, mb, inv_res, l2_ground, eps_final, tol, max_iter):
    """Entropic OT between two weighted cell clouds; returns (cost, ok, iters).

    Runs scaled-kernel Sinkhorn with potential absorption, warming up through
    a geometric epsilon schedule down to eps_final.  Marginal violations are
    measured in L1 after absorbing the scalings into the potentials.
    """
    na = xa.shape[0]
    nb = xb.shape[0]
    C = np.empty((na, nb))
    cmax = 0.0
    for i in range(na):
        for j in range(nb):
            if l2_ground:
                dx = (xa[i] - xb[j]) * inv_res
                dy = (ya[i] - yb[j]) * inv_res
                c = (dx * dx + dy * dy) ** 0.5
            else:
                c = (abs(xa[i] - xb[j]) + abs(ya[i] - yb[j])) * inv_res
            C[i, j] = c
            if c > cmax:
                cmax = c
    if cmax == 0.0:
        return 0.0, True, 0

    f = np.zeros(na)
    g = np.zeros(nb)
    u = np.ones(na)
    v = np.ones(nb)
    K = np.empty((na, nb))
    eps = cmax * _STAGE_RATIO
    if eps < eps_final:
        eps = eps_final
    total_iters = 0
    converged = False

    while True:
        at_final = eps <= eps_final * (1.0 + 1e-12)
        for i in range(na):
            for j in range(nb):
                K[i, j] = math.exp((f[i] + g[j] - C[i, j]) / eps)
        for i in range(na):
            u[i] = 1.0
        for j in range(nb):
            v[j] = 1.0

        budget = (max_iter - total_iters) if at_final else _STAGE_ITERS
        it = 0
        while it < budget:
            for i in range(na):
                s = 0.0
                for j in range(nb):
                    s += K[i, j] * v[j]
                if s < 1e-300:
                    s = 1e-300
                u[i] = ma[i] / s
            for j in range(nb):
                s = 0.0
                for i in range(na):
                    s += K[i, j] * u[i]
                if s < 1e-300:
                    s = 1e-300
                v[j] = mb[j] / s
            it += 1
            total_iters += 1

            extreme = False
            for i in range(na):
                if u[i] > 1e30 or u[i] < 1e-30:
                    extreme = True
                    break
            if not extreme:
                for j in range(nb):
                    if v[j] > 1e30 or v[j] < 1e-30:
                        extreme = True
                        break

            check = at_final and (it % _CHECK_EVERY == 0 or it >= budget)
            if check or extreme:
                for i in range(na):
                    f[i] += eps * math.log(max(u[i], 1e-300))
                    u[i] = 1.0
                for j in range(nb):
                    g[j] += eps * math.log(max(v[j], 1e-300))
                    v[j] = 1.0
                for i in range(na):
                    for j in range(nb):
                        K[i, j] = math.exp((f[i] + g[j] - C[i, j]) / eps)
                if check:
                    row_err = 0.0
                    for i in range(na):
                        s = 0.0
                        for j in range(nb):
                            s += K[i, j]
                        row_err += abs(s - ma[i])
                    col_err = 0.0
                    for j in range(nb):
                        s = 0.0
                        for i in range(na):
                            s += K[i, j]
                        col_err += abs(s - mb[j])
                    if row_err < tol and col_err < tol:
                        converged = True
                        break
        if at_final:
            break
        # carry scalings into the potentials before the kernel is rebuilt
        for i in range(na):
            f[i] += eps * math.log(max(u[i], 1e-300))
            u[i] = 1.0
        for j in range(nb):
            g[j] += eps * math.log(max(v[j], 1e-300))
            v[j] = 1.0
        eps *= _STAGE_RATIO
        if eps < eps_final:
            eps = eps_final

    # absorb any outstanding scalings, then read the plan off the kernel
    changed = False
    for i in range(na):
        if u[i] != 1.0:
            f[i] += eps * math.log(max(u[i], 1e-300))
            changed = True
    for j in range(nb):
        if v[j] != 1.0:
            g[j] += eps * math.log(max(v[j], 1e-300))
            changed = True
    if changed:
        for i in range(na):
            for j in range(nb):
                K[i, j] = math.exp((f[i] + g[j] - C[i, j]) / eps)
    cost = 0.0
    for i in range(na):
        for j in range(nb):
            cost += K[i, j] * C[i, j]
    return cost, converged, total_iters


@njit(cache=True, parallel=True)
def _sinkhorn_all_pairs(
    cx, cy, cm, sizes, ii, jj, inv_res, l2_ground, eps, tol, max_iter, out, flags
):
    for p in prange(ii.shape[0]):
        i = ii[p]
        j = jj[p]
        cost, ok, _ = _sinkhorn_pair(
            cx[i, : sizes[i]],
            cy[i, : sizes[i]],
            cm[i, : sizes[i]],
            cx[j, : sizes[j]],
            cy[j, : sizes[j]],
            cm[j, : sizes[j]],
            inv_res,
            l2_ground,
            eps,
            tol,
            max_iter,
        )
        out[i, j] = cost
        out[j, i] = cost
        flags[i, j] = 1 if ok else 0
        flags[j, i] = flags[i, j]


def _grid_support(h: HistogramVector):
    if h.grid.sum() <= 0:
        raise ValueError("sinkhorn_hw is undefined for a zero-mass histogram")
    rows, cols = np.nonzero(h.grid)
    mass = h.grid[rows, cols].astype(np.float64)
    mass /= mass.sum()
    return rows.astype(np.int32), cols.astype(np.int32), mass


def sinkhorn_hw(
    v1: HistogramVector, v2: HistogramVector, cfg: SinkhornConfig
) -> float:
    """Entropic histogram-Wasserstein distance between two count grids.

    The grids must share a resolution and both must contain mass.  Emits a
    :class:`SinkhornConvergenceWarning` when the iteration cap is reached
    before the marginals meet tolerance; the (partially converged) transport
    cost is still returned.
    """
    if v1.resolution != v2.resolution:
        raise ValueError(
            f"histogram resolutions differ: {v1.resolution} vs {v2.resolution}"
        )
    xa, ya, ma = _grid_support(v1)
    xb, yb, mb = _grid_support(v2)
    cost, ok, iters = _sinkhorn_pair(
        xa, ya, ma, xb, yb, mb,
        1.0 / v1.resolution,
        cfg.ground_metric == "l2",
        cfg.epsilon,
        cfg.tolerance,
        cfg.max_iterations,
    )
    if not ok:
        warnings.warn(
            f"sinkhorn_hw stopped at {iters} iterations before reaching "
            f"tolerance {cfg.tolerance}",
            SinkhornConvergenceWarning,
            stacklevel=2,
        )
    return float(cost)


# ---------------------------------------------------------------------------
# Hamming
# ---------------------------------------------------------------------------


def hamming(a: BinaryCode, b: BinaryCode) -> int:
    """Number of differing bits: popcount of the XOR of the codes."""
    if a.length != b.length:
        raise ValueError(f"code lengths differ: {a.length} vs {b.length}")
    return int(np.bitwise_count(a.words ^ b.words).sum())


def hamming_matrix(words: np.ndarray, chunk: int = 256) -> np.ndarray:
    """All-pairs Hamming distances over an (n, n_words) uint64 code array.

    Vectorized XOR + population count, processed in row blocks to bound
    memory; returns a symmetric (n, n) uint16 matrix.
    """
    words = np.ascontiguousarray(words, dtype=np.uint64)
    n = words.shape[0]
    out = np.empty((n, n), dtype=np.uint16)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        x = words[start:stop, None, :] ^ words[None, :, :]
        out[start:stop] = np.bitwise_count(x).sum(axis=2, dtype=np.uint16)
    return out


# ---------------------------------------------------------------------------
# L2
# ---------------------------------------------------------------------------


def _vector_values(v) -> np.ndarray:
    return v.values if isinstance(v, DenseVector) else np.asarray(v, dtype=np.float64)


def l2(a, b) -> float:
    """Euclidean distance between two equal-length dense vectors."""
    av, bv = _vector_values(a), _vector_values(b)
    if av.shape != bv.shape:
        raise ValueError(f"vector lengths differ: {av.shape} vs {bv.shape}")
    return float(np.sqrt(((av - bv) ** 2).sum()))


# ---------------------------------------------------------------------------
# All-pairs matrices
# ---------------------------------------------------------------------------


def _pairs_upper(n: int):
    ii, jj = np.triu_indices(n, k=1)
    return ii.astype(np.int64), jj.astype(np.int64)


def _wasserstein_matrix(items, q: float, threads: int) -> np.ndarray:
    n = len(items)
    out = np.zeros((n, n), dtype=np.float64)
    ii, jj = _pairs_upper(n)

    def compute(k):
        i, j = int(ii[k]), int(jj[k])
        try:
            return k, wasserstein(items[i], items[j], q=q)
        except Exception as exc:
            raise DistanceComputationError(f"pair ({i}, {j}): {exc}") from exc

    if threads > 1 and len(ii):
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(compute, range(len(ii))))
    else:
        results = [compute(k) for k in range(len(ii))]
    for k, d in results:
        out[ii[k], jj[k]] = d
        out[jj[k], ii[k]] = d
    return out


def _sinkhorn_matrix(items, cfg: SinkhornConfig, threads: int) -> np.ndarray:
    n = len(items)
    res = items[0].resolution
    for k, h in enumerate(items):
        if h.resolution != res:
            raise DistanceComputationError(f"item {k}: resolution {h.resolution} != {res}")
    supports = []
    for k, h in enumerate(items):
        try:
            supports.append(_grid_support(h))
        except ValueError as exc:
            raise DistanceComputationError(f"item {k}: {exc}") from exc
    smax = max(len(s[2]) for s in supports)
    cx = np.zeros((n, smax), dtype=np.int32)
    cy = np.zeros((n, smax), dtype=np.int32)
    cm = np.zeros((n, smax), dtype=np.float64)
    sizes = np.zeros(n, dtype=np.int64)
    for k, (r, c, m) in enumerate(supports):
        sizes[k] = len(m)
        cx[k, : len(m)] = r
        cy[k, : len(m)] = c
        cm[k, : len(m)] = m
    ii, jj = _pairs_upper(n)
    out = np.zeros((n, n), dtype=np.float64)
    flags = np.ones((n, n), dtype=np.uint8)
    _set_numba_threads(threads)
    _sinkhorn_all_pairs(
        cx, cy, cm, sizes, ii, jj,
        1.0 / res,
        cfg.ground_metric == "l2",
        cfg.epsilon,
        cfg.tolerance,
        cfg.max_iterations,
        out,
        flags,
    )
    bad = int(flags[ii, jj].size - flags[ii, jj].sum())
    if bad:
        warnings.warn(
            f"{bad} histogram pair(s) did not reach Sinkhorn tolerance "
            f"{cfg.tolerance} within {cfg.max_iterations} iterations",
            SinkhornConvergenceWarning,
            stacklevel=3,
        )
    return out


def _set_numba_threads(threads: int) -> None:
    import numba

    limit = numba.config.NUMBA_NUM_THREADS
    numba.set_num_threads(max(1, min(threads, limit)))


def _l2_matrix(items) -> np.ndarray:
    n = len(items)
    out = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        for j in range(i + 1, n):
            try:
                out[i, j] = out[j, i] = l2(items[i], items[j])
            except Exception as exc:
                raise DistanceComputationError(f"pair ({i}, {j}): {exc}") from exc
    return out


def distance_matrix(
    items: Sequence,
    metric: str,
    *,
    q: float = 1.0,
    sinkhorn: Optional[SinkhornConfig] = None,
    threads: int = 1,
) -> DistanceMatrix:
    """All pairwise distances under one metric.

    ``items`` must be homogeneous: diagrams for "wasserstein", histogram
    vectors for "sinkhorn_hw" (a config is derived via :func:`default_epsilon`
    when none is given), binary codes for "hamming", dense vectors for "l2".
    Parallel execution (``threads``) covers only the independent pair
    computations and is bit-identical to the serial path.
    """
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
    n = len(items)
    if n < 1:
        raise ValueError("distance_matrix needs at least one item")
    if metric == "wasserstein":
        values = _wasserstein_matrix(items, q, threads)
    elif metric == "sinkhorn_hw":
        cfg = sinkhorn
        if cfg is None:
            cfg = SinkhornConfig(epsilon=default_epsilon([h.source_size for h in items]))
        values = _sinkhorn_matrix(items, cfg, threads)
    elif metric == "hamming":
        words = codes_to_array(list(items))
        values = hamming_matrix(words).astype(np.float64)
    else:
        values = _l2_matrix(items)
    return DistanceMatrix(n=n, values=values, metric_tag=metric)


# ---------------------------------------------------------------------------
# Matrix serialization: CSV (n header line, then rows) and a raw little-endian
# float64 strict-upper-triangle binary format for large n.
# ---------------------------------------------------------------------------


def save_matrix_csv(matrix: DistanceMatrix, path: Union[str, Path]) -> None:
    lines = [str(matrix.n)]
    for row in matrix.values:
        lines.append(",".join(repr(float(x)) for x in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def load_matrix_csv(path: Union[str, Path], metric_tag: str = "unknown") -> DistanceMatrix:
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty matrix file")
    n = int(lines[0])
    if len(lines) != n + 1:
        raise ValueError(f"{path}: expected {n} rows, found {len(lines) - 1}")
    values = np.array(
        [[float(x) for x in ln.split(",")] for ln in lines[1:]], dtype=np.float64
    )
    return DistanceMatrix(n=n, values=values, metric_tag=metric_tag)


def save_matrix_binary(matrix: DistanceMatrix, path: Union[str, Path]) -> None:
    iu = np.triu_indices(matrix.n, k=1)
    tri = np.ascontiguousarray(matrix.values[iu], dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", matrix.n))
        fh.write(tri.tobytes())


def load_matrix_binary(path: Union[str, Path], metric_tag: str = "unknown") -> DistanceMatrix:
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise ValueError(f"{path}: truncated matrix file")
    n = struct.unpack("<Q", raw[:8])[0]
    expect = n * (n - 1) // 2
    tri = np.frombuffer(raw[8:], dtype="<f8")
    if len(tri) != expect:
        raise ValueError(f"{path}: expected {expect} entries for n={n}, found {len(tri)}")
    values = np.zeros((n, n), dtype=np.float64)
    iu = np.triu_indices(n, k=1)
    values[iu] = tri
    values[(iu[1], iu[0])] = tri
    return DistanceMatrix(n=int(n), values=values, metric_tag=metric_tag)
