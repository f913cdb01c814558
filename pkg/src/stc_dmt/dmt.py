"""Diversity-multiplexing trade-off curves and their numerical verification.

Closed-form piecewise-linear DMT curves (optimal, real-restricted,
quaternion-restricted, multi-block scaled), the exponent-region infimum
behind the restricted bounds together with two independent minimizers
(vertex enumeration and a generic LP), outage-exponent Monte Carlo, and
log-log slope fitting of empirical error rates.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

import numpy as np
from scipy.optimize import linprog

from . import channel as channel_mod
from ._rng import STREAM_OUTAGE, block_ranges, block_rng, worker_count
from .channel import ChannelSpec, Model
from .decoder import ErrorEstimate

__all__ = [
    "DmtCurve", "ExponentRegion", "InsufficientData", "SlopeFit", "OutageResult",
    "optimal_dmt", "real_dmt", "quaternion_dmt", "diag_golden_dmt", "scale_multiblock",
    "inf_lemma_value", "inf_lemma_oracle", "inf_lemma_lp", "inf_lemma_multiblock_lp",
    "slope_fit", "outage_exponent_mc",
]

# Rate threshold used for outage runs at multiplexing gain exactly 0: the
# asymptotic exponent at r=0 is the same for any fixed positive rate, but the
# literal threshold r*log(rho) = 0 can never be crossed since the mutual
# information statistic is nonnegative.
FIXED_RATE_NATS = math.log(2.0)


class InsufficientData(RuntimeError):
    """Too few usable Monte Carlo points to fit an exponent."""


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(float(x))  # binary floats convert exactly


def _format_number(x: Fraction | float) -> str:
    """Minimal decimal form: integers without a trailing .0."""
    f = float(x)
    if f == int(f):
        return str(int(f))
    return repr(f)


@dataclass(frozen=True)
class DmtCurve:
    """Piecewise-linear diversity curve given by exact rational breakpoints.

    Evaluation interpolates linearly between breakpoints and clamps to d=0
    beyond the last one.  Breakpoints are kept as Fractions so curve tests
    can assert exact equality.
    """

    breakpoints: tuple[tuple[Fraction, Fraction], ...]
    label: str = ""

    def __post_init__(self):
        bp = self.breakpoints
        if not bp:
            raise ValueError("curve needs at least one breakpoint")
        if bp[0][0] != 0:
            raise ValueError("first breakpoint must be at r=0")
        rs = [r for r, _ in bp]
        ds = [d for _, d in bp]
        if any(r2 <= r1 for r1, r2 in zip(rs, rs[1:])):
            raise ValueError("breakpoint multiplexing gains must be strictly increasing")
        if any(d < 0 for d in ds):
            raise ValueError("diversity gains must be nonnegative")
        if any(d2 > d1 for d1, d2 in zip(ds, ds[1:])):
            raise ValueError("diversity must be non-increasing in r")

    def __call__(self, r) -> float:
        rq = float(r)
        if rq < 0:
            raise ValueError("multiplexing gain must be nonnegative")
        bp = [(float(a), float(b)) for a, b in self.breakpoints]
        if rq >= bp[-1][0]:
            return 0.0 if rq > bp[-1][0] else bp[-1][1]
        for (r1, d1), (r2, d2) in zip(bp, bp[1:]):
            if r1 <= rq <= r2:
                t = (rq - r1) / (r2 - r1)
                return d1 + t * (d2 - d1)
        return bp[0][1]  # rq == 0

    def csv_rows(self) -> list[str]:
        return [f"{_format_number(r)},{_format_number(d)}" for r, d in self.breakpoints]


def _restricted_breakpoints(n: int, m: int, step: Fraction) -> tuple[tuple[Fraction, Fraction], ...]:
    """Breakpoints (r, [(m-r)(n-2r)]^+) on the grid r = 0, step, 2*step, ...

    Stops at the first zero; the zero crossing min(m, n/2) always lies on the
    half-integer grid, so no extra breakpoint is needed.
    """
    pts = []
    r = Fraction(0)
    while True:
        d = (m - r) * (n - 2 * r)
        if d <= 0:
            pts.append((r, Fraction(0)))
            break
        pts.append((r, d))
        r += step
    return tuple(pts)


def optimal_dmt(n: int, m: int) -> DmtCurve:
    """Optimal DMT: connects (r, (n-r)(m-r)) for integer r up to min(n, m)."""
    if n < 1 or m < 1:
        raise ValueError("antenna counts must be positive")
    pts = tuple((Fraction(r), Fraction((n - r) * (m - r))) for r in range(min(n, m) + 1))
    return DmtCurve(pts, label=f"optimal {n}x{m}")


def real_dmt(n: int, m: int) -> DmtCurve:
    """Best DMT of codes confined to real n x n matrices: half-integer grid."""
    if n < 1 or m < 1:
        raise ValueError("antenna counts must be positive")
    return DmtCurve(_restricted_breakpoints(n, m, Fraction(1, 2)), label=f"real {n}x{m}")


def quaternion_dmt(n: int, m: int) -> DmtCurve:
    """Best DMT of codes confined to quaternionic matrices: integer grid."""
    if n < 1 or m < 1:
        raise ValueError("antenna counts must be positive")
    if n % 2 != 0:
        raise ValueError("quaternionic codes need even n")
    return DmtCurve(_restricted_breakpoints(n, m, Fraction(1)), label=f"quaternion {n}x{m}")


def diag_golden_dmt() -> DmtCurve:
    """DMT of the block-diagonally replicated Golden code on the 4x1 channel."""
    pts = ((Fraction(0), Fraction(4)), (Fraction(1, 2), Fraction(1)), (Fraction(1), Fraction(0)))
    return DmtCurve(pts, label="diag-Golden 4x1")


def scale_multiblock(curve: DmtCurve, k: int) -> DmtCurve:
    """Multi-block scaling: k independently faded blocks multiply d by k."""
    if k < 1:
        raise ValueError("block count must be positive")
    pts = tuple((r, k * d) for r, d in curve.breakpoints)
    return DmtCurve(pts, label=f"{curve.label} x{k} blocks" if curve.label else f"x{k} blocks")


# ---------------------------------------------------------------------------
# Exponent-region infimum
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExponentRegion:
    """Polyhedron {0 <= a_1 <= ... <= a_L, sum_{i<=j} a_i >= j - s for all j}.

    This is the near-outage region of channel-eigenvalue exponents; the
    restricted DMT curves are (scaled) infima over it of the linear
    functional sum_i (q+L+1-2i) a_i, whose q parameter rides along here.
    """

    L: int
    s: Fraction
    q: int = 0

    def __post_init__(self):
        if self.L < 1:
            raise ValueError("L must be >= 1")
        if self.q < 0:
            raise ValueError("q must be nonnegative")
        if not (0 <= self.s <= self.L):
            raise ValueError("s must lie in [0, L]")

    def objective(self, alpha: np.ndarray) -> float:
        c = _lemma_coefficients(self.q, self.L)
        return float(c @ np.asarray(alpha, dtype=float))

    def halfspaces(self) -> tuple[np.ndarray, np.ndarray]:
        """(A, b) with the region equal to {x : A x >= b}."""
        L = self.L
        rows, rhs = [], []
        e = np.zeros(L)
        e[0] = 1.0
        rows.append(e.copy())
        rhs.append(0.0)
        for i in range(L - 1):
            e = np.zeros(L)
            e[i], e[i + 1] = -1.0, 1.0
            rows.append(e)
            rhs.append(0.0)
        for j in range(1, L + 1):
            e = np.zeros(L)
            e[:j] = 1.0
            rows.append(e)
            rhs.append(float(j - self.s))
        return np.array(rows), np.array(rhs)

    def contains(self, alpha: np.ndarray, tol: float = 1e-12) -> bool:
        A, b = self.halfspaces()
        return bool(np.all(A @ np.asarray(alpha, dtype=float) >= b - tol))

    def vertices(self) -> np.ndarray:
        """All vertices, by solving every L-subset of active constraints.

        The region is unbounded but pointed; every vertex has coordinates at
        most L, so enumeration over constraint subsets is exhaustive.
        """
        A, b = self.halfspaces()
        L = self.L
        idx = np.array(list(combinations(range(A.shape[0]), L)))
        mats = A[idx]                      # (n_combos, L, L)
        rhss = b[idx]                      # (n_combos, L)
        dets = np.linalg.det(mats)
        ok = np.abs(dets) > 0.5            # constraint rows are 0/+-1 integer
        sols = np.linalg.solve(mats[ok], rhss[ok][..., None])[..., 0]
        feas = np.all(sols @ A.T >= b[None, :] - 1e-9, axis=1)
        verts = sols[feas]
        if verts.size == 0:
            return verts.reshape(0, L)
        # deduplicate (many subsets meet at the same vertex)
        rounded = np.round(verts / 1e-9) * 1e-9
        _, keep = np.unique(rounded, axis=0, return_index=True)
        return verts[np.sort(keep)]


def _lemma_coefficients(q: int, L: int) -> np.ndarray:
    return np.array([q + L + 1 - 2 * i for i in range(1, L + 1)], dtype=float)


def inf_lemma_value(q: int, L: int, s) -> float:
    """Closed form for inf of sum_i (q+L+1-2i) a_i over the exponent region.

    Equals (-q-L+2*floor(s)+1)*s + q*L - floor(s)*(floor(s)+1), attained at
    a* = (0,...,0, ceil(s)-s, 1,...,1).  Exact for the channel-derived
    parameterizations (where q >= L); for q < L-1 some objective
    coefficients go negative and the true infimum over the unbounded region
    is -inf, while this expression still matches the best vertex.
    """
    if L < 1 or q < 0:
        raise ValueError("need L >= 1 and q >= 0")
    sf = _as_fraction(s)
    if not (0 <= sf <= L):
        raise ValueError("s must lie in [0, L]")
    fl = math.floor(sf)
    val = (-q - L + 2 * fl + 1) * sf + q * L - fl * (fl + 1)
    return float(val)


def inf_lemma_minimizer(q: int, L: int, s) -> np.ndarray:
    """The minimizing exponent vector a* of the closed form."""
    sf = _as_fraction(s)
    k = math.floor(sf) + 1
    alpha = np.ones(L)
    alpha[:min(k - 1, L)] = 0.0
    if k <= L:
        alpha[k - 1] = float(k - sf)
    return alpha


def inf_lemma_oracle(q: int, L: int, s) -> float:
    """Independent minimizer: exhaustive vertex enumeration of the region."""
    if L < 1 or q < 0:
        raise ValueError("need L >= 1 and q >= 0")
    region = ExponentRegion(L, _as_fraction(s), q)
    verts = region.vertices()
    if verts.shape[0] == 0:
        raise ArithmeticError("exponent region unexpectedly has no vertices")
    c = _lemma_coefficients(q, L)
    return float(np.min(verts @ c))


def inf_lemma_lp(q: int, L: int, s) -> float:
    """Second independent minimizer: generic LP over the region.

    Only meaningful when every objective coefficient is nonnegative
    (q >= L-1, satisfied by all channel-derived uses); otherwise the LP is
    unbounded and an ArithmeticError is raised.
    """
    region = ExponentRegion(L, _as_fraction(s), q)
    A, b = region.halfspaces()
    c = _lemma_coefficients(q, L)
    res = linprog(c, A_ub=-A, b_ub=-b, bounds=[(0, None)] * L, method="highs")
    if res.status != 0:
        raise ArithmeticError(f"LP failed: status={res.status} ({res.message})")
    return float(res.fun)


def inf_lemma_multiblock_lp(q: int, L: int, s, k: int) -> float:
    """Multi-block infimum via LP over k*L exponents with global constraints.

    Variables a_i^(l), ordered and nonnegative within each block, subject to
    sum_l sum_{i<=j} a_i^(l) >= k*(j - s) for every j; the minimum equals
    k times the single-block value.  Needs q >= L-1 for boundedness.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    sf = _as_fraction(s)
    if not (0 <= sf <= L):
        raise ValueError("s must lie in [0, L]")
    nv = k * L
    c = np.tile(_lemma_coefficients(q, L), k)
    rows, rhs = [], []
    for l in range(k):
        base = l * L
        for i in range(L - 1):
            e = np.zeros(nv)
            e[base + i], e[base + i + 1] = 1.0, -1.0  # a_i - a_{i+1} <= 0
            rows.append(e)
            rhs.append(0.0)
    for j in range(1, L + 1):
        e = np.zeros(nv)
        for l in range(k):
            e[l * L:l * L + j] = -1.0
        rows.append(e)
        rhs.append(-float(k * (j - sf)))
    res = linprog(c, A_ub=np.array(rows), b_ub=np.array(rhs),
                  bounds=[(0, None)] * nv, method="highs")
    if res.status != 0:
        raise ArithmeticError(f"multi-block LP failed: status={res.status} ({res.message})")
    return float(res.fun)


# ---------------------------------------------------------------------------
# Slope fitting and outage Monte Carlo
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SlopeFit:
    diversity: float
    stderr: float
    npoints: int


def slope_fit(points: list[tuple[float, float]]) -> SlopeFit:
    """Least-squares diversity estimate from (rho, p) pairs.

    Fits log p = a - d * log rho; returns d with its regression standard
    error (nan when there are no residual degrees of freedom).
    """
    if len(points) < 2:
        raise ValueError("need at least two points to fit a slope")
    rho = np.array([p[0] for p in points], dtype=float)
    prob = np.array([p[1] for p in points], dtype=float)
    if np.any(prob <= 0) or np.any(rho <= 0):
        raise ValueError("slope fit needs positive rho and probabilities")
    x, y = np.log(rho), np.log(prob)
    xm = x - x.mean()
    sxx = float(xm @ xm)
    if sxx == 0:
        raise ValueError("rho values must not all coincide")
    slope = float(xm @ (y - y.mean())) / sxx
    n = len(points)
    if n > 2:
        resid = y - (y.mean() + slope * xm)
        se = math.sqrt(float(resid @ resid) / (n - 2) / sxx)
    else:
        se = math.nan
    return SlopeFit(diversity=-slope, stderr=se, npoints=n)


@dataclass(frozen=True)
class OutageResult:
    points: tuple[ErrorEstimate, ...]
    exponent: float
    stderr: float
    dropped: tuple[float, ...]  # rho values with zero outage events


def _mutual_info_statistic(spec: ChannelSpec, H: np.ndarray, rho: float) -> np.ndarray:
    """Per-trial mutual-information statistic, summed over blocks (nats).

    Complex model: logdet(I + rho H H^dag).  Real equivalent: half of it,
    the real channel carrying half a complex dimension per use.  Quaternion
    equivalent: half of logdet(I + rho H^dag H), which counts each paired
    eigenvalue once (the structured channel delivers its symbols in half the
    frame, doubling the effective multiplexing gain).
    """
    rows, n = H.shape[-2], H.shape[-1]
    if rows <= n:
        gram = np.einsum("...ij,...kj->...ik", H, H.conj())
        d = rows
    else:
        gram = np.einsum("...ji,...jk->...ik", H.conj(), H)
        d = n
    eye = np.eye(d)
    _, logdet = np.linalg.slogdet(eye + rho * gram)
    stat = logdet.sum(axis=-1)  # sum over blocks
    if spec.model is Model.COMPLEX:
        return stat
    return 0.5 * stat


def outage_exponent_mc(spec: ChannelSpec, r: float, rho_grid: list[float],
                       trials: int, seed: int, *, workers: int | None = None,
                       fixed_rate: float = FIXED_RATE_NATS) -> OutageResult:
    """Monte Carlo outage exponent: fit of -log P_out against log rho.

    Estimates P{statistic <= R} per rho with R = r*log(rho) (or the fixed
    positive rate `fixed_rate` when r == 0, whose exponent is the same
    d(0)).  Points with zero observed outages are dropped; fewer than two
    usable points raises InsufficientData.
    """
    if len(rho_grid) < 2:
        raise ValueError("rho grid needs at least two points")
    if trials < 1:
        raise ValueError("trials must be positive")
    if r < 0:
        raise ValueError("multiplexing gain must be nonnegative")
    ranges = block_ranges(trials)
    nblocks = len(ranges)
    nworkers = worker_count(workers)

    def run_rho(i_rho: int, rho: float) -> ErrorEstimate:
        threshold = spec.blocks * (r * math.log(rho) if r > 0 else fixed_rate)

        def run_block(args):
            block, start, stop = args
            rng = block_rng(seed, STREAM_OUTAGE, i_rho * nblocks + block)
            H = channel_mod.sample_channel_batch(spec, rng, stop - start)
            stat = _mutual_info_statistic(spec, H, rho)
            return int(np.count_nonzero(stat <= threshold))

        if nworkers > 1:
            with ThreadPoolExecutor(max_workers=nworkers) as pool:
                hits = sum(pool.map(run_block, ranges))
        else:
            hits = sum(run_block(a) for a in ranges)
        return ErrorEstimate(rho=float(rho), trials=trials, errors=hits)

    points = tuple(run_rho(i, rho) for i, rho in enumerate(rho_grid))
    usable = [p for p in points if p.errors > 0]
    dropped = tuple(p.rho for p in points if p.errors == 0)
    if len(usable) < 2:
        raise InsufficientData(
            f"only {len(usable)} rho points saw outage events (dropped {list(dropped)})")
    fit = slope_fit([(p.rho, p.p_hat) for p in usable])
    return OutageResult(points=points, exponent=fit.diversity, stderr=fit.stderr,
                        dropped=dropped)
