"""Matrix lattices: shells, codebooks and determinant figures of merit.

A matrix lattice is the integer span of R-linearly independent complex
n x (n*blocks) matrices.  Spherical shells are enumerated exactly with a
Fincke-Pohst branch-and-bound on the Cholesky factor of the basis Gram
matrix (implemented layer-by-layer with numpy so multi-million point shells
stay fast), and the determinant probes prefer a lattice-supplied exact
|det|^2 evaluator over floating point whenever one is available.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterator

import numpy as np

RANK_TOL = 1e-9
DEFAULT_SHELL_CAP = 10_000_000
_CHUNK = 1 << 16

# exact |det|^2 of integer coefficient vectors, as (numerators, denominator)
DetSqHook = Callable[[np.ndarray], tuple[np.ndarray, int]]


class ShellTooLarge(RuntimeError):
    """Projected shell point count exceeds the configured cap."""


class NoPoints(RuntimeError):
    """A probe was asked to minimize over an empty shell."""


class Ambient(enum.Enum):
    COMPLEX = "complex"
    REAL = "real"
    QUATERNION = "quaternion"


@dataclass(frozen=True)
class MatrixLattice:
    """Z-span of `dim` R-linearly independent n x (n*blocks) matrices."""

    n: int
    blocks: int
    basis: tuple[np.ndarray, ...]
    ambient: Ambient = Ambient.COMPLEX
    label: str = ""
    det_sq_hook: DetSqHook | None = field(default=None, compare=False)

    def __post_init__(self):
        n, k = self.n, self.blocks
        basis = tuple(np.asarray(B, dtype=complex) for B in self.basis)
        object.__setattr__(self, "basis", basis)
        if not basis:
            raise ValueError("lattice needs at least one basis matrix")
        for B in basis:
            if B.shape != (n, n * k):
                raise ValueError(f"basis matrix shape {B.shape}, expected {(n, n * k)}")
        if self.dim > 2 * n * n * k:
            raise ValueError("lattice rank exceeds the real dimension of the ambient space")
        gram = self.gram()
        if np.linalg.det(gram) <= RANK_TOL:
            raise ValueError("basis matrices are not linearly independent over R")
        if self.ambient is Ambient.REAL:
            if any(np.any(B.imag != 0) for B in basis):
                raise ValueError("real ambient requires exactly real basis matrices")
        if self.ambient is Ambient.QUATERNION:
            if n % 2 != 0:
                raise ValueError("quaternionic ambient requires even n")
            p = n // 2
            for B in basis:
                for l in range(k):
                    Bl = B[:, l * n:(l + 1) * n]
                    if not (np.array_equal(Bl[:p, p:], -Bl[p:, :p].conj())
                            and np.array_equal(Bl[p:, p:], Bl[:p, :p].conj())):
                        raise ValueError("quaternionic ambient requires exact [[A,-B*],[B,A*]] blocks")

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def cols(self) -> int:
        return self.n * self.blocks

    def basis_stack(self) -> np.ndarray:
        return np.stack(self.basis)

    def real_vectors(self) -> np.ndarray:
        """Basis matrices flattened to real row vectors (dim x 2*n*cols)."""
        flat = self.basis_stack().reshape(self.dim, -1)
        return np.hstack([flat.real, flat.imag])

    def gram(self) -> np.ndarray:
        V = self.real_vectors()
        return V @ V.T

    def point(self, coeffs) -> np.ndarray:
        """The lattice point with the given integer coefficients."""
        c = np.asarray(coeffs, dtype=float)
        return np.tensordot(c, self.basis_stack(), axes=([0], [0]))

    def points_from_coeffs(self, coeffs: np.ndarray) -> np.ndarray:
        return np.tensordot(coeffs.astype(float), self.basis_stack(), axes=([1], [0]))


def _ball_volume(dim: int, radius: float) -> float:
    return math.pi ** (dim / 2) / math.gamma(dim / 2 + 1) * radius ** dim


@dataclass(frozen=True)
class Shell:
    """All nonzero lattice points with Frobenius norm <= M.

    Stored as integer coefficient vectors; matrices are materialized on
    demand (whole shells can run into millions of points, probes iterate in
    chunks instead).
    """

    lattice: MatrixLattice
    M: float
    coeffs: np.ndarray  # (count, dim) int64

    def __len__(self) -> int:
        return self.coeffs.shape[0]

    @property
    def points(self) -> np.ndarray:
        return self.lattice.points_from_coeffs(self.coeffs)

    def iter_points(self, chunk: int = _CHUNK) -> Iterator[np.ndarray]:
        for lo in range(0, len(self), chunk):
            yield self.lattice.points_from_coeffs(self.coeffs[lo:lo + chunk])

    def norms_sq(self) -> np.ndarray:
        """Squared Frobenius norms of all shell points."""
        G = self.lattice.gram()
        c = self.coeffs.astype(float)
        return np.einsum("ij,jk,ik->i", c, G, c)


def estimate_shell_count(lat: MatrixLattice, M: float) -> float:
    """Lemma-1 style projection: ball volume over lattice covolume."""
    G = lat.gram()
    covol = math.sqrt(float(np.linalg.det(G)))
    return _ball_volume(lat.dim, M) / covol


def enumerate_shell(lat: MatrixLattice, M: float, cap: int = DEFAULT_SHELL_CAP) -> Shell:
    """Exact, complete shell enumeration (Fincke-Pohst, layer-vectorized).

    Finds every integer coefficient vector c with c^T G c <= M^2 by
    branch-and-bound on the Cholesky factor R of the Gram matrix, expanding
    one coordinate level at a time across all live branches with numpy.
    Raises ShellTooLarge when the projected point count exceeds `cap`.
    """
    if M <= 0:
        raise ValueError("shell radius must be positive")
    projected = estimate_shell_count(lat, M)
    if projected > cap:
        raise ShellTooLarge(
            f"projected ~{projected:.3g} points in shell M={M} exceeds cap {cap}")

    dim = lat.dim
    G = lat.gram()
    R = np.linalg.cholesky(G).T  # upper triangular, ||R c||^2 = c^T G c
    radius_sq = M * M * (1 + 1e-12) + 1e-12

    # per-branch state, walking levels i = dim-1 .. 0
    coeffs = np.zeros((1, 0), dtype=np.int64)
    partial = np.zeros((1, dim))      # column k: sum_{j>i} R[k, j] c_j
    remaining = np.full(1, radius_sq)
    hard_cap = max(2 * cap, int(2 * projected) + 1024)

    for i in range(dim - 1, -1, -1):
        rii = R[i, i]
        z = partial[:, i]
        w = np.sqrt(np.maximum(remaining, 0.0))
        lo = np.ceil((-w - z) / rii - 1e-12).astype(np.int64)
        hi = np.floor((w - z) / rii + 1e-12).astype(np.int64)
        counts = np.maximum(hi - lo + 1, 0)
        total = int(counts.sum())
        if total == 0:
            coeffs = np.zeros((0, dim), dtype=np.int64)
            break
        if total > hard_cap:
            raise ShellTooLarge(f"shell M={M} exceeded hard cap while enumerating level {i}")
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        parent = np.repeat(np.arange(counts.size), counts)
        ci = np.repeat(lo, counts) + (np.arange(total) - np.repeat(starts, counts))
        t = rii * ci + z[parent]
        remaining = remaining[parent] - t * t
        coeffs = np.hstack([ci[:, None], coeffs[parent]])
        if i > 0:
            partial = partial[parent, :i] + np.outer(ci, R[:i, i])

    if coeffs.shape[0]:
        nonzero = np.any(coeffs != 0, axis=1)
        coeffs = coeffs[nonzero]
    return Shell(lattice=lat, M=float(M), coeffs=np.ascontiguousarray(coeffs))


@dataclass(frozen=True)
class Codebook:
    """Finite SNR-indexed code: scale * L(radius) at multiplexing gain r.

    `fallback` marks the constant-size +-basis-combination code used when
    the shell is empty (small rho and r), as needed by fixed-rate diversity
    runs.  `snr_absorbed` marks the sqrt(rho)-rescaled normalization under
    which the weak NVD criterion is stated.
    """

    lattice: MatrixLattice
    rho: float
    r: float
    scale: float
    words: np.ndarray          # (count, n, n*blocks) complex
    coeffs: np.ndarray         # (count, dim) int64
    fallback: bool = False
    snr_absorbed: bool = False

    def __len__(self) -> int:
        return self.words.shape[0]

    @property
    def radius_exponent(self) -> float:
        return self.r * self.lattice.n * self.lattice.blocks / self.lattice.dim


def _fallback_coeffs(dim: int) -> np.ndarray:
    """All 2^dim sign patterns over the basis; nonzero by independence."""
    grids = np.meshgrid(*([np.array([-1, 1], dtype=np.int64)] * dim), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def make_codebook(lat: MatrixLattice, rho: float, r: float, *,
                  snr_absorbed: bool = False, cap: int = DEFAULT_SHELL_CAP) -> Codebook:
    """Spherically shaped code scale * L(rho^(r*n*blocks/dim)).

    The scale is rho^(-r*n*blocks/dim), times sqrt(rho) when `snr_absorbed`.
    An empty shell falls back to the 2^dim +-basis combinations under the
    same scale law, flagged on the codebook.
    """
    if rho <= 1:
        raise ValueError("rho must exceed 1")
    if r < 0:
        raise ValueError("multiplexing gain must be nonnegative")
    exponent = r * lat.n * lat.blocks / lat.dim
    radius = rho ** exponent
    shell = enumerate_shell(lat, radius, cap=cap)
    fallback = len(shell) == 0
    coeffs = _fallback_coeffs(lat.dim) if fallback else shell.coeffs
    scale = rho ** (-exponent)
    if snr_absorbed:
        scale *= math.sqrt(rho)
    words = scale * lat.points_from_coeffs(coeffs)
    return Codebook(lattice=lat, rho=float(rho), r=float(r), scale=float(scale),
                    words=words, coeffs=coeffs, fallback=fallback,
                    snr_absorbed=snr_absorbed)


def _block_dets(points: np.ndarray, n: int, blocks: int) -> np.ndarray:
    """Product over blocks of det(block) for a (count, n, n*blocks) stack."""
    dets = np.ones(points.shape[0], dtype=complex)
    for l in range(blocks):
        dets *= np.linalg.det(points[:, :, l * n:(l + 1) * n])
    return dets


def min_abs_pdet(lat: MatrixLattice, M: float, cap: int = DEFAULT_SHELL_CAP) -> float:
    """Minimum |prod_blocks det(block)| over the shell of radius M.

    Uses the lattice's exact |det|^2 evaluator when present (the NVD probes
    are integrality statements), falling back to floating point otherwise.
    Returns 0 only if the shell contains a singular nonzero point.
    """
    shell = enumerate_shell(lat, M, cap=cap)
    if len(shell) == 0:
        raise NoPoints(f"shell M={M} of {lat.label or 'lattice'} is empty")
    if lat.det_sq_hook is not None:
        num, den = lat.det_sq_hook(shell.coeffs)
        return math.sqrt(int(num.min()) / den)
    best = math.inf
    for lo in range(0, len(shell), _CHUNK):
        pts = lat.points_from_coeffs(shell.coeffs[lo:lo + _CHUNK])
        best = min(best, float(np.abs(_block_dets(pts, lat.n, lat.blocks)).min()))
    return best


def min_abs_pdet_sq_exact(lat: MatrixLattice, M: float, cap: int = DEFAULT_SHELL_CAP) -> Fraction:
    """Exact min |pdet|^2 over the shell, as a Fraction; needs the exact hook."""
    if lat.det_sq_hook is None:
        raise ValueError("lattice carries no exact determinant evaluator")
    shell = enumerate_shell(lat, M, cap=cap)
    if len(shell) == 0:
        raise NoPoints(f"shell M={M} of {lat.label or 'lattice'} is empty")
    num, den = lat.det_sq_hook(shell.coeffs)
    return Fraction(int(num.min()), den)


@dataclass(frozen=True)
class SingularSpectrum:
    """Ascending singular values of a codeword (difference) matrix.

    delta(s) is the product of the s smallest squared singular values; for
    s = n it equals |det|^2.
    """

    values: tuple[float, ...]

    @classmethod
    def of(cls, X: np.ndarray) -> "SingularSpectrum":
        lam = singular_values_ascending(np.asarray(X, dtype=complex)[None])[0]
        return cls(values=tuple(float(v) for v in lam))

    def delta(self, s: int) -> float:
        if not 1 <= s <= len(self.values):
            raise ValueError(f"s must lie in [1, {len(self.values)}]")
        return float(np.prod(np.array(self.values[:s]) ** 2))


def singular_values_ascending(points: np.ndarray) -> np.ndarray:
    """Ascending singular values per point; closed form for 2x2 stacks."""
    n = points.shape[1]
    if n == 2:
        # eigenvalues of X X^dag: mu = (T +- sqrt(T^2 - 4|det|^2)) / 2
        T = np.einsum("kij,kij->k", points, points.conj()).real
        dets = np.abs(points[:, 0, 0] * points[:, 1, 1] - points[:, 0, 1] * points[:, 1, 0])
        disc = np.sqrt(np.maximum(T * T - 4 * dets * dets, 0.0))
        mu_lo = np.maximum((T - disc) / 2, 0.0)
        mu_hi = (T + disc) / 2
        return np.sqrt(np.stack([mu_lo, mu_hi], axis=1))
    sv = np.linalg.svd(points, compute_uv=False)
    return sv[:, ::-1]


def delta_s(lat: MatrixLattice, M: float, s: int, cap: int = DEFAULT_SHELL_CAP) -> float:
    """Shell-restricted Delta_s: min over L(M) of the product of the s
    smallest squared singular values."""
    if lat.blocks != 1:
        raise ValueError("delta_s applies to single-block lattices")
    if not 1 <= s <= lat.n:
        raise ValueError(f"s must lie in [1, {lat.n}]")
    shell = enumerate_shell(lat, M, cap=cap)
    if len(shell) == 0:
        raise NoPoints(f"shell M={M} of {lat.label or 'lattice'} is empty")
    best = math.inf
    for lo in range(0, len(shell), _CHUNK):
        pts = lat.points_from_coeffs(shell.coeffs[lo:lo + _CHUNK])
        lam = singular_values_ascending(pts)
        vals = np.prod(lam[:, :s] ** 2, axis=1)
        best = min(best, float(vals.min()))
    return best


@dataclass(frozen=True)
class WeakNvdReport:
    ok: bool
    margin: float              # min over words of Delta_n / rho^(n(1 - r/m))
    threshold: float           # the constant c the margin is compared against
    worst_index: int
    worst_word: np.ndarray


def check_weak_nvd(cb: Codebook, m: int, c: float) -> WeakNvdReport:
    """Check Delta_n(X) >= c * rho^(n(1-r/m)) for every codeword.

    Stated for the sqrt(rho)-absorbed normalization; the codebook must have
    been built with snr_absorbed=True.
    """
    if cb.lattice.blocks != 1:
        raise ValueError("weak NVD check applies to single-block codes")
    if not cb.snr_absorbed:
        raise ValueError("codebook must be built with snr_absorbed=True")
    n = cb.lattice.n
    delta_n = np.abs(np.linalg.det(cb.words)) ** 2
    floor = cb.rho ** (n * (1.0 - cb.r / m))
    margins = delta_n / floor
    worst = int(np.argmin(margins))
    margin = float(margins[worst])
    return WeakNvdReport(ok=bool(margin >= c), margin=margin, threshold=float(c),
                         worst_index=worst, worst_word=cb.words[worst])


# ---------------------------------------------------------------------------
# Plain-text import/export
# ---------------------------------------------------------------------------

def save_lattice(lat: MatrixLattice, path: str | Path) -> None:
    """Write the basis in the text interchange format.

    Header line "n blocks dim", then dim blocks of n rows, each row holding
    n*blocks comma-joined re,im pairs.  repr() keeps doubles bit-exact.
    """
    lines = [f"{lat.n} {lat.blocks} {lat.dim}"]
    for B in lat.basis:
        for row in B:
            lines.append(" ".join(f"{repr(float(z.real))},{repr(float(z.imag))}" for z in row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_lattice(path: str | Path) -> MatrixLattice:
    """Read a lattice from the text interchange format; ambient is inferred."""
    raw = Path(path).read_text().split("\n")
    lines = [ln for ln in raw if ln.strip()]
    try:
        n, blocks, dim = (int(tok) for tok in lines[0].split())
    except (ValueError, IndexError) as exc:
        raise ValueError(f"bad lattice header {lines[0]!r}") from exc
    expected = 1 + dim * n
    if len(lines) != expected:
        raise ValueError(f"expected {expected} lines, found {len(lines)}")
    basis = []
    pos = 1
    for _ in range(dim):
        rows = []
        for _ in range(n):
            entries = lines[pos].split()
            pos += 1
            if len(entries) != n * blocks:
                raise ValueError(f"row has {len(entries)} entries, expected {n * blocks}")
            rows.append([complex(float(e.split(",")[0]), float(e.split(",")[1]))
                         for e in entries])
        basis.append(np.array(rows))
    ambient = _infer_ambient_matrices(basis, n, blocks)
    return MatrixLattice(n=n, blocks=blocks, basis=tuple(basis), ambient=ambient,
                         label=Path(path).stem)


def _infer_ambient_matrices(basis, n: int, blocks: int) -> Ambient:
    if all(np.all(B.imag == 0) for B in basis):
        return Ambient.REAL
    if n % 2 == 0:
        p = n // 2
        quat = True
        for B in basis:
            for l in range(blocks):
                Bl = B[:, l * n:(l + 1) * n]
                if not (np.array_equal(Bl[:p, p:], -Bl[p:, :p].conj())
                        and np.array_equal(Bl[p:, p:], Bl[:p, :p].conj())):
                    quat = False
        if quat:
            return Ambient.QUATERNION
    return Ambient.COMPLEX
