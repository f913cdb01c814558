"""Concrete code lattices from degree-2 cyclic algebras and number fields.

Everything determinant-like is kept exact: field elements are pairs of
rationals, reduced norms are computed symbolically, and every constructed
lattice carries a vectorized exact |det|^2 evaluator (integer numerator over
a fixed denominator) so non-vanishing-determinant claims are integrality
checks rather than floating-point ones.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .lattice import Ambient, MatrixLattice

Element = tuple[Fraction, Fraction]  # a + b*sqrt(m), m the signed radicand


class NotDivisionAlgebra(ArithmeticError):
    """A nonzero element of the would-be division algebra has zero norm."""


def _is_squarefree(d: int) -> bool:
    if d < 1:
        return False
    f = 2
    while f * f <= d:
        if d % (f * f) == 0:
            return False
        f += 1
    return True


def _as_element(x) -> Element:
    a, b = x
    return (Fraction(a), Fraction(b))


@dataclass(frozen=True)
class QuadraticField:
    """Q(sqrt(-d)) if kind == "imaginary", Q(sqrt(d)) if kind == "real".

    Elements are (a, b) pairs of rationals meaning a + b*sqrt(m) with m the
    signed radicand; conjugation flips the sign of b.
    """

    kind: str
    d: int

    def __post_init__(self):
        if self.kind not in ("imaginary", "real"):
            raise ValueError("kind must be 'imaginary' or 'real'")
        if not _is_squarefree(self.d):
            raise ValueError(f"d={self.d} must be a square-free positive integer")

    @property
    def radicand(self) -> int:
        return -self.d if self.kind == "imaginary" else self.d

    def conjugate(self, x) -> Element:
        a, b = _as_element(x)
        return (a, -b)

    def embed(self, x) -> complex:
        """Canonical embedding into C: sqrt(-d) -> i*sqrt(d), sqrt(d) -> real."""
        a, b = _as_element(x)
        root = math.sqrt(self.d)
        if self.kind == "imaginary":
            return complex(a, b * root)
        return complex(a + b * root, 0.0)

    def add(self, x, y) -> Element:
        xa, xb = _as_element(x)
        ya, yb = _as_element(y)
        return (xa + ya, xb + yb)

    def mul(self, x, y) -> Element:
        xa, xb = _as_element(x)
        ya, yb = _as_element(y)
        m = self.radicand
        return (xa * ya + m * xb * yb, xa * yb + xb * ya)

    def norm(self, x) -> Fraction:
        """Field norm x * conj(x) = a^2 - m*b^2, exact."""
        a, b = _as_element(x)
        return a * a - self.radicand * b * b

    def omega(self) -> Element:
        """Second element of the integral basis {1, omega} of the integer ring.

        omega = (1 + sqrt(m))/2 when the signed radicand m is 1 mod 4,
        else sqrt(m).
        """
        if self.radicand % 4 == 1:
            return (Fraction(1, 2), Fraction(1, 2))
        return (Fraction(0), Fraction(1))


class RamificationClass(enum.Enum):
    RAMIFIED_AT_INFINITY = "ramified"
    UNRAMIFIED_AT_INFINITY = "unramified"


@dataclass(frozen=True)
class CyclicAlgebraSpec:
    """Degree-2 cyclic algebra (E/Q, sigma, gamma) with E a quadratic field."""

    field: QuadraticField
    gamma: Fraction
    n: int = 2

    def __post_init__(self):
        object.__setattr__(self, "gamma", Fraction(self.gamma))
        if self.gamma == 0:
            raise ValueError("gamma must be nonzero")
        if self.n != 2:
            raise ValueError("built-in constructors support index n=2 only")


def psi_reg(spec: CyclicAlgebraSpec, coeffs) -> np.ndarray:
    """Left regular representation of x0 + u*x1 as a complex 2x2 matrix.

    Returns [[x0, gamma*sigma(x1)], [x1, sigma(x0)]] under the canonical
    embedding; a Q-linear ring homomorphism into M_2(C).
    """
    if len(coeffs) != spec.n:
        raise ValueError(f"expected {spec.n} coefficients, got {len(coeffs)}")
    K = spec.field
    x0, x1 = (_as_element(c) for c in coeffs)
    g = spec.gamma
    gs_x1 = K.mul((g, Fraction(0)), K.conjugate(x1))
    return np.array([
        [K.embed(x0), K.embed(gs_x1)],
        [K.embed(x1), K.embed(K.conjugate(x0))],
    ])


def reduced_norm(spec: CyclicAlgebraSpec, coeffs) -> Fraction:
    """Exact reduced norm N(x0) - gamma*N(x1) = det(psi_reg(x))."""
    if len(coeffs) != spec.n:
        raise ValueError(f"expected {spec.n} coefficients, got {len(coeffs)}")
    K = spec.field
    x0, x1 = (_as_element(c) for c in coeffs)
    return K.norm(x0) - spec.gamma * K.norm(x1)


def algebra_mul(spec: CyclicAlgebraSpec, x, y) -> tuple[Element, Element]:
    """Product in the cyclic algebra, in (x0, x1) coordinates.

    (x0 + u x1)(y0 + u y1) = [x0 y0 + gamma*sigma(x1) y1] + u[sigma(x0) y1 + x1 y0],
    using x u = u sigma(x) and u^2 = gamma.
    """
    K = spec.field
    x0, x1 = (_as_element(c) for c in x)
    y0, y1 = (_as_element(c) for c in y)
    g = (spec.gamma, Fraction(0))
    z0 = K.add(K.mul(x0, y0), K.mul(K.mul(g, K.conjugate(x1)), y1))
    z1 = K.add(K.mul(K.conjugate(x0), y1), K.mul(x1, y0))
    return (z0, z1)


def algebra_add(spec: CyclicAlgebraSpec, x, y) -> tuple[Element, Element]:
    K = spec.field
    return (K.add(x[0], y[0]), K.add(x[1], y[1]))


def classify_ramification(spec: CyclicAlgebraSpec) -> RamificationClass:
    """Ramified at infinity iff E is imaginary and gamma < 0 (then D (x) R = H)."""
    if spec.field.kind == "imaginary" and spec.gamma < 0:
        return RamificationClass.RAMIFIED_AT_INFINITY
    return RamificationClass.UNRAMIFIED_AT_INFINITY


def _order_det_sq_hook(spec: CyclicAlgebraSpec):
    """Vectorized exact |det|^2 of integer combinations of the order basis.

    Coefficients (c0, c1, c2, c3) mean x0 = c0 + c1*omega, x1 = c2 + c3*omega.
    With omega = (wa + wb*sqrt(m))/2 (wa, wb integers), 4*N(x) is an integer
    polynomial in the coefficients, and the reduced norm N(x0) - gamma*N(x1)
    has denominator 4*q for gamma = p/q.
    """
    K = spec.field
    m = K.radicand
    wa, wb = K.omega()
    wa2, wb2 = int(2 * wa), int(2 * wb)
    p, q = spec.gamma.numerator, spec.gamma.denominator

    def hook(coeffs: np.ndarray) -> tuple[np.ndarray, int]:
        c = coeffs.astype(np.int64)
        a0 = 2 * c[:, 0] + wa2 * c[:, 1]   # 2*(rational part of x0)
        b0 = wb2 * c[:, 1]
        a1 = 2 * c[:, 2] + wa2 * c[:, 3]
        b1 = wb2 * c[:, 3]
        n0 = a0 * a0 - m * b0 * b0         # 4*N(x0)
        n1 = a1 * a1 - m * b1 * b1
        num = q * n0 - p * n1              # 4*q*(reduced norm)
        return num * num, 16 * q * q

    return hook


def order_lattice(spec: CyclicAlgebraSpec, label: str = "") -> MatrixLattice:
    """Image of the natural order Z<1, omega, u, u*omega> under psi_reg.

    A 4-dimensional lattice whose points have integer reduced norm (up to the
    gamma denominator), hence min |det| >= 1 on any shell when the algebra is
    a division algebra.  Division-ness is falsified empirically: any nonzero
    coefficient vector in a small box with zero reduced norm raises
    NotDivisionAlgebra.
    """
    K = spec.field
    one: Element = (Fraction(1), Fraction(0))
    zero: Element = (Fraction(0), Fraction(0))
    omega = K.omega()
    coeff_basis = [(one, zero), (omega, zero), (zero, one), (zero, omega)]
    basis = [psi_reg(spec, c) for c in coeff_basis]

    for c in itertools.product(range(-2, 3), repeat=4):
        if c == (0, 0, 0, 0):
            continue
        x0 = K.add((Fraction(c[0]), Fraction(0)), K.mul((Fraction(c[1]), Fraction(0)), omega))
        x1 = K.add((Fraction(c[2]), Fraction(0)), K.mul((Fraction(c[3]), Fraction(0)), omega))
        if reduced_norm(spec, (x0, x1)) == 0:
            raise NotDivisionAlgebra(
                f"nonzero element with zero reduced norm at coefficients {c}: "
                f"gamma={spec.gamma} is a norm of the field")

    ambient = _infer_ambient(basis)
    return MatrixLattice(n=2, blocks=1, basis=tuple(basis), ambient=ambient,
                         label=label or f"order({spec.field.kind} d={spec.field.d}, gamma={spec.gamma})",
                         det_sq_hook=_order_det_sq_hook(spec))


def _infer_ambient(basis) -> Ambient:
    if all(np.all(B.imag == 0) for B in basis):
        return Ambient.REAL
    n = basis[0].shape[0]
    if n % 2 == 0:
        p = n // 2
        quat = all(
            np.array_equal(B[:p, p:], -B[p:, :p].conj())
            and np.array_equal(B[p:, p:], B[:p, :p].conj())
            for B in basis)
        if quat:
            return Ambient.QUATERNION
    return Ambient.COMPLEX


def alamouti_lattice() -> MatrixLattice:
    """Alamouti code lattice: order of (Q(i)/Q, sigma, -1), quaternionic."""
    spec = CyclicAlgebraSpec(QuadraticField("imaginary", 1), Fraction(-1))
    return order_lattice(spec, label="alamouti")


def real_sqrt3_lattice() -> MatrixLattice:
    """Completely real lattice: order of (Q(sqrt(3))/Q, sigma, -1)."""
    spec = CyclicAlgebraSpec(QuadraticField("real", 3), Fraction(-1))
    return order_lattice(spec, label="real_sqrt3")


def unramified_gamma3_lattice() -> MatrixLattice:
    """Order of (Q(i)/Q, sigma, 3): unramified at infinity yet not real-valued."""
    spec = CyclicAlgebraSpec(QuadraticField("imaginary", 1), Fraction(3))
    return order_lattice(spec, label="unramified_gamma3")


def golden_code() -> MatrixLattice:
    """The Golden code as an 8-dimensional lattice in M_2(C).

    Codewords (1/sqrt(5)) * [[alpha(a + b*theta), alpha(c + d*theta)],
    [i*alphabar(c + d*thetabar), alphabar(a + b*thetabar)]] over Gaussian
    integers a, b, c, d, with theta the golden ratio and alpha = 1 + i(1-theta).
    The basis is the image of the unit coefficient choices 1, i in each slot.
    """
    s5 = math.sqrt(5.0)
    theta = (1.0 + s5) / 2.0
    thetab = (1.0 - s5) / 2.0
    alpha = 1.0 + 1j * (1.0 - theta)
    alphab = 1.0 + 1j * (1.0 - thetab)

    def word(a: complex, b: complex, c: complex, d: complex) -> np.ndarray:
        return np.array([
            [alpha * (a + b * theta), alpha * (c + d * theta)],
            [1j * alphab * (c + d * thetab), alphab * (a + b * thetab)],
        ]) / s5

    units = (1.0, 1j)
    basis = []
    for slot in range(4):
        for u in units:
            coeffs = [0.0, 0.0, 0.0, 0.0]
            coeffs[slot] = u
            basis.append(word(*coeffs))

    def hook(coeffs: np.ndarray) -> tuple[np.ndarray, int]:
        # coefficients order: (Re a, Im a, Re b, Im b, Re c, Im c, Re d, Im d)
        c = coeffs.astype(np.int64)
        ar, ai, br, bi, cr, ci, dr, di = (c[:, j] for j in range(8))
        # z1 = a^2 + a*b - b^2 and z2 = c^2 + c*d - d^2 over Z[i]
        z1r = ar * ar - ai * ai + ar * br - ai * bi - (br * br - bi * bi)
        z1i = 2 * ar * ai + ar * bi + ai * br - 2 * br * bi
        z2r = cr * cr - ci * ci + cr * dr - ci * di - (dr * dr - di * di)
        z2i = 2 * cr * ci + cr * di + ci * dr - 2 * dr * di
        # det = (2+i)/5 * (z1 - i*z2);  |det|^2 = |z1 - i*z2|^2 / 5
        wr = z1r + z2i
        wi = z1i - z2r
        return wr * wr + wi * wi, 5

    return MatrixLattice(n=2, blocks=1, basis=tuple(basis), ambient=Ambient.COMPLEX,
                         label="golden", det_sq_hook=hook)


def diag_replicate(lat: MatrixLattice, copies: int) -> MatrixLattice:
    """Block-diagonal replication B -> diag(B, ..., B) into M_{n*copies}(C).

    Rank is unchanged and det(diag(X,..,X)) = det(X)^copies, so NVD survives
    while the ambient dimension grows; this is the embedding behind the
    weak-NVD counterexample.
    """
    if copies < 1:
        raise ValueError("copies must be >= 1")
    if lat.blocks != 1:
        raise ValueError("diag replication applies to single-block lattices")
    if copies == 1:
        return lat
    eye = np.eye(copies)
    basis = tuple(np.kron(eye, B) for B in lat.basis)

    hook = None
    if lat.det_sq_hook is not None:
        base_hook = lat.det_sq_hook

        def hook(coeffs: np.ndarray) -> tuple[np.ndarray, int]:
            num, den = base_hook(coeffs)
            if num.size and int(np.abs(num).max()) ** copies >= 2 ** 62:
                raise OverflowError("exact |det|^2 power exceeds int64 range")
            return num ** copies, den ** copies

    return MatrixLattice(n=lat.n * copies, blocks=1, basis=basis, ambient=lat.ambient,
                         label=f"diag({lat.label})x{copies}" if lat.label else f"diag x{copies}",
                         det_sq_hook=hook)


def number_field_multiblock(d: int) -> MatrixLattice:
    """Two-block code [x, sigma(x)] from the two real embeddings of Q(sqrt(d)).

    x runs over the ring of integers; the block-determinant product is the
    field norm, a nonzero rational integer, giving multi-block NVD.
    """
    if d < 2 or not _is_squarefree(d):
        raise ValueError("d must be a square-free integer >= 2")
    K = QuadraticField("real", d)
    omega = K.omega()
    one: Element = (Fraction(1), Fraction(0))

    def block_row(x: Element) -> np.ndarray:
        return np.array([[K.embed(x), K.embed(K.conjugate(x))]])

    basis = (block_row(one), block_row(omega))

    wa2, wb2 = int(2 * omega[0]), int(2 * omega[1])

    def hook(coeffs: np.ndarray) -> tuple[np.ndarray, int]:
        c = coeffs.astype(np.int64)
        a = 2 * c[:, 0] + wa2 * c[:, 1]
        b = wb2 * c[:, 1]
        num = a * a - d * b * b            # 4*N(x)
        return num * num, 16

    return MatrixLattice(n=1, blocks=2, basis=basis, ambient=Ambient.REAL,
                         label=f"nf_multiblock({d})", det_sq_hook=hook)
