"""Rayleigh MIMO channel sampling and the real/quaternion equivalent channels.

The base model is a quasi-static block fading channel

    Y = sqrt(rho/n) H X + W

with i.i.d. circularly symmetric complex Gaussian H and W (unit variance per
complex entry).  Real codes can equivalently be received through a stacked
real channel with 2m rows whose entries are real Gaussian with variance 1/2,
and quaternionic codes through a structured channel

    H = [[H1, H2], [-conj(H2), conj(H1)]]

whose Gram matrix has eigenvalues of even multiplicity.  Multi-block
operation fades each of the k blocks independently.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from ._rng import STREAM_CHANNEL, block_rng


class Model(enum.Enum):
    COMPLEX = "complex"
    REAL_EQUIVALENT = "real_equivalent"
    QUATERNION_EQUIVALENT = "quaternion_equivalent"


class QuaternionPairingError(ArithmeticError):
    """Eigenvalues of a quaternion Gram matrix failed to pair up."""


@dataclass(frozen=True)
class ChannelSpec:
    n_tx: int
    m_rx: int
    blocks: int = 1
    model: Model = Model.COMPLEX

    def __post_init__(self):
        if self.n_tx < 1 or self.m_rx < 1 or self.blocks < 1:
            raise ValueError("n_tx, m_rx and blocks must be positive")
        if self.model is Model.QUATERNION_EQUIVALENT and self.n_tx % 2 != 0:
            raise ValueError("quaternion equivalent channel needs even n_tx")

    @property
    def rows(self) -> int:
        """Row count of the (equivalent) channel matrix."""
        return self.m_rx if self.model is Model.COMPLEX else 2 * self.m_rx


@dataclass(frozen=True)
class ChannelInstance:
    spec: ChannelSpec
    rho: float
    H: np.ndarray  # (blocks, rows, n_tx)
    W: np.ndarray  # (blocks, rows, n_tx)
    seed_info: str = field(default="", compare=False)


def _complex_gaussian(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    z = rng.standard_normal(shape + (2,))
    return (z[..., 0] + 1j * z[..., 1]) * np.sqrt(0.5)


def realify(Hc: np.ndarray) -> np.ndarray:
    """Real equivalent of a complex channel: stack [Re(Hc); Im(Hc)].

    An m x n complex channel acting on a real codeword is the same linear
    map as this 2m x n real channel (entries real Gaussian, variance 1/2).
    """
    return np.concatenate([Hc.real, Hc.imag], axis=-2)


def quaternionify(Hc: np.ndarray) -> np.ndarray:
    """Quaternion equivalent [[H1, H2], [-conj(H2), conj(H1)]] of an m x n
    complex channel split as Hc = [H1, H2] (n even)."""
    p = Hc.shape[-1] // 2
    if Hc.shape[-1] != 2 * p:
        raise ValueError("quaternion equivalent needs an even column count")
    h1, h2 = Hc[..., :p], Hc[..., p:]
    top = np.concatenate([h1, h2], axis=-1)
    bot = np.concatenate([-h2.conj(), h1.conj()], axis=-1)
    return np.concatenate([top, bot], axis=-2)


def _equivalent_draw(spec: ChannelSpec, rng: np.random.Generator, count: int) -> np.ndarray:
    k, n, m = spec.blocks, spec.n_tx, spec.m_rx
    Hc = _complex_gaussian(rng, (count, k, m, n))
    if spec.model is Model.COMPLEX:
        return Hc
    if spec.model is Model.REAL_EQUIVALENT:
        return realify(Hc)
    return quaternionify(Hc)


def sample_channel_batch(spec: ChannelSpec, rng: np.random.Generator, count: int) -> np.ndarray:
    """Draw `count` channel matrices, shape (count, blocks, rows, n_tx)."""
    return _equivalent_draw(spec, rng, count)


def sample_noise_batch(spec: ChannelSpec, rng: np.random.Generator, count: int) -> np.ndarray:
    """Draw noise matching the (equivalent) channel geometry."""
    return _equivalent_draw(spec, rng, count)


def sample(spec: ChannelSpec, rho: float, seed: int) -> ChannelInstance:
    """One channel + noise realization, deterministic in (spec, rho, seed)."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    rng = block_rng(seed, STREAM_CHANNEL, 0)
    H = sample_channel_batch(spec, rng, 1)[0]
    W = sample_noise_batch(spec, rng, 1)[0]
    return ChannelInstance(spec=spec, rho=float(rho), H=H, W=W,
                           seed_info=f"philox seed={seed} stream={STREAM_CHANNEL} block=0")


def split_blocks(word: np.ndarray, blocks: int) -> np.ndarray:
    """View an n x (n*blocks) codeword as a (blocks, n, n) stack."""
    n = word.shape[0]
    if word.shape != (n, n * blocks):
        raise ValueError(f"codeword shape {word.shape} does not match {blocks} blocks of {n}x{n}")
    return np.stack([word[:, l * n:(l + 1) * n] for l in range(blocks)])


def transmit(inst: ChannelInstance, word: np.ndarray, noise: bool = True) -> np.ndarray:
    """Apply Y_l = sqrt(rho/n) H_l X_l + W_l per block; returns (blocks, rows, n)."""
    spec = inst.spec
    X = split_blocks(np.asarray(word), spec.blocks)
    amp = np.sqrt(inst.rho / spec.n_tx)
    Y = amp * (inst.H @ X)
    if noise:
        Y = Y + inst.W
    return Y


def quaternion_gram_eigenvalues(inst: ChannelInstance, rel_tol: float = 1e-9) -> np.ndarray:
    """Distinct eigenvalues of H^dag H per block, certifying even multiplicity.

    The Gram matrix of a quaternion-structured channel has every eigenvalue
    with multiplicity 2; returns the (blocks, n/2) distinct values sorted
    ascending and raises QuaternionPairingError if consecutive sorted
    eigenvalues fail to pair within `rel_tol` relative.
    """
    if inst.spec.model is not Model.QUATERNION_EQUIVALENT:
        raise ValueError("pairing certificate only applies to the quaternion model")
    gram = np.einsum("bij,bik->bjk", inst.H.conj(), inst.H)
    ev = np.linalg.eigvalsh(gram)  # ascending, real
    even, odd = ev[:, 0::2], ev[:, 1::2]
    scale = np.maximum(np.abs(even), np.abs(odd))
    gap = np.abs(even - odd)
    if np.any(gap > rel_tol * np.maximum(scale, 1.0)):
        raise QuaternionPairingError(
            f"eigenvalue pairing violated by {gap.max():.3e} (rel_tol={rel_tol})")
    return 0.5 * (even + odd)
