"""Exhaustive maximum-likelihood decoding and Monte Carlo error estimation.

Decoding is exact minimization of sum_l ||Y_l - sqrt(rho/n) H_l X_l||_F^2
over the whole codebook.  The Monte Carlo farm evaluates the same metric
through an algebraically expanded form (linear + quadratic features of each
word, one GEMM per trial block) so million-trial sweeps over 1e5-word
codebooks stay fast; a trial is an error exactly when some word strictly
beats the transmitted one.  Trials draw from counter-based per-block
generators, so error counts are bit-identical for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import channel as channel_mod
from ._rng import STREAM_CHANNEL, STREAM_MESSAGE, block_ranges, block_rng, worker_count
from .channel import ChannelInstance, ChannelSpec, Model
from .lattice import Codebook, make_codebook

_Z95 = 1.959963984540054
# metric tiles of 256 trials x 8192 words stay cache-resident; larger tiles
# push the GEMM output through DRAM and dominate the decode time
_TILE_WORDS = 8192
_TILE_TRIALS = 256


@dataclass(frozen=True)
class ErrorEstimate:
    """Monte Carlo error probability with a 95% Wilson interval."""

    rho: float
    trials: int
    errors: int

    @property
    def p_hat(self) -> float:
        return self.errors / self.trials

    @property
    def half_width(self) -> float:
        n, p, z = self.trials, self.p_hat, _Z95
        denom = 1 + z * z / n
        return (z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))) / denom

    @property
    def ci(self) -> tuple[float, float]:
        n, p, z = self.trials, self.p_hat, _Z95
        denom = 1 + z * z / n
        center = (p + z * z / (2 * n)) / denom
        hw = self.half_width
        return (max(0.0, center - hw), min(1.0, center + hw))


def _words_as_blocks(words: np.ndarray, n: int, blocks: int) -> np.ndarray:
    """(count, n, n*blocks) -> (count, blocks, n, n)."""
    return np.stack([words[:, :, l * n:(l + 1) * n] for l in range(blocks)], axis=1)


def ml_decode(cb: Codebook, inst: ChannelInstance, Y: np.ndarray) -> int:
    """Exact ML word index: argmin of the per-block Frobenius metric.

    Ties resolve to the lowest index (np.argmin convention), making the
    decision deterministic.
    """
    if len(cb) == 0:
        raise ValueError("codebook is empty")
    spec = inst.spec
    amp = math.sqrt(inst.rho / spec.n_tx)
    X = _words_as_blocks(cb.words, spec.n_tx, spec.blocks)
    best_val, best_idx = math.inf, 0
    for lo in range(0, len(cb), _TILE_WORDS):
        chunk = X[lo:lo + _TILE_WORDS]
        HX = amp * np.einsum("krn,wknm->wkrm", inst.H, chunk)
        diff = HX - Y[None]
        metrics = np.einsum("wkrm,wkrm->w", diff, diff.conj()).real
        i = int(np.argmin(metrics))
        if metrics[i] < best_val:
            best_val, best_idx = float(metrics[i]), lo + i
    return best_idx


def decode_metrics(cb: Codebook, inst: ChannelInstance, Y: np.ndarray) -> np.ndarray:
    """All word metrics for one received block (reference path for tests)."""
    spec = inst.spec
    amp = math.sqrt(inst.rho / spec.n_tx)
    X = _words_as_blocks(cb.words, spec.n_tx, spec.blocks)
    HX = amp * np.einsum("krn,wknm->wkrm", inst.H, X)
    diff = HX - Y[None]
    return np.einsum("wkrm,wkrm->w", diff, diff.conj()).real


# ---------------------------------------------------------------------------
# Feature-form metric for the trial farm
# ---------------------------------------------------------------------------
#
# ||Y - a H X||^2 = ||Y||^2 - 2a Re tr(X^dag (H^dag Y)) + a^2 tr((H^dag H)(X X^dag)).
# Dropping the per-trial constant ||Y||^2 leaves an inner product between a
# per-trial vector and a per-word vector of dimension 3*n^2 per block, so a
# whole block of trials scores the whole codebook in one matrix product.

def _herm_features(Ms: np.ndarray) -> np.ndarray:
    """Pack Hermitian matrices (..., n, n) into real vectors (..., n^2)."""
    n = Ms.shape[-1]
    iu, ju = np.triu_indices(n, k=1)
    diag = Ms[..., np.arange(n), np.arange(n)].real
    up = Ms[..., iu, ju]
    return np.concatenate([diag, up.real, up.imag], axis=-1)


def _word_feature_matrix(Xb: np.ndarray) -> np.ndarray:
    """Word features, shape (D, count), Fortran order for fast GEMM tiles."""
    count, blocks, n, _ = Xb.shape
    feats = []
    for l in range(blocks):
        X = Xb[:, l]
        flat = X.reshape(count, n * n)
        S = X @ X.conj().transpose(0, 2, 1)
        feats.extend([flat.real, flat.imag, _herm_features(S)])
    F = np.concatenate(feats, axis=1)  # (count, D)
    return np.asfortranarray(F.T)


def _trial_feature_matrix(H: np.ndarray, Y: np.ndarray, amp: float) -> np.ndarray:
    """Trial features, shape (batch, D), matching _word_feature_matrix."""
    batch, blocks = H.shape[0], H.shape[1]
    n = H.shape[3]
    feats = []
    for l in range(blocks):
        Hl, Yl = H[:, l], Y[:, l]
        A = np.einsum("brn,brm->bnm", Hl.conj(), Yl)      # H^dag Y
        G = np.einsum("brn,brm->bnm", Hl.conj(), Hl)      # H^dag H
        lin = (-2.0 * amp) * A.reshape(batch, n * n)
        quad = _herm_features(G) * (amp * amp)
        # doubled off-diagonal multipliers for tr(G S)
        quad[:, n:] *= 2.0
        feats.extend([lin.real, lin.imag, quad])
    return np.concatenate(feats, axis=1)


def _count_errors(trial_feats: np.ndarray, word_feats: np.ndarray,
                  msg: np.ndarray) -> int:
    """Errors in one trial block: some word strictly beats the sent one."""
    batch = trial_feats.shape[0]
    nwords = word_feats.shape[1]
    errors = 0
    for t0 in range(0, batch, _TILE_TRIALS):
        t1 = min(t0 + _TILE_TRIALS, batch)
        T = trial_feats[t0:t1]
        sub = msg[t0:t1]
        best = np.full(t1 - t0, np.inf)
        sent = np.empty(t1 - t0)
        for w0 in range(0, nwords, _TILE_WORDS):
            w1 = min(w0 + _TILE_WORDS, nwords)
            tile = T @ word_feats[:, w0:w1]
            np.minimum(best, tile.min(axis=1), out=best)
            inside = (sub >= w0) & (sub < w1)
            if inside.any():
                rows = np.nonzero(inside)[0]
                sent[rows] = tile[rows, sub[rows] - w0]
        errors += int(np.count_nonzero(best < sent))
    return errors


def _diag_fold(words_b: np.ndarray, n: int) -> tuple[int, np.ndarray]:
    """Largest f with every word exactly diag(X,...,X) of f copies.

    Folding turns a 1-row MISO metric over n x n block-diagonal words into
    an equivalent f-row metric over the n/f x n/f core, shrinking the
    feature dimension; the metrics are identical term by term.
    """
    count = words_b.shape[0]
    W = words_b[:, 0]
    for f in range(n, 1, -1):
        if n % f != 0:
            continue
        p = n // f
        core = W[:, :p, :p]
        ok = True
        for i in range(f):
            for j in range(f):
                blk = W[:, i * p:(i + 1) * p, j * p:(j + 1) * p]
                if i == j:
                    ok = np.array_equal(blk, core)
                else:
                    ok = not np.any(blk)
                if not ok:
                    break
            if not ok:
                break
        if ok:
            return f, core.reshape(count, 1, p, p)
    return 1, words_b


def power_gain(words: np.ndarray, n: int, blocks: int) -> float:
    """Factor bringing the average codeword energy up to the n^2*blocks budget.

    The spherical scheme satisfies the average power constraint with lots of
    slack (its words have Frobenius norm at most 1); transmitting at the
    allowed power is a rho-independent gain up to shell boundary effects, so
    it shifts error curves without touching their slope.
    """
    energy = float(np.mean(np.einsum("wij,wij->w", words, words.conj()).real))
    return math.sqrt(n * n * blocks / energy)


def error_prob_mc(lat, spec: ChannelSpec, rho: float, r: float, trials: int,
                  seed: int, *, workers: int | None = None,
                  h_override: np.ndarray | None = None,
                  noise_scale: float = 1.0,
                  normalize_power: bool = True,
                  codebook: Codebook | None = None) -> ErrorEstimate:
    """Codeword error rate of the lattice scheme under ML decoding.

    Each trial draws an independent channel and noise, transmits a uniformly
    random codeword and decodes exhaustively.  Words are scaled to meet the
    average power constraint with equality unless `normalize_power` is
    False.  `h_override` freezes the channel (debugging aid) and
    `noise_scale` scales the noise draw.  Deterministic in (seed, trials)
    for any worker count.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    cb = codebook if codebook is not None else make_codebook(lat, rho, r)
    n, blocks = spec.n_tx, spec.blocks
    if cb.words.shape[1:] != (n, n * blocks):
        raise ValueError("codebook geometry does not match the channel spec")
    amp = math.sqrt(rho / n)
    if normalize_power:
        amp *= power_gain(cb.words, n, blocks)
    words_b = _words_as_blocks(cb.words, n, blocks)

    fold = 1
    if spec.model is Model.COMPLEX and spec.m_rx == 1 and blocks == 1 and n > 1:
        fold, words_b = _diag_fold(words_b, n)
    word_feats = _word_feature_matrix(words_b)
    nwords = len(cb)

    ranges = block_ranges(trials)

    def run_block(args) -> int:
        block, start, stop = args
        count = stop - start
        rng_ch = block_rng(seed, STREAM_CHANNEL, block)
        rng_msg = block_rng(seed, STREAM_MESSAGE, block)
        H = channel_mod.sample_channel_batch(spec, rng_ch, count)
        W = channel_mod.sample_noise_batch(spec, rng_ch, count)
        if h_override is not None:
            # fixed (blocks, rows, n) channel applied to every trial
            H = np.broadcast_to(np.asarray(h_override, dtype=H.dtype), H.shape)
        if noise_scale != 1.0:
            W = W * noise_scale
        msg = rng_msg.integers(0, nwords, size=count)
        X = _words_as_blocks(cb.words[msg], n, blocks)
        Y = amp * np.einsum("bkrn,bknm->bkrm", H, X) + W
        if fold > 1:
            p = n // fold
            Hf = H.reshape(count, 1, fold, p)
            Yf = Y.reshape(count, 1, fold, p)
        else:
            Hf, Yf = H, Y
        trial_feats = _trial_feature_matrix(Hf, Yf, amp)
        return _count_errors(trial_feats, word_feats, msg)

    nworkers = worker_count(workers)
    if nworkers > 1:
        with ThreadPoolExecutor(max_workers=nworkers) as pool:
            per_block = list(pool.map(run_block, ranges))
    else:
        per_block = [run_block(a) for a in ranges]
    return ErrorEstimate(rho=float(rho), trials=trials, errors=int(sum(per_block)))
