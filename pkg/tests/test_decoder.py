"""ML decoding exactness, the fast feature path, and the trial farm."""

import math

import numpy as np
import pytest

from stc_dmt import channel, decoder
from stc_dmt.channel import ChannelInstance, ChannelSpec, transmit
from stc_dmt.decoder import (ErrorEstimate, _count_errors, _diag_fold,
                             _trial_feature_matrix, _word_feature_matrix,
                             _words_as_blocks, decode_metrics, error_prob_mc,
                             ml_decode)
from stc_dmt.lattice import Codebook, MatrixLattice, make_codebook

SPEC21 = ChannelSpec(2, 1)


def antipodal_codebook(rho=10.0):
    X = np.array([[1, 0], [0, 1]], dtype=complex)
    lat = MatrixLattice(n=2, blocks=1, basis=(X,))
    words = np.stack([X, -X])
    return Codebook(lattice=lat, rho=rho, r=0.0, scale=1.0, words=words,
                    coeffs=np.array([[1], [-1]], dtype=np.int64), fallback=True)


def test_zero_noise_recovers_message(alamouti):
    cb = make_codebook(alamouti, 50.0, 0.0)
    inst = channel.sample(SPEC21, 50.0, 17)
    for idx in (0, 5, 11):
        Y = transmit(inst, cb.words[idx], noise=False)
        assert ml_decode(cb, inst, Y) == idx


def test_metric_is_unitary_invariant(alamouti, rng):
    spec = ChannelSpec(2, 2)
    cb = make_codebook(alamouti, 30.0, 0.0)
    inst = channel.sample(spec, 30.0, 4)
    Y = transmit(inst, cb.words[3])
    base = decode_metrics(cb, inst, Y)
    Q, _ = np.linalg.qr(rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))
    rotated = ChannelInstance(spec=spec, rho=inst.rho, H=Q[None] @ inst.H, W=inst.W)
    rot = decode_metrics(cb, rotated, Q[None] @ Y)
    assert np.allclose(base, rot, rtol=1e-9)


def test_exhaustive_scan_is_order_independent(alamouti):
    cb = make_codebook(alamouti, 40.0, 0.0)
    inst = channel.sample(SPEC21, 40.0, 23)
    Y = transmit(inst, cb.words[7])
    metrics = decode_metrics(cb, inst, Y)
    lo = metrics.min()
    forward = {i for i, v in enumerate(metrics) if v == lo}
    backward = {len(metrics) - 1 - i for i, v in enumerate(metrics[::-1]) if v == lo}
    assert forward == backward
    assert ml_decode(cb, inst, Y) == min(forward)


def test_huge_noise_antipodal_is_coin_flip():
    cb = antipodal_codebook()
    est = error_prob_mc(None, SPEC21, 10.0, 0.0, 100_000, seed=5,
                        codebook=cb, noise_scale=1e6, normalize_power=False)
    assert est.p_hat == pytest.approx(0.5, abs=0.015)


def test_identity_channel_zero_noise_is_error_free(alamouti):
    spec = ChannelSpec(2, 2)
    est = error_prob_mc(alamouti, spec, 100.0, 0.0, 5_000, seed=6,
                        h_override=np.eye(2, dtype=complex)[None], noise_scale=0.0)
    assert est.p_hat == 0.0


def test_error_counts_reproduce_across_worker_counts(alamouti):
    runs = [error_prob_mc(alamouti, SPEC21, 10 ** 1.5, 0.0, 30_000, seed=9, workers=w)
            for w in (1, 2, 8)]
    assert runs[0].errors == runs[1].errors == runs[2].errors


def test_wilson_interval_scaling():
    # doubling trials at the same rate halves the squared half-width
    a = ErrorEstimate(rho=10.0, trials=20_000, errors=100)
    b = ErrorEstimate(rho=10.0, trials=40_000, errors=200)
    assert a.half_width ** 2 / b.half_width ** 2 == pytest.approx(2.0, rel=0.2)
    lo, hi = a.ci
    assert 0.0 <= lo < a.p_hat < hi <= 1.0


def test_wilson_interval_shrinks_in_practice(alamouti):
    small = error_prob_mc(alamouti, SPEC21, 10.0, 0.0, 20_000, seed=11)
    large = error_prob_mc(alamouti, SPEC21, 10.0, 0.0, 80_000, seed=11)
    assert large.half_width < small.half_width


def test_feature_path_matches_reference_decoder(diag_golden, rng):
    # the GEMM feature metric and the direct Frobenius metric agree on
    # decisions (and near-exactly on metric differences)
    spec = ChannelSpec(4, 1)
    rho = 10 ** 1.5
    cb = make_codebook(diag_golden, rho, 0.5)
    words_b = _words_as_blocks(cb.words, 4, 1)
    fold, folded = _diag_fold(words_b, 4)
    assert fold == 2
    F = _word_feature_matrix(folded)
    amp = math.sqrt(rho / 4)

    batch = 64
    rng_np = np.random.default_rng(3)
    H = channel.sample_channel_batch(spec, np.random.default_rng(31), batch)
    W = channel.sample_noise_batch(spec, np.random.default_rng(32), batch)
    msg = rng_np.integers(0, len(cb), batch)
    X = _words_as_blocks(cb.words[msg], 4, 1)
    Y = amp * np.einsum("bkrn,bknm->bkrm", H, X) + W

    T = _trial_feature_matrix(H.reshape(batch, 1, 2, 2), Y.reshape(batch, 1, 2, 2), amp)
    fast_metrics = T @ F  # (batch, words), offset by -||Y||^2 per trial

    errors = 0
    for t in range(batch):
        inst = ChannelInstance(spec=spec, rho=rho, H=H[t], W=W[t])
        ref = decode_metrics(cb, inst, Y[t])
        offset = np.einsum("krn,krn->", Y[t], Y[t].conj()).real
        assert np.allclose(fast_metrics[t] + offset, ref, rtol=1e-9, atol=1e-9)
        if int(np.argmin(ref)) != msg[t]:
            errors += 1
    assert _count_errors(T, F, msg) == errors


def test_fold_is_rejected_for_general_words(golden):
    cb = make_codebook(golden, 10 ** 1.5, 0.5)
    fold, _ = _diag_fold(_words_as_blocks(cb.words, 2, 1), 2)
    assert fold == 1


def test_multiblock_decoding_runs(nf5):
    spec = ChannelSpec(1, 1, blocks=2)
    est = error_prob_mc(nf5, spec, 10 ** 1.5, 0.0, 50_000, seed=13)
    assert 1e-4 < est.p_hat < 2e-2


def test_equivalent_channel_models_decode(real_sqrt3, alamouti):
    # real code through the stacked real channel, quaternionic code through
    # the structured channel: both must run and see reasonable error rates
    real_spec = ChannelSpec(2, 1, model=channel.Model.REAL_EQUIVALENT)
    est = error_prob_mc(real_sqrt3, real_spec, 10 ** 1.5, 0.0, 30_000, seed=15)
    assert 0 < est.p_hat < 0.1
    quat_spec = ChannelSpec(2, 1, model=channel.Model.QUATERNION_EQUIVALENT)
    est = error_prob_mc(alamouti, quat_spec, 10 ** 1.5, 0.0, 30_000, seed=15)
    assert 0 < est.p_hat < 0.1


def test_alamouti_error_rate_smoke(alamouti):
    est = error_prob_mc(alamouti, SPEC21, 10 ** 1.5, 0.0, 100_000, seed=21)
    assert 1e-3 < est.p_hat < 2e-2
    with pytest.raises(ValueError):
        error_prob_mc(alamouti, SPEC21, 10.0, 0.0, 0, seed=1)
