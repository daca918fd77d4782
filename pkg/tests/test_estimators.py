import math
import warnings

import numpy as np
import pytest

from mimoce.channel import Observation, SystemConfig, generate_pilots, noise_variance, sample_channels
from mimoce.estimators import (CcmBank, EstimatorKind, LSEstimator, MMSERegionalEstimator, MMSESingleEstimator,
                               Normalizer, SeparateLSEstimator, build_cnn, build_fnn, build_had_cnn, estimate_ccm,
                               fit_ccm_bank, load_ccm_bank, merge_complex, mmse_regional, mmse_single, postprocess,
                               preprocess, raw_features, split_complex)
from mimoce.estimators.classical import save_ccm_bank, separate_ls, separate_ls_rounds
from mimoce.harness import build_dataset, evaluate_mse, mse_row
from mimoce.harness.dataset import ls_observations
from mimoce.nn import Tensor
from mimoce.numerics import NotPositiveDefiniteError, RngStream, dft_shift_matrix


def _cfg(n=16, m=4, **kw):
    return SystemConfig(n_antennas=n, n_rf=m, **kw)


# ---- processing ---------------------------------------------------------------------------------

def test_complex_split_round_trip():
    z = np.random.default_rng(0).standard_normal((3, 5)) + 1j
    assert split_complex(z).shape == (3, 5, 2)
    assert split_complex(z, "flat").shape == (3, 10)
    np.testing.assert_array_equal(merge_complex(split_complex(z)), z)
    np.testing.assert_array_equal(merge_complex(split_complex(z, "flat"), "flat"), z)


def test_normalizer_standardises_and_inverts():
    feats = np.random.default_rng(1).standard_normal((500, 6, 2)) * [3.0, 0.5] + 2
    norm = Normalizer.fit(feats)
    z = norm.transform(feats)
    assert np.max(np.abs(z.mean(axis=0))) < 1e-6
    assert np.max(np.abs(z.std(axis=0) - 1)) < 1e-6
    np.testing.assert_allclose(norm.inverse(z), feats, atol=1e-6)
    assert Normalizer.from_dict(norm.to_dict()).to_dict() == norm.to_dict()
    with pytest.raises(ValueError):
        norm.transform(feats[:, :5])


def test_normalizer_pooled_statistics_are_shift_invariant():
    feats = np.random.default_rng(2).standard_normal((200, 8, 2))
    norm = Normalizer.fit(feats, pool_positions=True)
    assert np.all(norm.mean == norm.mean[0]) and np.all(norm.std == norm.std[0])
    z = norm.transform(feats).reshape(-1, 2)
    np.testing.assert_allclose(z.mean(axis=0), 0, atol=1e-12)
    np.testing.assert_allclose(z.std(axis=0), 1, atol=1e-12)


def test_normalizer_std_floor():
    norm = Normalizer.fit(np.ones((10, 3)))
    np.testing.assert_array_equal(norm.std, 1e-8)


def test_preprocess_one_hot_recoverable():
    n = 8
    x = np.zeros(n, dtype=complex)
    x[3] = 1.0
    h = dft_shift_matrix(n).conj().T @ x
    obs = Observation("full", h[None], 0.0)
    feats = raw_features(obs)
    assert feats.shape == (1, n, 2)
    expected = np.zeros((n, 2))
    expected[3, 0] = 1
    np.testing.assert_allclose(feats[0], expected, atol=1e-14)
    norm = Normalizer(np.full((n, 2), 0.5), np.full((n, 2), 2.0))
    np.testing.assert_allclose(norm.inverse(preprocess(obs, norm))[0], expected, atol=1e-14)


def test_had_features_length():
    obs = Observation("had", np.ones((3, 16), dtype=complex), 0.1)
    assert raw_features(obs).shape == (3, 32)


def test_postprocess_round_trip():
    b = sample_channels(_cfg(), 4)
    x_hat, h_hat = postprocess(split_complex(b.x))
    np.testing.assert_allclose(h_hat, b.h, atol=1e-10)
    np.testing.assert_allclose(np.linalg.norm(h_hat, axis=1), np.linalg.norm(x_hat, axis=1), rtol=1e-10)
    assert not postprocess(np.zeros((2, 16, 2)))[1].any()
    with pytest.raises(ValueError):
        postprocess(np.zeros((2, 16, 3)))


# ---- CCMs and MMSE ------------------------------------------------------------------------------

def test_ccm_of_repeated_sample():
    h0 = np.array([1.0, 1j, -2.0])
    np.testing.assert_allclose(estimate_ccm(np.tile(h0, (5, 1))), np.outer(h0, h0.conj()))


def test_ccm_identity_for_white_vectors():
    stream = RngStream(3)
    h = stream.complex_normal((100_000, 4))
    r = estimate_ccm(h)
    assert np.max(np.abs(r - np.eye(4))) < 0.05
    assert np.trace(r).real == pytest.approx(np.mean(np.sum(np.abs(h) ** 2, axis=1)), rel=1e-12)


def test_ccm_warns_and_rejects():
    with pytest.warns(UserWarning):
        estimate_ccm(np.ones((2, 4), dtype=complex))
    with pytest.raises(ValueError):
        estimate_ccm(np.zeros((0, 4), dtype=complex))


def test_mmse_with_identity_ccm_is_shrinkage():
    h_ls = np.random.default_rng(4).standard_normal((3, 5)) + 0j
    np.testing.assert_allclose(mmse_single(h_ls, np.eye(5), 9.0), 0.9 * h_ls, atol=1e-14)
    np.testing.assert_allclose(mmse_single(h_ls, np.eye(5) * 2, 1e12), h_ls, atol=1e-10)


def test_mmse_rejects_non_psd():
    with pytest.raises((NotPositiveDefiniteError, ValueError)):
        mmse_single(np.ones((1, 2), dtype=complex), np.diag([1.0, -5.0]), 1.0)


def test_mmse_beats_ls_with_oracle_ccm():
    cfg = _cfg(32, 8, snr_db=10.0, master_seed=5)
    b = sample_channels(cfg, 5000)
    ccm = estimate_ccm(sample_channels(SystemConfig(n_antennas=32, n_rf=8, master_seed=6), 20_000))
    obs = Observation("full", ls_observations(cfg, b, np.arange(5000), 10.0, 0), noise_variance(10))
    ls = mse_row(obs.h_ls, b.h)["mse_linear"]
    mm = mse_row(mmse_single(obs, ccm, 10.0), b.h)["mse_linear"]
    assert mm <= ls


def test_region_counts():
    b = sample_channels(_cfg(8, 2, master_seed=7), 6000)
    assert fit_ccm_bank(b, 3.0, sine_sharing=False).n_regions == 120
    assert fit_ccm_bank(b, 3.0, sine_sharing=True).n_regions == 60
    assert fit_ccm_bank(b, 360.0).n_regions == 1


def test_sine_sharing_maps_mirror_angles_together():
    bank = CcmBank(4, 3.0, True, {}, {})
    theta = np.array([0.3, np.pi - 0.3, 2 * np.pi - 0.3, np.pi + 0.3])
    regions = bank.region_of(theta)
    assert regions[0] == regions[1] and regions[2] == regions[3] and regions[0] != regions[2]


def test_single_region_bank_equals_single_mmse():
    cfg = _cfg(master_seed=8)
    b = sample_channels(cfg, 400)
    obs = Observation("full", ls_observations(cfg, b, np.arange(400), 10.0, 0), 0.1)
    bank = fit_ccm_bank(b, 360.0)
    a = mmse_regional(obs, bank, b.mean_aoa, 10.0)
    s = mmse_single(obs, estimate_ccm(b), 10.0)
    assert np.array_equal(a, s)


@pytest.mark.filterwarnings("ignore:CCM from")
def test_regional_rejects_uncovered_region():
    b = sample_channels(_cfg(master_seed=9), 50)
    bank = fit_ccm_bank(b, 3.0)
    uncovered = next(r for r in range(bank.n_regions) if r not in bank.matrices)
    with pytest.raises(KeyError):
        bank.matrix(uncovered)


def test_ccm_bank_file_round_trip(tmp_path):
    b = sample_channels(_cfg(8, 2, master_seed=10), 3000)
    bank = fit_ccm_bank(b, 30.0)
    save_ccm_bank(bank, tmp_path / "bank.bin")
    again = load_ccm_bank(tmp_path / "bank.bin")
    assert again.n_regions == bank.n_regions and again.sine_sharing == bank.sine_sharing
    for k, v in bank.matrices.items():
        assert np.array_equal(again.matrices[k], v)


def test_stored_ccms_are_hermitian_psd():
    bank = fit_ccm_bank(sample_channels(_cfg(8, 2, master_seed=11), 3000), 30.0)
    for r in bank.matrices.values():
        assert np.max(np.abs(r - r.conj().T)) < 1e-10
        assert np.linalg.eigvalsh(r).min() >= -1e-8


# ---- separate LS --------------------------------------------------------------------------------

def test_separate_ls_rounds_and_noiseless_recovery():
    assert len(separate_ls_rounds(128, 32)) == 4
    assert [len(g) for g in separate_ls_rounds(10, 4)] == [4, 4, 2]
    h = sample_channels(_cfg(master_seed=12), 1).h[0]
    est, rounds = separate_ls(h, 4, 0.0, None, generate_pilots(1, 10))
    np.testing.assert_allclose(est, h, atol=1e-13)
    assert rounds == 4


def test_separate_ls_noise_level():
    n, nv = 16, 0.05
    h = sample_channels(_cfg(master_seed=13), 1).h[0]
    pilot = generate_pilots(1, 10)
    err = [np.sum(np.abs(separate_ls(h, 4, nv, RngStream(0, t, 1000), pilot)[0] - h) ** 2) for t in range(10_000)]
    assert abs(np.mean(err) / (n * nv) - 1) < 0.03


# ---- networks -----------------------------------------------------------------------------------

def test_kind_defaults_and_validation():
    k = EstimatorKind("cnn-att")
    assert (k.l_in, k.l_hidden, k.l_out, k.reduction, k.stride) == (7, 5, 1, 2, 1)
    assert k.attention and k.neural and k.mode == "full"
    assert EstimatorKind("fnn-att").mode == "had"
    assert not EstimatorKind("ls").neural
    with pytest.raises(ValueError):
        EstimatorKind("svm")


def test_full_scale_cnn_parameter_counts():
    cnn = build_cnn(EstimatorKind("cnn"), 128)
    att = build_cnn(EstimatorKind("cnn-att"), 128)
    assert cnn.param_counts()["weights"] == 139_776
    assert att.param_counts()["attention"] == 4 * 96 ** 2
    assert att.param_counts()["weights"] == 139_776
    assert cnn.output_shape == (128, 2)


def test_cnn_structure():
    model = build_cnn(EstimatorKind("cnn-att", n_blocks=3, filters=8), 16, seed=1, dtype=np.float64)
    kinds = [layer.kind for layer in model.layers]
    assert kinds == ["conv1d", "batch_norm", "relu", "attention"] * 3 + ["conv1d"]
    assert model.layers[0].kernel_size == 7 and model.layers[4].kernel_size == 5
    assert model.layers[-1].kernel_size == 1 and model.layers[-1].filters == 2
    out = model.forward(np.random.default_rng(0).standard_normal((3, 16, 2)))
    assert out.data.shape == (3, 16, 2)


def test_fnn_att_structure_and_counts():
    model = build_fnn(EstimatorKind("fnn-att", hidden=(16, 192)), 64, 128)
    assert model.layers[3].config()["shape"] == [16, 192]
    f, c, m, n = 16, 192, 32, 128
    counts = model.param_counts()
    assert counts["weights"] + counts["attention"] == f * c * (2 * m + 2 * n) + c * c
    assert model.output_shape == (256,)


def test_fnn_att_zero_attention_halves_features():
    model = build_fnn(EstimatorKind("fnn-att", hidden=(4, 6)), 8, 4, seed=2, dtype=np.float64)
    att = model.layers[4]
    for p in att.params.values():
        p.data[:] = 0
    x = np.random.default_rng(0).standard_normal((5, 8))
    t = Tensor(x)
    for layer in model.layers[:4]:
        t = layer(t)
    np.testing.assert_allclose(att(t).data, 0.5 * t.data)


def test_fnn_rejects_indivisible_channels():
    with pytest.raises(ValueError):
        build_fnn(EstimatorKind("fnn-att", hidden=(4, 5)), 8, 4)


def test_plain_fnn_layers():
    model = build_fnn(EstimatorKind("fnn"), 32, 64)
    dense = [layer for layer in model.layers if layer.kind == "dense"]
    assert [d.units for d in dense] == [256, 512, 128]
    assert model.layers[-1].kind == "dense"


def test_had_cnn_head():
    model = build_had_cnn(EstimatorKind("had-cnn", n_blocks=2, filters=4), 8, 16)
    assert model.input_shape == (8, 2) and model.output_shape == (32,)


# ---- estimator objects --------------------------------------------------------------------------

def test_estimator_objects_on_a_dataset():
    ds = build_dataset(SystemConfig(n_antennas=16, n_rf=4, snr_db=10.0, master_seed=14), 5000)
    rows = {}
    for est in (LSEstimator(), MMSESingleEstimator(), MMSERegionalEstimator(), SeparateLSEstimator(4)):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            est.fit(ds.train)
        h_hat = est.estimate(ds.test, 0)
        assert h_hat.shape == ds.test.channels.h.shape
        rows[est.name] = evaluate_mse(est, ds.test)[0]["mse_linear"]
    assert rows["mmse-single"] < rows["ls"]
    assert abs(rows["separate-ls"] / rows["ls"] - 1) < 0.1
    assert math.isfinite(rows["mmse-regional-3deg"])
