import math

import numpy as np
import pytest

import blindvi as bv


def test_constellations():
    q = bv.make_constellation("qpsk")
    assert len(q) == 4
    assert q.bits_per_symbol == 2
    assert np.isclose(np.mean(np.abs(q.points) ** 2), 1.0)
    m = bv.make_constellation("16qam", 2.0)
    assert np.isclose(np.mean(np.abs(m.points) ** 2), 2.0)
    with pytest.raises(bv.ConfigError):
        bv.make_constellation("8psk")


def test_kl_values():
    assert bv.gaussian_kl_diag(np.array([1.0, 0.0]), np.array([2.0, 2.0]), 2.0) == pytest.approx(0.25)
    assert bv.loss2(np.array([1.0, 0.0]), np.array([0.5, 0.5])) == pytest.approx(1.0)
    assert bv.loss1(np.zeros(4), np.ones(4), 1.0) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(bv.DomainError):
        bv.loss1(np.zeros(2), np.array([1.0, 0.0]))


def test_baselines_recover_noiseless_channel():
    rng = bv.Rng(3)
    h = bv.draw_channel(4, 4, rng)
    p = bv.make_orthogonal_pilots(4, 8)
    assert np.allclose(p.p @ p.p.conj().T, 8 * np.eye(4))
    y = h @ p.p
    assert np.abs(bv.ls_estimate(y, p) - h).max() < 1e-10
    assert np.array_equal(bv.mmse_estimate(y, p, 0.0), bv.ls_estimate(y, p))


def test_detection_and_scoring():
    rng = bv.Rng(4)
    c = bv.make_constellation("qpsk")
    h = bv.draw_channel(4, 2, rng)
    frame = bv.simulate_frame(h, bv.Schedule("detection", 2, 5), c, 0.0, rng)
    for t in range(5):
        assert bv.mld_detect(frame.rx[:, t], h, c) == list(frame.symbols[:, t])
    assert bv.ser(frame.symbols, frame.symbols) == 0.0
    rot = h * np.exp(1j * np.array([0.3, -1.2]))
    assert np.allclose(bv.align_channel(rot, h), h)
    assert bv.mse(h, h) == 0.0


def test_fit_block_small():
    rng = bv.Rng(5)
    c = bv.make_constellation("qpsk")
    h = bv.draw_channel(2, 2, rng)
    frame = bv.simulate_frame(h, bv.Schedule("estimation", 2, 4), c, bv.noise_var_for_snr(15.0), rng)
    cfg = bv.VIConfig()
    cfg.max_iters = 300
    est = bv.fit_block(frame, cfg, rng)
    assert est.h_hat.shape == (2, 2)
    assert all(math.isfinite(v) for v in est.loss_trace)
    assert est.loss_trace[-1] < est.loss_trace[0]
    assert bv.mse(bv.align_channel(est.h_hat, h), h) < 0.2


def test_sweep_deterministic_and_config_round_trip():
    text = "antennas = 2\nusers = 2\nblocks = 2\ndetect_slots = 4\nsnr_grid_db = 10\nvi.max_iters = 50\n"
    full = bv.parse_config(text)
    assert "vi.learning_rate" in full
    assert bv.parse_config(full) == full
    a = bv.sweep_csv(text)
    assert a == bv.sweep_csv(text)
    rows = bv.sweep(text)
    assert len(rows) == 4
    assert {r["estimator"] for r in rows} == {"Blind-VI", "Aided-LS", "Aided-MMSE", "Perfect-CSI"}
    assert all(0.0 <= r["ser"] <= 1.0 and r["mse_aligned"] <= r["mse_raw"] for r in rows)
    with pytest.raises(bv.ConfigError):
        bv.parse_config("unknown_key = 1\n")


def test_gradient_check():
    assert bv.gradient_check(instances=2) < 1e-4
