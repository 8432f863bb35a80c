import numpy as np
import pytest

from sipsmi import (
    ConfigError,
    ScenarioConfig,
    beam_gain,
    dbm_to_watts,
    effective_snr,
    make_comm_channel,
    make_pilot,
    make_steering,
    parse_config,
)
from sipsmi.scenario import derived_rng


class TestSteering:
    def test_broadside_is_all_ones(self):
        assert np.allclose(make_steering(0.0, 4), np.ones(4))

    def test_entries_follow_phase_law(self):
        a = make_steering(10.0, 4)
        expected = np.exp(1j * np.pi * np.arange(4) * np.sin(np.deg2rad(10.0)))
        assert np.allclose(a, expected, atol=1e-15)

    def test_opposite_angles_conjugate(self):
        assert np.allclose(make_steering(10.0, 4), make_steering(-10.0, 4).conj(), atol=1e-15)

    @pytest.mark.parametrize("angle", [-80.0, -33.3, 0.0, 7.1, 45.0, 89.0])
    @pytest.mark.parametrize("n", [1, 3, 8])
    def test_unit_modulus_and_norm(self, angle, n):
        a = make_steering(angle, n)
        assert np.max(np.abs(np.abs(a) - 1.0)) <= 1e-12
        assert abs(np.linalg.norm(a) ** 2 - n) <= 1e-12 * n


class TestPilot:
    def test_scalar_case(self):
        assert np.allclose(make_pilot(1, 1), np.array([[1.0]]))

    def test_4x8_rows_orthonormal(self):
        sp = make_pilot(4, 8)
        assert sp.shape == (4, 8)
        gram = sp @ sp.conj().T
        assert np.max(np.abs(gram - np.eye(4))) <= 1e-12

    def test_too_few_slots_rejected(self):
        with pytest.raises(ValueError):
            make_pilot(4, 3)

    @pytest.mark.parametrize("n_tx,slots", [(1, 1), (2, 2), (2, 5), (3, 7), (4, 16), (6, 6)])
    def test_orthonormality_over_shapes(self, n_tx, slots):
        sp = make_pilot(n_tx, slots)
        assert np.max(np.abs(sp @ sp.conj().T - np.eye(n_tx))) <= 1e-12


class TestCommChannel:
    def test_same_seed_reproduces(self, baseline_cfg):
        assert np.array_equal(make_comm_channel(baseline_cfg), make_comm_channel(baseline_cfg))

    def test_neighbor_seeds_differ(self, baseline_cfg):
        from dataclasses import replace
        other = replace(baseline_cfg, seed=baseline_cfg.seed + 1)
        assert not np.allclose(make_comm_channel(baseline_cfg), make_comm_channel(other))

    def test_shape_and_finiteness(self):
        cfg = ScenarioConfig(n_rx_comm=2, n_tx=4)
        g = make_comm_channel(cfg)
        assert g.shape == (2, 4)
        assert np.all(np.isfinite(g))

    def test_unit_variance_entries(self):
        cfg = ScenarioConfig(n_rx_comm=64, n_tx=64, slots=64)
        g = make_comm_channel(cfg)
        assert abs(np.mean(np.abs(g) ** 2) - 1.0) < 0.05


class TestEffectiveSnr:
    def test_zero_gain_gives_zero(self):
        cfg = ScenarioConfig(alpha=0.0)
        assert effective_snr(cfg, make_steering(20.0, 6)) == 0.0

    def test_unit_gain_matches_antenna_count(self):
        cfg = ScenarioConfig(noise_power=0.25, alpha=0.5)  # |alpha|^2 == sigma^2
        assert effective_snr(cfg, make_steering(20.0, 6)) == pytest.approx(6.0, rel=1e-12)

    def test_default_regime_hits_target(self, baseline_cfg):
        a_r = make_steering(baseline_cfg.aoa_deg, baseline_cfg.n_rx_sense)
        assert effective_snr(baseline_cfg, a_r) == pytest.approx(10.0, rel=1e-12)

    def test_scaling_laws(self):
        a_r = make_steering(20.0, 6)
        base = effective_snr(ScenarioConfig(alpha=1e-6), a_r)
        doubled = effective_snr(ScenarioConfig(alpha=2e-6), a_r)
        assert doubled == pytest.approx(4.0 * base, rel=1e-12)
        halved_noise = effective_snr(ScenarioConfig(alpha=1e-6, noise_power=0.5e-12), a_r)
        assert halved_noise == pytest.approx(2.0 * base, rel=1e-12)


class TestBeamGain:
    def test_zero_matrix(self):
        a = make_steering(10.0, 4)
        assert beam_gain(np.zeros((4, 4), dtype=complex), a) == 0.0

    def test_isotropic_covariance(self):
        a = make_steering(10.0, 4)
        assert beam_gain(0.25 * np.eye(4, dtype=complex), a) == pytest.approx(1.0, rel=1e-12)

    def test_matched_rank_one(self):
        a = make_steering(10.0, 4)
        theta = 2.0 * np.outer(a, a.conj()) / 4.0
        assert beam_gain(theta, a) == pytest.approx(2.0 * 4.0, rel=1e-12)

    def test_linearity_and_orthogonal_invariance(self, rng):
        a = make_steering(10.0, 4)
        w = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        t1 = w @ w.conj().T
        w2 = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        t2 = w2 @ w2.conj().T
        assert beam_gain(t1 + 0.5 * t2, a) == pytest.approx(
            beam_gain(t1, a) + 0.5 * beam_gain(t2, a), rel=1e-10
        )
        # component with no projection on a leaves the gain unchanged
        q, _ = np.linalg.qr(np.column_stack([a, rng.standard_normal(4)]))
        perp = q[:, 1]
        m = np.outer(perp, perp.conj())
        assert beam_gain(t1 + m, a) == pytest.approx(beam_gain(t1, a), rel=1e-9)

    def test_non_hermitian_rejected(self):
        a = make_steering(10.0, 2)
        bad = np.array([[1.0, 1.0], [0.0, 1.0]], dtype=complex)
        with pytest.raises(ValueError):
            beam_gain(bad, a)

    def test_bounded_by_trace(self, rng):
        a = make_steering(33.0, 5)
        w = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
        theta = w @ w.conj().T
        assert beam_gain(theta, a) <= np.linalg.norm(a) ** 2 * np.trace(theta).real + 1e-9


class TestConfig:
    def test_defaults_are_valid(self):
        cfg = ScenarioConfig()
        assert cfg.n_tx == 4 and cfg.n_rx_sense == 6
        assert cfg.power_budget == pytest.approx(1.0)
        assert cfg.noise_power == pytest.approx(1e-12)
        assert cfg.max_admm_iters == 200

    def test_derived_alpha_matches_target(self):
        cfg = ScenarioConfig(rho_target=40.0)
        assert abs(cfg.alpha) ** 2 == pytest.approx(
            cfg.noise_power * 40.0 / cfg.n_rx_sense, rel=1e-12
        )

    def test_dbm_conversion(self):
        assert dbm_to_watts(30.0) == pytest.approx(1.0, rel=1e-12)
        assert dbm_to_watts(-90.0) == pytest.approx(1e-12, rel=1e-12)

    def test_slots_below_n_tx_rejected(self):
        with pytest.raises(ConfigError):
            ScenarioConfig(n_tx=4, slots=3)

    def test_nonpositive_power_rejected(self):
        with pytest.raises(ConfigError):
            ScenarioConfig(noise_power=0.0)

    def test_parse_file_roundtrip(self, tmp_path):
        path = tmp_path / "scenario.cfg"
        path.write_text(
            "# comment line\n"
            "n_tx = 4\n"
            "slots = 8\n"
            "power_budget_dbm = 30\n"
            "noise_power_dbm = -90\n"
            "alpha = 1e-6+2e-6j\n"
            "seed = 7   # trailing comment\n"
            "report_bits = true\n"
        )
        cfg = parse_config(path)
        assert cfg.slots == 8
        assert cfg.power_budget == pytest.approx(1.0)
        assert cfg.noise_power == pytest.approx(1e-12)
        assert cfg.alpha == complex(1e-6, 2e-6)
        assert cfg.seed == 7
        assert cfg.report_bits is True

    def test_unknown_key_reports_line(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("n_tx = 4\nnot_a_key = 3\n")
        with pytest.raises(ConfigError, match="line 2"):
            parse_config(path)

    def test_bad_value_reports_line(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("slots = eight\n")
        with pytest.raises(ConfigError, match="line 1"):
            parse_config(path)

    def test_duplicate_key_rejected(self, tmp_path):
        path = tmp_path / "dup.cfg"
        path.write_text("seed = 1\nseed = 2\n")
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config(path)


class TestDerivedRng:
    def test_streams_are_stable_and_distinct(self):
        a = derived_rng(3, 1).standard_normal(4)
        b = derived_rng(3, 1).standard_normal(4)
        c = derived_rng(3, 2).standard_normal(4)
        assert np.array_equal(a, b)
        assert not np.allclose(a, c)
