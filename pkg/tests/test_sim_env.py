import dataclasses
import math

import numpy as np
import pytest

from asymloc.geometry import Modality, h_aoa, h_rtt, wrap_angle
from asymloc.sim_env import (PRESETS, Rect, Scenario, get_preset, observe,
                             observe_with_draw, sample_channel, segment_intersects_rect)


class TestRectAndSegments:
    RECT = Rect(50.0, 50.0, 10.0, 10.0)

    def test_straight_through(self):
        assert segment_intersects_rect((0.0, 50.0), (100.0, 50.0), self.RECT)

    def test_disjoint(self):
        assert not segment_intersects_rect((0.0, 0.0), (10.0, 0.0), self.RECT)

    def test_endpoint_inside(self):
        assert segment_intersects_rect((45.0, 52.0), (200.0, 300.0), self.RECT)

    def test_touching_edge_counts(self):
        assert segment_intersects_rect((40.0, 0.0), (40.0, 100.0), self.RECT)

    def test_near_miss(self):
        assert not segment_intersects_rect((39.9, 0.0), (39.9, 100.0), self.RECT)

    def test_degenerate_segment(self):
        assert segment_intersects_rect((50.0, 50.0), (50.0, 50.0), self.RECT)
        assert not segment_intersects_rect((0.0, 0.0), (0.0, 0.0), self.RECT)

    def test_matches_dense_sampling_oracle(self):
        # walk many points along each segment; containment of any sample
        # implies intersection (one-sided check of the clipping result)
        rng = np.random.default_rng(3)
        rect = Rect(40.0, 60.0, 12.0, 5.0)
        for _ in range(300):
            a = rng.uniform(0, 100, 2)
            b = rng.uniform(0, 100, 2)
            ts = np.linspace(0.0, 1.0, 400)
            pts = a[None, :] + ts[:, None] * (b - a)[None, :]
            sampled_hit = any(rect.contains(x, y) for x, y in pts)
            clipped_hit = segment_intersects_rect(a, b, rect)
            if sampled_hit:
                assert clipped_hit
            if not clipped_hit:
                assert not sampled_hit


class TestScenarioValidation:
    def test_presets_exist(self):
        assert set(PRESETS) == {"canonical_low", "canonical_medium", "canonical_high", "obstacle"}
        assert get_preset("canonical_low").sigma_r == 0.5
        assert get_preset("canonical_high").sigma_r == 2.5
        assert get_preset("obstacle").obstacle is not None

    def test_unknown_preset(self):
        with pytest.raises(KeyError):
            get_preset("nope")

    def test_invalid_fields(self):
        with pytest.raises(ValueError):
            Scenario(p_nlos=1.5)
        with pytest.raises(ValueError):
            Scenario(sigma_r=-1.0)
        with pytest.raises(ValueError):
            Scenario(truth=(120.0, 50.0))

    def test_angle_conversions(self):
        sc = Scenario(delta_theta_deg=-3.0, sigma_theta_deg=2.0)
        assert sc.delta_theta_rad == pytest.approx(math.radians(-3.0))
        assert sc.sigma_theta_rad == pytest.approx(math.radians(2.0))


class TestSampleChannel:
    def test_los_only_when_p_zero(self):
        sc = Scenario(p_nlos=0.0)
        rng = np.random.default_rng(0)
        for _ in range(500):
            d = sample_channel(sc, sc.start, rng)
            assert not d.is_nlos
            assert d.b_r == 0.0 and d.b_theta == 0.0

    def test_bias_mean_matches_configuration(self):
        sc = Scenario(p_nlos=0.9, mu_nlos=8.0)
        rng = np.random.default_rng(1)
        draws = [sample_channel(sc, sc.start, rng) for _ in range(100_000)]
        nlos_b = [d.b_r for d in draws if d.is_nlos]
        assert np.mean(nlos_b) == pytest.approx(8.0, abs=0.1)

    def test_nlos_rate_within_one_percent(self):
        sc = Scenario(p_nlos=0.9)
        rng = np.random.default_rng(2)
        hits = sum(sample_channel(sc, sc.start, rng).is_nlos for _ in range(100_000))
        assert hits / 100_000 == pytest.approx(0.9, abs=0.01)

    def test_bias_never_negative(self):
        sc = Scenario(p_nlos=0.9, mu_nlos=8.0)
        rng = np.random.default_rng(3)
        assert all(sample_channel(sc, sc.start, rng).b_r >= 0.0 for _ in range(1_000_000))

    def test_obstacle_forces_nlos(self):
        rect = Rect(50.0, 50.0, 10.0, 10.0)
        sc = Scenario(truth=(80.0, 50.0), start=(10.0, 50.0), obstacle=rect, p_nlos_clear=0.0)
        rng = np.random.default_rng(4)
        for _ in range(200):
            assert sample_channel(sc, (10.0, 50.0), rng).is_nlos

    def test_obstacle_shadow_is_spatially_coherent(self):
        # with the clear-sky rate at zero the NLOS indicator is exactly the
        # segment-blockage predicate, however the agent moves
        rect = Rect(50.0, 35.0, 25.0, 8.0)
        sc = Scenario(obstacle=rect, p_nlos_clear=0.0)
        rng = np.random.default_rng(5)
        for x in np.linspace(0.0, 100.0, 101):
            agent = (float(x), 20.0)
            expected = segment_intersects_rect(agent, sc.truth, rect)
            assert sample_channel(sc, agent, rng).is_nlos == expected

    def test_draws_paired_across_parameter_values(self):
        # same seed, different channel parameters: the thermal noise samples
        # are identical draw-for-draw (sweep pairing contract)
        base = Scenario(p_nlos=0.1)
        alt = dataclasses.replace(base, p_nlos=0.9, mu_nlos=15.0)
        r1, r2 = np.random.default_rng(7), np.random.default_rng(7)
        for _ in range(300):
            d1 = sample_channel(base, base.start, r1)
            d2 = sample_channel(alt, alt.start, r2)
            assert d1.eps_r == d2.eps_r
            assert d1.eps_theta == d2.eps_theta

    def test_independent_coins_when_not_shared(self):
        sc = Scenario(p_nlos=0.5, shared_nlos_flag=False)
        rng = np.random.default_rng(8)
        draws = [sample_channel(sc, sc.start, rng) for _ in range(2000)]
        differing = sum(d.is_nlos != d.is_nlos_aoa for d in draws)
        assert differing > 200  # half-and-half coins disagree often


class TestObserve:
    def test_systematic_offsets_alone(self):
        sc = Scenario(p_nlos=0.0, sigma_r=1e-12, sigma_theta_deg=1e-12,
                      delta_r=1.5, delta_theta_deg=-3.0)
        rng = np.random.default_rng(0)
        agent = (10.0, 10.0)
        m_rtt, m_aoa = observe(sc, agent, rng)
        assert m_rtt.value == pytest.approx(h_rtt(sc.truth, agent) + 1.5, abs=1e-6)
        assert m_aoa.value == pytest.approx(
            wrap_angle(h_aoa(sc.truth, agent) + math.radians(-3.0)), abs=1e-6)

    def test_range_never_negative(self):
        sc = Scenario(p_nlos=0.9, sigma_r=30.0, delta_r=-20.0)  # absurd noise
        rng = np.random.default_rng(1)
        clamped_any = False
        for _ in range(5000):
            m_rtt, _, _, clamped = observe_with_draw(sc, (49.0, 50.0), rng)
            assert m_rtt.value >= 0.0
            clamped_any = clamped_any or clamped
        assert clamped_any

    def test_deterministic_given_seed(self):
        sc = get_preset("canonical_medium")
        seq1 = []
        seq2 = []
        for seq, seed in ((seq1, 9), (seq2, 9)):
            rng = np.random.default_rng(seed)
            for t in range(100):
                m_rtt, m_aoa = observe(sc, (10.0 + t, 10.0), rng, step=t)
                seq.append((m_rtt.value, m_aoa.value))
        assert seq1 == seq2

    def test_aoa_in_range(self):
        sc = Scenario(sigma_b_theta_deg=120.0)
        rng = np.random.default_rng(11)
        for _ in range(2000):
            _, m_aoa = observe(sc, (90.0, 90.0), rng)
            assert -math.pi < m_aoa.value <= math.pi

    def test_measurement_metadata(self):
        sc = get_preset("canonical_medium")
        rng = np.random.default_rng(12)
        m_rtt, m_aoa = observe(sc, (20.0, 30.0), rng, step=17)
        assert m_rtt.modality is Modality.RTT
        assert m_aoa.modality is Modality.AOA
        assert m_rtt.step == 17 and m_aoa.step == 17
        assert (m_rtt.agent.x, m_rtt.agent.y) == (20.0, 30.0)
