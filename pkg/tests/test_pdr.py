import math

import numpy as np
import pytest

from conftest import make_imu
from oracles import scan_peaks

from uwbpdr.errors import InvalidStepError, MissingDataError
from uwbpdr.pdr import (PdrState, StepEvent, detect_steps, integrate_heading,
                        pdr_update, run_pdr, step_velocity_timeline,
                        weinberg_step_length, wrap_angle)
from uwbpdr.world import GRAVITY


class TestWrapAngle:
    @pytest.mark.parametrize("angle,want", [
        (0.0, 0.0),
        (1.0, 1.0),
        (math.pi, math.pi),
        (-math.pi, math.pi),
        (1.5 * math.pi, -0.5 * math.pi),
        (-1.5 * math.pi, 0.5 * math.pi),
        (2.0 * math.pi, 0.0),
        (7.0 * math.pi, math.pi),
    ])
    def test_table(self, angle, want):
        assert wrap_angle(angle) == pytest.approx(want, abs=1e-12)

    def test_range_is_half_open_at_minus_pi(self):
        rng = np.random.default_rng(3)
        for a in rng.uniform(-50.0, 50.0, 500):
            w = wrap_angle(a)
            assert -math.pi < w <= math.pi
            # Same direction modulo a full turn.
            assert math.remainder(a - w, 2.0 * math.pi) == pytest.approx(0.0, abs=1e-9)


class TestStepDetection:
    def test_gait_sinusoid(self):
        t = np.arange(0.0, 10.0, 0.01)
        a = GRAVITY + 2.0 * np.sin(2.0 * math.pi * 1.5 * t)
        steps = detect_steps(make_imu(t, accel=a))
        want = scan_peaks(t, a, GRAVITY + 1.0, 0.3)
        assert len(steps) == len(want)
        assert [s.t_peak for s in steps] == [t[i] for i in want]
        # 1.5 Hz for 10 s: one peak per cycle.
        assert len(steps) == 15

    def test_subthreshold_peaks_ignored(self):
        t = np.arange(0.0, 2.0, 0.01)
        a = GRAVITY + 0.9 * np.sin(2.0 * math.pi * 2.0 * t)
        assert detect_steps(make_imu(t, accel=a)) == []

    def test_refractory_window_merges_peaks(self):
        t = np.arange(0.0, 0.8, 0.1)
        a = np.array([GRAVITY, GRAVITY, 12.0, GRAVITY, 13.0, GRAVITY, 12.5, GRAVITY])
        steps = detect_steps(make_imu(t, accel=a))
        assert [s.t_peak for s in steps] == [pytest.approx(0.2), pytest.approx(0.6)]
        # The suppressed 13.0 peak at t=0.4 still feeds the second step's
        # amplitude window.
        assert steps[1].a_max == 13.0
        assert steps[1].a_min == GRAVITY
        assert steps[1].duration == pytest.approx(0.4)

    def test_first_step_window_spans_from_stream_start(self):
        t = np.arange(0.0, 0.5, 0.1)
        a = np.array([8.0, GRAVITY, 12.0, GRAVITY, GRAVITY])
        steps = detect_steps(make_imu(t, accel=a))
        assert len(steps) == 1
        assert steps[0].a_min == 8.0
        assert steps[0].duration == pytest.approx(0.2)

    def test_too_short_stream(self):
        assert detect_steps(make_imu([0.0, 0.1])) == []


class TestStepLength:
    def test_known_values(self):
        s = weinberg_step_length(StepEvent(0.0, 6.25, 0.0, 0.5), K=0.4)
        assert s == 0.4 * 6.25 ** 0.25
        assert s == pytest.approx(0.6324555320336759, abs=1e-15)
        s = weinberg_step_length(StepEvent(0.0, 16.0, 0.0, 0.5), K=0.5)
        assert s == pytest.approx(1.0, abs=1e-15)

    def test_zero_swing_gives_zero(self):
        assert weinberg_step_length(StepEvent(0.0, 9.81, 9.81, 0.5), K=0.45) == 0.0

    def test_inverted_extrema_rejected(self):
        with pytest.raises(InvalidStepError):
            weinberg_step_length(StepEvent(0.0, 1.0, 2.0, 0.5), K=0.45)

    def test_nonpositive_gain_rejected(self):
        with pytest.raises(ValueError):
            weinberg_step_length(StepEvent(0.0, 2.0, 1.0, 0.5), K=0.0)


class TestHeadingIntegration:
    def test_constant_rate(self):
        t = np.arange(0.0, 2.01, 0.01)
        gyro = make_imu(t, gyro=np.full_like(t, 0.5))
        theta = integrate_heading(0.0, gyro, 0.0, 2.0)
        assert theta == pytest.approx(1.0, abs=1e-12)

    def test_linear_ramp_exact_for_trapezoid(self):
        t = np.arange(0.0, 1.01, 0.01)
        gyro = make_imu(t, gyro=t)
        theta = integrate_heading(0.2, gyro, 0.0, 1.0)
        assert theta == pytest.approx(0.7, abs=1e-9)

    def test_interval_endpoints_interpolated(self):
        gyro = make_imu([0.0, 1.0], gyro=[0.0, 1.0])
        theta = integrate_heading(0.0, gyro, 0.25, 0.75)
        # Integral of w(t)=t over [0.25, 0.75].
        assert theta == pytest.approx(0.25, abs=1e-12)

    def test_result_wraps(self):
        t = np.arange(0.0, 1.01, 0.01)
        gyro = make_imu(t, gyro=np.full_like(t, 0.4))
        theta = integrate_heading(3.0, gyro, 0.0, 1.0)
        assert theta == pytest.approx(3.4 - 2.0 * math.pi, abs=1e-12)

    def test_uncovered_interval_rejected(self):
        gyro = make_imu([0.5, 1.0])
        with pytest.raises(MissingDataError):
            integrate_heading(0.0, gyro, 0.0, 1.0)

    def test_empty_interval_rejected(self):
        gyro = make_imu([0.0, 1.0])
        with pytest.raises(ValueError):
            integrate_heading(0.0, gyro, 0.5, 0.5)


class TestDeadReckoning:
    def test_single_step_east(self):
        state = PdrState(p=np.zeros(2), theta=0.0, K_weinberg=0.45, t_last=0.0)
        out = pdr_update(state, 0.7, 0.0, t=1.0)
        assert np.allclose(out.p, [0.7, 0.0], atol=1e-15)
        assert out.t_last == 1.0
        assert np.array_equal(state.p, [0.0, 0.0])

    def test_single_step_north(self):
        state = PdrState(p=np.zeros(2), theta=0.0, K_weinberg=0.45, t_last=0.0)
        out = pdr_update(state, 1.0, math.pi / 2.0)
        assert out.p[0] == pytest.approx(0.0, abs=1e-12)
        assert out.p[1] == pytest.approx(1.0, abs=1e-12)

    def test_negative_length_rejected(self):
        state = PdrState(p=np.zeros(2), theta=0.0, K_weinberg=0.45, t_last=0.0)
        with pytest.raises(ValueError):
            pdr_update(state, -0.1, 0.0)

    def test_track_length_equals_step_sum(self):
        # Straight gait, no turning: the track advances along +x by exactly
        # the summed step lengths.
        t = np.arange(0.0, 10.0, 0.01)
        a = GRAVITY + 2.5 * np.sin(2.0 * math.pi * 1.5 * t)
        imu = make_imu(t, accel=a)
        steps = detect_steps(imu)
        total = sum(weinberg_step_length(s, 0.45) for s in steps)
        track = run_pdr(imu, p0=(0.0, 0.0), theta0=0.0, K=0.45)
        assert len(track) == len(steps) + 1  # start pose plus one entry per step
        assert track[-1][1][0] == pytest.approx(total, abs=1e-9)
        assert track[-1][1][1] == pytest.approx(0.0, abs=1e-12)

    def test_initial_heading_rotates_track(self):
        t = np.arange(0.0, 6.0, 0.01)
        a = GRAVITY + 2.0 * np.sin(2.0 * math.pi * 1.5 * t)
        imu = make_imu(t, accel=a)
        phi = 0.9
        flat = run_pdr(imu, p0=(0.0, 0.0), theta0=0.0)
        tilted = run_pdr(imu, p0=(0.0, 0.0), theta0=phi)
        R = np.array([[math.cos(phi), -math.sin(phi)],
                      [math.sin(phi), math.cos(phi)]])
        for (_, pf, _), (_, pt, _) in zip(flat, tilted):
            assert np.allclose(pt, R @ pf, atol=1e-9)

    def test_gyro_turn_bends_track(self):
        # Quarter-turn rate over the walk: end heading pi/2 up from start.
        t = np.arange(0.0, 10.0, 0.01)
        a = GRAVITY + 2.0 * np.sin(2.0 * math.pi * 1.5 * t)
        w = np.full_like(t, (math.pi / 2.0) / 10.0)
        track = run_pdr(make_imu(t, accel=a, gyro=w), p0=(0.0, 0.0), theta0=0.0)
        assert track[-1][2] == pytest.approx(track[0][2] + math.pi / 2.0, rel=0.1)
        assert track[-1][1][1] > 1.0


class TestVelocityTimeline:
    def test_speed_is_length_over_duration(self):
        t = np.arange(0.0, 4.0, 0.01)
        a = GRAVITY + 2.0 * np.sin(2.0 * math.pi * 1.5 * t)
        imu = make_imu(t, accel=a)
        events = step_velocity_timeline(imu, theta0=0.0, K=0.45)
        steps = detect_steps(imu)
        assert len(events) == len(steps)
        for (t_ev, v), step in zip(events, steps):
            assert t_ev == step.t_peak
            want = weinberg_step_length(step, 0.45) / step.duration
            assert np.hypot(*v) == pytest.approx(want, abs=1e-12)
            assert v[0] > 0.0

    def test_empty_stream(self):
        assert step_velocity_timeline([], theta0=0.0) == []
