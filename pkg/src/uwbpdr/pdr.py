"""Pedestrian dead reckoning from a vertical-accel and yaw-rate stream.

Three stages: threshold step detection on the vertical channel, step length
from the window's acceleration dynamic range, and heading by integrating the
yaw rate. Position advances one step at a time from the detected events;
there is no magnetometer path, so heading drift is expected and is corrected
downstream by the fusion filter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidStepError, MissingDataError
from .world import GRAVITY

# Peak acceptance threshold above gravity, m/s^2, and the minimum spacing
# between accepted peaks, s. Constants of the detector, not of the wearer.
STEP_THRESHOLD = 1.0
STEP_REFRACTORY = 0.3

DEFAULT_K_WEINBERG = 0.45


@dataclass(frozen=True)
class StepEvent:
    """One detected gait cycle.

    a_max/a_min are the vertical-accel extrema over the window since the
    previous accepted peak (stream start for the first step); duration is
    that window's length.
    """

    t_peak: float
    a_max: float
    a_min: float
    duration: float


@dataclass(frozen=True)
class PdrState:
    p: np.ndarray        # (2,) m
    theta: float         # rad, wrapped to (-pi, pi]
    K_weinberg: float    # step-length calibration constant, > 0
    t_last: float        # s, time of the last applied step


def wrap_angle(angle: float) -> float:
    """Maps any angle to (-pi, pi]."""
    wrapped = math.pi - (math.pi - angle) % (2.0 * math.pi)
    # A fp-rounded modulo can land exactly on -pi; fold it to the closed end.
    if wrapped <= -math.pi:
        wrapped = math.pi
    return wrapped


def detect_steps(samples) -> list:
    """Finds gait peaks in the vertical-accel channel.

    A step is emitted at each local maximum exceeding GRAVITY +
    STEP_THRESHOLD with at least STEP_REFRACTORY seconds since the previous
    accepted peak. Peaks suppressed by the refractory window still contribute
    their amplitude to the next accepted step's extrema.

    Args:
        samples: time-ordered ImuSample sequence.

    Returns:
        list of StepEvent, possibly empty.
    """
    n = len(samples)
    if n < 3:
        return []
    t = np.array([s.t for s in samples])
    a = np.array([s.accel_vertical for s in samples])
    threshold = GRAVITY + STEP_THRESHOLD

    is_peak = (a[1:-1] > a[:-2]) & (a[1:-1] >= a[2:]) & (a[1:-1] > threshold)
    peak_idx = np.nonzero(is_peak)[0] + 1

    events = []
    window_start = 0
    last_peak_t = None
    for i in peak_idx:
        if last_peak_t is not None and t[i] - last_peak_t < STEP_REFRACTORY:
            continue
        window = a[window_start:i + 1]
        t_window_start = t[window_start]
        events.append(StepEvent(t_peak=float(t[i]),
                                a_max=float(window.max()),
                                a_min=float(window.min()),
                                duration=float(t[i] - t_window_start)))
        window_start = i
        last_peak_t = t[i]
    return events


def weinberg_step_length(step: StepEvent, K: float) -> float:
    """Step length s = K * (a_max - a_min)^(1/4).

    Raises:
        InvalidStepError: a_max < a_min.
        ValueError: K <= 0.
    """
    if K <= 0.0:
        raise ValueError("K must be > 0")
    swing = step.a_max - step.a_min
    if swing < 0.0:
        raise InvalidStepError(f"a_max {step.a_max} < a_min {step.a_min}")
    return K * swing ** 0.25


def integrate_heading(theta_prev: float, gyro, t_from: float, t_to: float) -> float:
    """Trapezoidal yaw-rate integral over [t_from, t_to], added and wrapped.

    Boundary values are linearly interpolated when the interval endpoints
    fall between samples.

    Raises:
        MissingDataError: the samples do not cover the interval.
        ValueError: t_from >= t_to.
    """
    if t_from >= t_to:
        raise ValueError("t_from must precede t_to")
    t = np.array([s.t for s in gyro])
    w = np.array([s.gyro_z for s in gyro])
    if len(t) == 0 or t[0] > t_from or t[-1] < t_to:
        raise MissingDataError(
            f"gyro samples cover [{t[0] if len(t) else None}, "
            f"{t[-1] if len(t) else None}], need [{t_from}, {t_to}]")
    inside = (t > t_from) & (t < t_to)
    grid = np.concatenate([[t_from], t[inside], [t_to]])
    vals = np.concatenate([[np.interp(t_from, t, w)], w[inside], [np.interp(t_to, t, w)]])
    return wrap_angle(theta_prev + float(np.trapezoid(vals, grid)))


def pdr_update(state: PdrState, step_length: float, theta: float,
               t: float | None = None) -> PdrState:
    """Advances the position by one step along heading theta.

    Args:
        state: current dead-reckoning state.
        step_length: nonnegative step length, m.
        theta: heading for this step, rad.
        t: event time; keeps t_last unchanged when omitted.

    Returns:
        new PdrState; the input is not mutated.
    """
    if step_length < 0.0:
        raise ValueError("step_length must be >= 0")
    theta = wrap_angle(theta)
    p_next = state.p + step_length * np.array([math.cos(theta), math.sin(theta)])
    return replace(state, p=p_next, theta=theta,
                   t_last=state.t_last if t is None else t)


# ---------------------------------------------------------------------------
# stream-level helpers shared by the PDR-only pipeline and the fusion filter
# ---------------------------------------------------------------------------

def heading_timeline(samples, theta0: float):
    """Cumulative (unwrapped) heading at every sample time.

    Equivalent to chaining integrate_heading across consecutive sample
    times, kept unwrapped so callers can difference it safely.

    Returns:
        (timestamps, headings) arrays of equal length.
    """
    t = np.array([s.t for s in samples])
    w = np.array([s.gyro_z for s in samples])
    if len(t) == 0:
        return t, t
    increments = 0.5 * (w[1:] + w[:-1]) * np.diff(t)
    return t, theta0 + np.concatenate([[0.0], np.cumsum(increments)])


def run_pdr(samples, p0, theta0: float, K: float = DEFAULT_K_WEINBERG) -> list:
    """Full dead-reckoning pass over an IMU stream.

    Returns:
        list of (t, position, theta) tuples; the first entry is the start
        pose at the first sample time, followed by one entry per step.
    """
    p0 = np.asarray(p0, dtype=float)
    if len(samples) == 0:
        return []
    t_grid, theta_grid = heading_timeline(samples, theta0)
    state = PdrState(p=p0.copy(), theta=wrap_angle(theta0), K_weinberg=K,
                     t_last=float(t_grid[0]))
    track = [(state.t_last, state.p.copy(), state.theta)]
    for step in detect_steps(samples):
        i = int(np.searchsorted(t_grid, step.t_peak))
        theta_k = wrap_angle(float(theta_grid[i]))
        length = weinberg_step_length(step, K)
        state = pdr_update(state, length, theta_k, t=step.t_peak)
        track.append((state.t_last, state.p.copy(), state.theta))
    return track


def step_velocity_timeline(samples, theta0: float,
                           K: float = DEFAULT_K_WEINBERG) -> list:
    """Piecewise-constant velocity events for the fusion filter.

    Each detected step yields (t_peak, v) with v = step_length / duration
    along the step heading; the velocity holds until the next event. Callers
    treat velocity as zero before the first event.
    """
    if len(samples) == 0:
        return []
    t_grid, theta_grid = heading_timeline(samples, theta0)
    events = []
    for step in detect_steps(samples):
        i = int(np.searchsorted(t_grid, step.t_peak))
        theta_k = wrap_angle(float(theta_grid[i]))
        speed = weinberg_step_length(step, K) / step.duration
        events.append((step.t_peak,
                       np.array([speed * math.cos(theta_k), speed * math.sin(theta_k)])))
    return events
