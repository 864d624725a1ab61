"""Constant-velocity Kalman filter with PDR-driven prediction and gated UWB updates.

The state is [p_x, p_y, v_x, v_y]. Dead-reckoning velocity enters as a
control input that overwrites the velocity sub-state before each propagation,
so no PDR noise model is needed; UWB position fixes arrive through a linear
measurement of the position block. In adaptive mode the measurement
covariance for each epoch is the baseline R0 scaled by the reliability
gate's tier; in fixed mode it is R0 unconditionally.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (ConfigError, DegenerateGeometryError, InitializationFailureError,
                     InsufficientGeometryError, NumericalFailureError)
from .gate import GateConfig, ReliabilityGate, compute_delta, scale_covariance
from .pdr import DEFAULT_K_WEINBERG, step_velocity_timeline
from .predictor import (BACKEND_CONSTANT_VELOCITY, BACKEND_STUDENT, PositionHistory,
                        StudentModel, predict_next)
from .trilateration import trilaterate

MODE_FIXED = "fixed"
MODE_ADAPTIVE = "adaptive"

# Epochs the filter may spend waiting for a first converged fix.
INIT_EPOCH_LIMIT = 5

_H_OBS = np.array([[1.0, 0.0, 0.0, 0.0],
                   [0.0, 1.0, 0.0, 0.0]])


def _default_r0() -> np.ndarray:
    # 0.3 m LOS ranging accuracy mapped to position variance.
    return 0.09 * np.eye(2)


def _default_p0() -> np.ndarray:
    return np.diag([1.0, 1.0, 0.25, 0.25])


def _check_spd(m: np.ndarray, name: str) -> None:
    if not np.allclose(m, m.T, atol=1e-12):
        raise ConfigError(f"{name} must be symmetric")
    try:
        np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise ConfigError(f"{name} must be positive definite") from exc


@dataclass(frozen=True)
class EkfState:
    t: float
    x: np.ndarray  # (4,) [p_x, p_y, v_x, v_y]
    P: np.ndarray  # (4, 4) symmetric PSD


@dataclass(frozen=True)
class FilterConfig:
    """Filter, gate, and predictor parameters.

    q_accel is the white-noise-acceleration spectral density of the process
    noise; R0 is the baseline (LOS) measurement covariance that the gate
    scales.
    """

    R0: np.ndarray = field(default_factory=_default_r0)
    q_accel: float = 0.5
    P0: np.ndarray = field(default_factory=_default_p0)
    gate: GateConfig = field(default_factory=GateConfig)
    predictor_backend: str = BACKEND_CONSTANT_VELOCITY
    k_weinberg: float = DEFAULT_K_WEINBERG
    student: StudentModel | None = None

    def __post_init__(self) -> None:
        R0 = np.asarray(self.R0, dtype=float)
        P0 = np.asarray(self.P0, dtype=float)
        if R0.shape != (2, 2):
            raise ConfigError("R0 must be 2x2")
        if P0.shape != (4, 4):
            raise ConfigError("P0 must be 4x4")
        _check_spd(R0, "R0")
        _check_spd(P0, "P0")
        if self.q_accel <= 0.0:
            raise ConfigError("q_accel must be > 0")
        if self.k_weinberg <= 0.0:
            raise ConfigError("k_weinberg must be > 0")
        if self.predictor_backend not in (BACKEND_CONSTANT_VELOCITY, BACKEND_STUDENT):
            raise ConfigError(f"unknown predictor backend {self.predictor_backend!r}")
        if self.predictor_backend == BACKEND_STUDENT and self.student is None:
            raise ConfigError("student backend requires loaded student weights")
        object.__setattr__(self, "R0", R0)
        object.__setattr__(self, "P0", P0)


def predict_step(state: EkfState, pdr_velocity, dt: float,
                 config: FilterConfig) -> EkfState:
    """Propagates the state by dt with PDR velocity as the control input.

    The velocity sub-state is overwritten with pdr_velocity, position
    advances by velocity * dt, and the covariance follows the
    constant-velocity transition with white-noise-acceleration process noise
    Q(dt) scaled by q_accel.

    Raises:
        ValueError: dt <= 0.
    """
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    v = np.asarray(pdr_velocity, dtype=float)
    x = state.x.copy()
    x[2] = v[0]
    x[3] = v[1]
    x[0] += x[2] * dt
    x[1] += x[3] * dt

    F = np.array([[1.0, 0.0, dt, 0.0],
                  [0.0, 1.0, 0.0, dt],
                  [0.0, 0.0, 1.0, 0.0],
                  [0.0, 0.0, 0.0, 1.0]])
    dt2, dt3 = dt * dt, dt * dt * dt
    q = config.q_accel
    Q = q * np.array([[dt3 / 3.0, 0.0, dt2 / 2.0, 0.0],
                      [0.0, dt3 / 3.0, 0.0, dt2 / 2.0],
                      [dt2 / 2.0, 0.0, dt, 0.0],
                      [0.0, dt2 / 2.0, 0.0, dt]])
    P = F @ state.P @ F.T + Q
    P = 0.5 * (P + P.T)
    return EkfState(t=state.t + dt, x=x, P=P)


def update_uwb(state: EkfState, z, Rk, config: FilterConfig) -> EkfState:
    """Kalman update with a position measurement, Joseph-form covariance.

    Raises:
        NumericalFailureError: innovation covariance not invertible
            (unreachable with SPD Rk and finite P).
    """
    z = np.asarray(z, dtype=float)
    Rk = np.asarray(Rk, dtype=float)
    H = _H_OBS
    y = z - H @ state.x
    S = H @ state.P @ H.T + Rk
    try:
        K = np.linalg.solve(S.T, (state.P @ H.T).T).T
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError("innovation covariance is singular") from exc
    if not np.all(np.isfinite(K)):
        raise NumericalFailureError("non-finite Kalman gain")
    x = state.x + K @ y
    A = np.eye(4) - K @ H
    P = A @ state.P @ A.T + K @ Rk @ K.T
    P = 0.5 * (P + P.T)
    return EkfState(t=state.t, x=x, P=P)


def _try_fix(rset, anchors, guess):
    """Trilateration that treats geometry failures as a non-fix."""
    try:
        return trilaterate(rset, anchors, initial_guess=guess)
    except (InsufficientGeometryError, DegenerateGeometryError):
        return None


def run_filter(imu, ranges, anchors, config: FilterConfig,
               mode: str = MODE_ADAPTIVE, heading0: float = 0.0):
    """Runs the full fusion loop over one scenario's sensor streams.

    The IMU stream is reduced to step-velocity events; between range epochs
    the state is propagated piecewise with the velocity active on each
    sub-interval. At every epoch the raw fix is trilaterated (warm-started
    from the previous fix); in adaptive mode the predictor's next-position
    estimate and the reliability gate pick the measurement covariance before
    the update. Non-converged or degenerate epochs skip the update and carry
    the prediction.

    The state initializes at the first converged fix among the first
    INIT_EPOCH_LIMIT epochs, with zero velocity and covariance P0. Until the
    fused history holds two entries, the prediction falls back to the last
    fused position (the constant-velocity backend needs a displacement).

    Args:
        imu: time-ordered ImuSample sequence.
        ranges: time-ordered RangeSet sequence, at least one epoch.
        anchors: (n, 2) anchor positions shared by all epochs.
        config: filter parameters.
        mode: MODE_ADAPTIVE or MODE_FIXED; fixed bypasses gate and predictor
            and uses R0 at every epoch.
        heading0: initial walker heading for dead reckoning, rad.

    Returns:
        (states, decisions): states is a list of EkfState, one at the
        initialization epoch and one per following epoch; decisions is a
        list of (t, ReliabilityDecision), empty in fixed mode and starting
        at the first epoch after initialization.

    Raises:
        InitializationFailureError: no converged fix in the first
            INIT_EPOCH_LIMIT epochs.
        ConfigError: unknown mode or empty range stream.
    """
    if mode not in (MODE_FIXED, MODE_ADAPTIVE):
        raise ConfigError(f"unknown filter mode {mode!r}")
    if len(ranges) == 0:
        raise ConfigError("range stream is empty")
    anchors = np.asarray(anchors, dtype=float)

    vel_events = step_velocity_timeline(imu, heading0, config.k_weinberg)

    state = None
    start_idx = 0
    for k, rset in enumerate(ranges[:INIT_EPOCH_LIMIT]):
        fix = _try_fix(rset, anchors, None)
        if fix is not None and fix.converged:
            x0 = np.array([fix.p[0], fix.p[1], 0.0, 0.0])
            state = EkfState(t=fix.t, x=x0, P=config.P0.copy())
            prev_fix_p = fix.p
            start_idx = k + 1
            break
    if state is None:
        raise InitializationFailureError(
            f"no converged fix in the first {INIT_EPOCH_LIMIT} epochs")

    history = PositionHistory()
    history.push(state.t, state.x[:2])
    gate = ReliabilityGate(config.gate) if mode == MODE_ADAPTIVE else None

    # Velocity active at the current state time; events switch it as the
    # loop passes their timestamps (zero before the first step).
    velocity = np.zeros(2)
    vel_idx = 0
    while vel_idx < len(vel_events) and vel_events[vel_idx][0] <= state.t:
        velocity = vel_events[vel_idx][1]
        vel_idx += 1

    states = [state]
    decisions = []
    for rset in ranges[start_idx:]:
        # Piecewise propagation: split [state.t, rset.t] at velocity events.
        while vel_idx < len(vel_events) and vel_events[vel_idx][0] <= rset.t:
            t_event, v_next = vel_events[vel_idx]
            if t_event > state.t:
                state = predict_step(state, velocity, t_event - state.t, config)
            velocity = v_next
            vel_idx += 1
        if rset.t > state.t:
            state = predict_step(state, velocity, rset.t - state.t, config)

        fix = _try_fix(rset, anchors, prev_fix_p)
        if fix is not None and fix.converged:
            prev_fix_p = fix.p
            z = fix.p
            if mode == MODE_ADAPTIVE:
                if len(history) >= 2:
                    prediction = predict_next(config.predictor_backend, history,
                                              model=config.student, t_next=rset.t)
                else:
                    prediction = history.positions()[-1]
                decision = gate.step(compute_delta(z, prediction))
                Rk = scale_covariance(decision.h, config.R0)
                decisions.append((rset.t, decision))
            else:
                Rk = config.R0
            state = update_uwb(state, z, Rk, config)

        history.push(state.t, state.x[:2])
        states.append(state)
    return states, decisions


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def write_states_csv(states, decisions, path: str | Path) -> None:
    """Per-epoch state log; tier/h/delta columns are empty in fixed mode."""
    by_t = {t: d for t, d in decisions}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "px", "py", "vx", "vy", "tier", "h", "delta"])
        for s in states:
            d = by_t.get(s.t)
            writer.writerow([repr(float(s.t)), repr(float(s.x[0])), repr(float(s.x[1])),
                             repr(float(s.x[2])), repr(float(s.x[3])),
                             d.tier if d else "", repr(float(d.h)) if d else "",
                             repr(float(d.delta)) if d else ""])


def filter_config_from_dict(doc: dict) -> FilterConfig:
    """Builds a FilterConfig from a JSON document mirroring the field names.

    R0/P0 accept either a full matrix or a scalar/diagonal shorthand; the
    gate block mirrors GateConfig field names. student is a weight-file path.
    """
    from .predictor import load_student_model  # local import to avoid cycles

    def matrix(value, size, name):
        if value is None:
            return None
        arr = np.asarray(value, dtype=float)
        if arr.ndim == 0:
            return float(arr) * np.eye(size)
        if arr.ndim == 1:
            if len(arr) != size:
                raise ConfigError(f"{name} diagonal needs {size} entries")
            return np.diag(arr)
        return arr

    try:
        gate = GateConfig(**doc.get("gate", {}))
    except TypeError as exc:
        raise ConfigError(f"bad gate block: {exc}") from exc
    kwargs = {"gate": gate}
    if "R0" in doc:
        kwargs["R0"] = matrix(doc["R0"], 2, "R0")
    if "P0" in doc:
        kwargs["P0"] = matrix(doc["P0"], 4, "P0")
    if "q_accel" in doc:
        kwargs["q_accel"] = float(doc["q_accel"])
    if "k_weinberg" in doc:
        kwargs["k_weinberg"] = float(doc["k_weinberg"])
    if "predictor_backend" in doc:
        kwargs["predictor_backend"] = str(doc["predictor_backend"])
    if "student" in doc and doc["student"] is not None:
        kwargs["student"] = load_student_model(doc["student"])
    return FilterConfig(**kwargs)
