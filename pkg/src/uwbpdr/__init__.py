"""Adaptive UWB/PDR indoor-localization fusion toolkit.

A reliability-gated constant-velocity Kalman filter fuses pedestrian dead
reckoning with UWB trilateration fixes, scaling the measurement covariance
from the discrepancy between a next-position predictor and each raw fix so
NLOS-corrupted epochs are de-weighted instead of trusted or dropped. Ships
with a reproducible synthetic world, four comparison pipelines, trajectory
error metrics, and a CLI that renders report figures next to the CSV output.
"""

from .ekf import (EkfState, FilterConfig, MODE_ADAPTIVE, MODE_FIXED, predict_step,
                  run_filter, update_uwb)
from .errors import (ConfigError, DegenerateGeometryError, DegenerateTrajectoryError,
                     EmptyWindowError, InitializationFailureError,
                     InsufficientGeometryError, InsufficientHistoryError,
                     InvalidStepError, MissingDataError, ModelFormatError,
                     NumericalFailureError, UwbPdrError)
from .gate import (ErrorWindow, GateConfig, ReliabilityDecision, ReliabilityGate,
                   classify, compute_delta, robust_thresholds, scale_covariance)
from .harness import ExperimentConfig, export_dataset, load_experiment_config, run_experiment
from .metrics import (AlignedTrajectory, AteSummary, align_trajectories, ate_rmse,
                      ate_summary, smooth_postprocess)
from .pdr import (PdrState, StepEvent, detect_steps, integrate_heading, pdr_update,
                  run_pdr, weinberg_step_length, wrap_angle)
from .predictor import (PositionHistory, StudentModel, TrendSummary, compute_trend,
                        load_student_model, mlp_forward, predict_constant_velocity,
                        predict_next)
from .trilateration import PositionFix, predicted_range, trilaterate
from .world import (GroundTruth, ImuSample, NoiseParams, RangeMeasurement, RangeSet,
                    Scenario, build_trajectory, label_visibility, load_scenario,
                    save_scenario, synthesize_imu, synthesize_ranges)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
