"""Teacher/student distillation for next-position window regression."""

from .data import (TrainingSample, WINDOW_LEN, bundled_dataset_path,
                   bundled_scenario_path, load_window_dataset)
from .errors import (ConfigError, DatasetError, DistillLabError,
                     DivergenceError, ExportError)
from .export import export_student, student_document
from .models import (SequenceRegressor, StudentNet, TeacherModel,
                     parameter_hash)
from .tokens import (bin_centers, decode_token_coordinate, encode_coordinate,
                     topk_kl)
from .training import (DistillConfig, EpochLog, distill_student, eval_rmse,
                       resplit_samples, train_base_student, train_teacher,
                       write_training_log)

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DatasetError", "DistillConfig", "DistillLabError",
    "DivergenceError", "EpochLog", "ExportError", "SequenceRegressor",
    "StudentNet", "TeacherModel", "TrainingSample", "WINDOW_LEN",
    "bin_centers", "bundled_dataset_path", "bundled_scenario_path",
    "decode_token_coordinate", "distill_student", "encode_coordinate",
    "eval_rmse", "export_student", "load_window_dataset", "parameter_hash",
    "resplit_samples", "student_document", "topk_kl", "train_base_student",
    "train_teacher", "write_training_log",
]
