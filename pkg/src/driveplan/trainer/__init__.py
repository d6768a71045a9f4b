from .loss import LossBreakdown, TrainConfig, rollout_loss
from .nlls import NllsConfig, nlls_perturb, perturb_ego_state, solve_feasible_track
from .train import (Adam, METRICS_COLUMNS, TrainResult, TrainingDiverged,
                    metrics_log_lines, split_corpus, train)

__all__ = [
    "LossBreakdown", "TrainConfig", "rollout_loss",
    "NllsConfig", "nlls_perturb", "perturb_ego_state", "solve_feasible_track",
    "Adam", "METRICS_COLUMNS", "TrainResult", "TrainingDiverged",
    "metrics_log_lines", "split_corpus", "train",
]
