from .gradcheck import CASES, GradcheckResult, OpCase, check_case, finite_diff_gradcheck, relative_error, run_gradchecks
from .loop import LossTrace, ToyRun, TrainingDiverged, toy_schedule, train_toy, unigram_entropy, window_batches
from .optim import (OptimizerHp, OptimizerState, adamw_step, clip_grad_norm, cross_entropy_loss, global_norm,
                    token_losses)
from .scaling import ScalingLawParams, scaling_law_loss
from .schedule import Schedule, lr_at

__all__ = [
    "CASES", "GradcheckResult", "OpCase", "check_case", "finite_diff_gradcheck", "relative_error", "run_gradchecks",
    "LossTrace", "ToyRun", "TrainingDiverged", "toy_schedule", "train_toy", "unigram_entropy", "window_batches",
    "OptimizerHp", "OptimizerState", "adamw_step", "clip_grad_norm", "cross_entropy_loss", "global_norm",
    "token_losses", "ScalingLawParams", "scaling_law_loss", "Schedule", "lr_at",
]
