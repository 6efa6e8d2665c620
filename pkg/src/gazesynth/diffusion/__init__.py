from .denoiser import ConditionalDenoiser, DenoiserConfig, DiffusionCondition
from .schedule import (NoiseSchedule, forward_noise, make_schedule, noise_with, oracle_denoiser,
                       posterior_mean, reverse_step, sample, velocity_convert)
from .training import (DiffusionModel, DiffusionTrainConfig, DiffusionTrainingError, DiffusionWindow,
                       build_windows, loss_total, synthesize_recording, synthesize_velocity,
                       train_diffusion)

__all__ = [
    "ConditionalDenoiser", "DenoiserConfig", "DiffusionCondition", "NoiseSchedule", "forward_noise",
    "make_schedule", "noise_with", "oracle_denoiser", "posterior_mean", "reverse_step", "sample",
    "velocity_convert", "DiffusionModel", "DiffusionTrainConfig", "DiffusionTrainingError",
    "DiffusionWindow", "build_windows", "loss_total", "synthesize_recording", "synthesize_velocity",
    "train_diffusion",
]
