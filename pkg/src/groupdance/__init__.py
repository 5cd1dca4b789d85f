"""Music-driven group choreography: diffusion denoiser, footwork refinement,
long-sequence extension sampling, losses, metrics, and a synthetic corpus."""

from .config import ModelConfig, TrainConfig
from .data import (ChoreographyRecipe, MusicTrack, read_motion,
                   synth_group_sequence, synth_music, write_motion)
from .diffusion import NoiseSchedule, make_schedule, p_step, q_sample, sample_loop
from .footwork import FootworkAdaptor, adapt_footwork, finalize
from .lgds import WindowPlan, extend_sequence, plan_windows, renoise_segment
from .losses import LossWeights, distance_consistency_loss, reconstruction_losses, total_loss
from .metrics import MetricReport, diversity, evaluate, gmc, mmc, pfc, tif
from .model import GroupDanceDenoiser, SwapMode
from .motion import (DancerPermutation, GroupMotion, MotionFrame, SkeletonSpec,
                     forward_kinematics, joint_positions, root_velocity,
                     rot6d_to_matrix, sort_dancers, split_merge_body)
from .training import grad_check, init_params, overfit_run, train_step

__version__ = "0.1.0"
