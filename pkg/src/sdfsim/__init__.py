"""sdfsim: deterministic stereo depth sensor simulation for legged-robot learning."""

from .augment import (AugmentParams, DelayBuffer, EnvState, PipelineToggles,
                      augment_frame, clip_normalize, crop, gaussian_noise,
                      perlin_noise, pixel_failures, process_batch, random_conv,
                      sample_params, scale_depth, stereo_fuse)
from .camera import (CameraExtrinsics, CameraIntrinsics, DepthImage, StereoRig,
                     default_rig, render_depth, render_stereo, sample_rig)
from .config import ConfigError, RunConfig, load_config
from .noise import PerlinField
from .rng import RngStream
from .session import Session, run_digest
from .terrain import (Heightfield, HeightScan, TerrainCategory, TerrainFamily,
                      TerrainSpec, height_scan, make_terrain, terrain_category)
from .training_math import (amp_features, applicable_rewards, avg_power,
                            behavior_loss, denoise_loss, kl_loss, pdr,
                            reward_contact, reward_vel_dir, reward_vel_exp,
                            route, total_loss)

__version__ = "0.1.0"
