"""Two-view relative pose for spherical cameras: eight-point solvers, ovoid normalisation,
pose refinement, RANSAC and a synthetic evaluation harness."""
from .errors import AmbiguousPoseError, ConfigError, DegenerateConfigurationError, DomainError, SizeError, Sphere8Error
from .geometry import CorrespondenceSet, ImageSize, RelativePose, essential_from_pose, pixel_to_bearing, pose_errors
from .normalization import NormalizationParams, normalized_eight_point
from .optim import gsm, irls_gsm, opt_sk, residuals, weighted_gsm
from .pipelines import MethodTag, parse_method, run_method
from .robust import RansacConfig, ransac_essential
from .solver8pt import eight_point, recover_pose
from .synth import NoiseModel, SceneConfig, make_trial

__version__ = "0.1.0"
