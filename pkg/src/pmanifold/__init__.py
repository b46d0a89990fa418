"""Geometry of classifier perceptual manifolds: sampling, dimension, distance and robustness."""

from .attack import AttackConfig, AttackResult, attack_batch, pgd_attack, robust_accuracy, robust_accuracy_sweep
from .dimension import DimensionReport, participation_ratio, pr_of_samples, scaling_curve, two_nn
from .errors import (
    DegenerateInputError,
    EmptyResultError,
    IntegrityError,
    InvalidInputError,
    NumericalFailureError,
    PmanifoldError,
    TrainingFailureError,
    UnsupportedVersionError,
)
from .geometry import (
    EllipsoidSpec,
    analytic_expected_sqdist,
    boundary_distance,
    filled_distance,
    make_ellipsoid,
    monte_carlo_expected_sqdist,
)
from .model import MlpModel, SynthDataset, TrainConfig, forward, grad_logp, init_mlp, synth_dataset, train
from .sampler import PgaConfig, distance_to_pm, pga_sample, sample_pm
from .samples import SampleSet
from .spectral import (
    AlignmentScore,
    radial_psd,
    random_alignment_baseline,
    spectrum_density,
    subspace_alignment,
)

__version__ = "0.1.0"
