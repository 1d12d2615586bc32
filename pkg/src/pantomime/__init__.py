"""Pantomime: desk-scale motion anonymization with trainable motion priors.

The pipeline turns observed joint trajectories into body-model parameters
(fitting), maps pose tracks into a learned latent space (priors), perturbs
the latents with seeded noise while zeroing the identity-bearing components
(anonymizer), and measures what an adaptive attacker can still recover
(recognition, evaluation). synthdata supplies labeled corpora whose identity
and action signals are known by construction, so every privacy claim is
checkable against ground truth.
"""

__version__ = "0.1.0"

from .anonymizer import AnonymizationConfig, ComponentMask, DirectNoiseSpec
from .config import RunConfig, config_hash, load_run_config, save_run_config
from .errors import (
    ConfigurationError,
    DataError,
    FileFormatError,
    PantomimeError,
    ShapeError,
    TrainingError,
    UsageError,
)
from .evaluation import EvalContext, ExperimentReport, ProtectionTarget
from .fileio import (
    MotionFile,
    load_corpus_dir,
    load_fit_collection,
    load_prior_model,
    read_motion_file,
    save_fit_collection,
    save_prior_model,
    write_corpus_dir,
    write_motion_file,
)
from .fitting import FitCollection, FitOptions, FitResult, FitWeights, fit_corpus
from .kinematics import (
    BodyParams,
    MotionSequence,
    ParamSequence,
    Skeleton,
    default_skeleton,
    forward_kinematics,
)
from .numerics import SeededRng
from .priors import POSE_VAE, TRANSITION_CVAE, train_prior
from .recognition import anonymize_sequences, train_recognizer
from .synthdata import (
    Corpus,
    CorpusConfig,
    desk_ceti_config,
    desk_horst_config,
    generate_corpus,
)
