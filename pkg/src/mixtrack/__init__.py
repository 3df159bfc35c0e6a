"""Constrained mixture particle tracking with learned motion models."""

from .belief import (
    FeasibleRegion,
    MixtureBelief,
    MixtureComponent,
    ObservationFrame,
    Particle,
    belief_summary,
    effective_sample_size,
    empirical_moments,
    normalize_weights,
    systematic_resample,
    uniform_component,
)
from .cgmr import (
    CgmrModel,
    cgmr_condition,
    cgmr_fit,
    cgmr_sample,
    cgmr_sample_batch,
)
from .classifiers import ClassifierModel, classifier_fit, classifier_predict
from .dhmm import (
    DhmmLayer,
    DhmmStack,
    dhmm_meta_features,
    dhmm_propagate,
    dhmm_recognize,
)
from .engine import (
    CallableTransition,
    EngineConfig,
    GaussianMeasurementModel,
    MeasurementModel,
    StepReport,
    TransitionModel,
    component_distance,
    measurement_update,
    predict_rollout,
    prior_update,
    recluster,
    step,
)
from .errors import (
    AllZeroWeights,
    DegenerateData,
    DimensionMismatch,
    LengthMismatch,
    MissingColumn,
    MissingModel,
    MixtrackError,
    ParseError,
    SchemaError,
    SingularCovariance,
    VersionMismatch,
    WindowTooLong,
)
from .filters import (
    FilterModel,
    GaussianBeliefState,
    ekf_step,
    eq28_model,
    ukf_step,
)
from .gmm import Gmm, gmm_bic, gmm_fit_em, gmm_loglik, gmm_sample
from .hmm import (
    GaussianHmm,
    hmm_fit_baum_welch,
    hmm_forward_loglik,
    hmm_windowed_logliks,
    select_hidden_states_bic,
)
from .htspm import HtspmModel, HtspmTransition, PooledCgmrTransition, htspm_propagate
from .metrics import compute_ade, compute_mae
from .persist import load_model, save_model
from .scenario import (
    BehaviorSpec,
    LabeledTrajectory,
    default_behavior_spec,
    generate_trajectory,
    make_dataset,
)
from .trajio import export_csv, ingest_csv

__version__ = "0.1.0"
