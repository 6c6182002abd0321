"""Evidence-theoretic fusion of classifier ensembles for spectrum data."""

from .evidence import (
    Bba,
    BoeSet,
    FocalSet,
    Frame,
    average_bba,
    bjs_divergence,
    combine_dempster,
    conflict_k,
    deng_entropy,
    disagreement_degree,
    jousselme_distance,
)
from .exceptions import (
    ClassMismatchError,
    ClassTooSmallError,
    DegenerateChiefError,
    EmptyInputError,
    EmptyPoolError,
    EvifuseError,
    FrameMismatchError,
    InvalidCountsError,
    InvalidWeightsError,
    LengthMismatchError,
    NonFiniteLossError,
    ParseError,
    RowSumExceedsOneError,
    TooFewBoesError,
    TooFewSamplesError,
    TooManySectionsError,
    TotalConflictError,
)
from .features import (
    CHANNEL_NAMES,
    FrequencySelection,
    LarsFrequencySelector,
    LarsPath,
    SpectrumDataset,
    generate_channels,
    lars_lasso_path,
    normalize_minmax,
    select_frequencies,
)
from .fusion import (
    BoeGenConfig,
    FusionBatchResult,
    FusionConfig,
    FusionTrace,
    ScoreMatrix,
    average_bjs,
    boes_from_scores,
    chief_support,
    fuse,
    fuse_batch,
    support_credibility,
)
from .infotheory import (
    RankingResult,
    conditional_mi,
    entropy,
    joint_mi,
    mutual_information,
    rank_classifiers,
    select_ensemble,
)
from .learners import (
    LearnerConfig,
    MlpClassifier,
    SoftmaxClassifier,
    load_external_scores,
    load_model,
    predict_scores,
    save_model,
    train,
)
from .pipeline import (
    LEARNER_NAMES,
    ExperimentConfig,
    MetricsReport,
    RepetitionResult,
    add_noise,
    bandwidth_split,
    evaluate_accuracy,
    oversample_minority,
    run_bandwidth_sweep,
    run_experiment,
    run_noise_sweep,
    run_repetition,
    snr_db,
    split_train_validation,
    synthesize_frf_dataset,
)

__version__ = "0.1.0"
