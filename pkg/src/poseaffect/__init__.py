"""Emotional-intensity estimation from body pose sequences.

Pipeline: sensor skeletons are reduced to a canonical 14-joint body, local
joint rotations become sensor- and body-size-invariant Euler descriptors,
and a two-layer recurrent network conditioned on an emotion context maps a
descriptor sequence to a scalar intensity in [0, 1]. The package also ships
a handcrafted-feature SVR baseline, cross-validated evaluation, corpus and
checkpoint formats, a synthetic data generator, and streaming inference.
"""

__version__ = "0.1.0"

CORPUS_FORMAT_VERSION = 1
CHECKPOINT_FORMAT_VERSION = 1
STREAM_PROTOCOL_VERSION = 1

from .errors import (  # noqa: E402
    CheckpointError,
    ConfigError,
    CorpusFormatError,
    DimensionError,
    FeatureError,
    InvalidRotationError,
    InvalidTopologyError,
    LabelError,
    NumericError,
    PoseAffectError,
    RateError,
    StreamProtocolError,
    UndefinedCorrelationError,
    UsageError,
)
from .kinematics import (  # noqa: E402
    EULER_CONVENTION,
    RigidTransform,
    Rotation,
    SkeletonTopology,
    euler_to_matrix,
    fk_positions,
    forward_kinematics,
    inverse_kinematics,
    locals_from_positions,
    matrix_to_euler,
)
from .skeletons import (  # noqa: E402
    CANONICAL,
    CANONICAL_REST_OFFSETS,
    PROFILES,
    SensorProfile,
    get_profile,
    reduce_to_canonical,
)
from .descriptor import (  # noqa: E402
    PoseFrame,
    PoseSequence,
    extract_descriptor,
    mirror_swap,
    phase_subsample,
)
from .dataset import (  # noqa: E402
    EmotionContext,
    IntensityLabel,
    LabeledSequence,
    SynthConfig,
    augment,
    convert_corpus,
    derive_intensity,
    generate_synthetic,
    group_key,
    kfold_split,
    load_corpus,
    save_corpus,
    save_quaternion_corpus,
)
from .model import (  # noqa: E402
    ModelParams,
    TrainConfig,
    forward,
    forward_batch,
    init_params,
    load_checkpoint,
    predict_many,
    save_checkpoint,
    train,
)
from .baseline import (  # noqa: E402
    SvrConfig,
    extract_features,
    load_svr,
    save_svr,
    svr_fit,
    svr_predict,
    svr_predict_many,
)
from .evaluation import (  # noqa: E402
    EvalReport,
    LstmMethod,
    SvrMethod,
    cross_validate,
    pearson,
    write_report,
)
from .streaming import (  # noqa: E402
    BehaviorTag,
    FrameMessage,
    StreamSession,
    classify_level,
    serve_stdio,
    serve_tcp,
)

__all__ = [
    "__version__",
    "CORPUS_FORMAT_VERSION",
    "CHECKPOINT_FORMAT_VERSION",
    "STREAM_PROTOCOL_VERSION",
    # errors
    "PoseAffectError",
    "UsageError",
    "NumericError",
    "DimensionError",
    "InvalidRotationError",
    "InvalidTopologyError",
    "RateError",
    "LabelError",
    "CorpusFormatError",
    "ConfigError",
    "CheckpointError",
    "FeatureError",
    "UndefinedCorrelationError",
    "StreamProtocolError",
    # kinematics
    "EULER_CONVENTION",
    "Rotation",
    "RigidTransform",
    "SkeletonTopology",
    "euler_to_matrix",
    "matrix_to_euler",
    "forward_kinematics",
    "inverse_kinematics",
    "fk_positions",
    "locals_from_positions",
    # skeletons
    "CANONICAL",
    "CANONICAL_REST_OFFSETS",
    "PROFILES",
    "SensorProfile",
    "get_profile",
    "reduce_to_canonical",
    # descriptor
    "PoseFrame",
    "PoseSequence",
    "extract_descriptor",
    "mirror_swap",
    "phase_subsample",
    # dataset
    "EmotionContext",
    "IntensityLabel",
    "LabeledSequence",
    "SynthConfig",
    "augment",
    "convert_corpus",
    "derive_intensity",
    "generate_synthetic",
    "group_key",
    "kfold_split",
    "load_corpus",
    "save_corpus",
    "save_quaternion_corpus",
    # model
    "ModelParams",
    "TrainConfig",
    "forward",
    "forward_batch",
    "init_params",
    "predict_many",
    "train",
    "save_checkpoint",
    "load_checkpoint",
    # baseline
    "SvrConfig",
    "extract_features",
    "svr_fit",
    "svr_predict",
    "svr_predict_many",
    "save_svr",
    "load_svr",
    # evaluation
    "EvalReport",
    "LstmMethod",
    "SvrMethod",
    "cross_validate",
    "pearson",
    "write_report",
    # streaming
    "BehaviorTag",
    "FrameMessage",
    "StreamSession",
    "classify_level",
    "serve_stdio",
    "serve_tcp",
]
