"""Cross-view referring multi-object tracking evaluation toolkit."""

from .assignment import Assignment, CostMatrix, FORBIDDEN, brute_force_lap, solve_lap
from .datamodel import (
    ATTRIBUTE_CATEGORIES,
    AttributeSet,
    AttributeVocabulary,
    BBox,
    DEFAULT_VOCABULARY,
    Detection,
    LanguageDescription,
    Scene,
    Track,
    ValidationReport,
    Violation,
    iou,
    validate_attributes,
    validate_scene,
)
from .fusion_losses import (
    FusionWeights,
    LossInputs,
    ScoreRecord,
    fuse_features,
    fuse_scores,
    grad_loss_cmot,
    loss_cmot,
    loss_referring,
    loss_total,
)
from .ingest import (
    EmbeddingRecord,
    ParseError,
    PredictionSet,
    build_report,
    parse_descriptions,
    parse_embeddings,
    parse_predictions,
    parse_scene,
    parse_scores,
    read_report,
    render_description,
    write_descriptions,
    write_embeddings,
    write_predictions,
    write_report,
    write_scene,
    write_scores,
)
from .metrics import (
    AggregateResult,
    DescriptionResult,
    EvalConfig,
    FrameMatch,
    IdMeasures,
    MetricCounts,
    UndefinedAggregateError,
    UndefinedMetricError,
    aggregate,
    count_events,
    cvidf1,
    cvidf1_exact,
    cvma,
    cvma_exact,
    evaluate_description,
    id_measures,
    match_frame,
    restrict_gt,
)
from .predictor import (
    MissingScoreError,
    PredictorConfig,
    TrackState,
    filter_tracks,
    step,
)
from .synth import (
    ErrorSpec,
    FrameErrors,
    InfeasibleSpecError,
    Ledger,
    generate_scene,
    ledger_to_dict,
    oracle_id_measures,
    perturb,
    predictions_from_gt,
    score_tracks,
)

__version__ = "0.1.0"
