"""pairaug: deterministic augmentation toolkit for phrase-grounding datasets."""

__version__ = "0.1.0"

from .data import (
    BBox,
    CharSpan,
    GroundingSample,
    ImageBuffer,
    PhraseAnnotation,
    load_annotations,
    load_image,
    save_annotations,
    save_image,
)
from .errors import (
    AnnotationParseError,
    ContractViolation,
    PairAugError,
    ParameterError,
    ValidationError,
)
from .imageops import (
    JitterParams,
    MaskParams,
    block_mask,
    color_jitter,
    gaussian_blur,
    hflip,
    pixel_mask,
)
from .losses import (
    AlignmentSets,
    BoxRegressionBatch,
    EmbeddingBatch,
    SoftTokenBatch,
    box_loss,
    contrastive_alignment_loss,
    giou,
    soft_token_loss,
)
from .metrics import (
    EvalRecord,
    average_precision,
    evaluate_prediction_files,
    iou,
    recall_at_k,
)
from .pipeline import (
    AugPolicy,
    AugReport,
    augment_sample,
    derive_seed,
    load_policy,
    policy_from_mapping,
    validate_consistency,
)
from .textops import (
    ColorLexicon,
    FlipClassification,
    FlipKind,
    PositionalLexicon,
    RewriteResult,
    TermMatch,
    classify_flippability,
    contains_color_words,
    default_color_lexicon,
    default_positional_lexicon,
    find_positional_terms,
    load_lexicon_overrides,
    rewrite_caption,
    rewrite_sample_caption,
)
