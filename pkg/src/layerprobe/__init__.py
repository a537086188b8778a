"""Probe pre-trained CNN face representations and rank them per attribute.

The pipeline: align faces to a canonical canvas, feed the center crop and
its mirror through a loaded model, capture tapped activations (the last
conv stack pooled to 3x3 and 1x1, plus the two FC layers), average the two
patches, then train one linear SVM per (attribute, representation kind) and
pick the best kind per attribute by balanced accuracy.
"""

from .data_ingest import (
    AttributeTable,
    SynthConfig,
    SynthRule,
    generate_synthetic,
    parse_attributes,
    parse_landmarks,
    parse_partition,
)
from .errors import LayerProbeError
from .eval_select import (
    KINDS,
    EvalConfig,
    KindResult,
    SelectionReport,
    balanced_accuracy,
    build_selection_report,
    decomposition_report,
    evaluate_kind,
    reference_comparison,
    relative_report,
    select_best,
)
from .extraction import (
    RepresentationSet,
    align_similarity,
    cache_read,
    cache_write,
    extract_representation_set,
    make_patch_pair,
)
from .inference import (
    adaptive_maxpool,
    conv2d,
    forward_with_taps,
    fully_connected,
    maxpool2d,
    prelu,
    softmax,
)
from .model_io import (
    LayerDesc,
    Model,
    ModelSpec,
    format_manifest,
    infer_shapes,
    load_model,
    load_weights,
    pack_weights,
    parse_manifest,
)
from .pnm import read_pnm, write_pnm
from .svm import SvmModel, SvmProblem, decision_value, predict, train_dcd
from .tensor import average, crop_center, hflip, tensor_new

__version__ = "0.1.0"
