"""Bounded-memory long-form token generation toolkit.

A hybrid recurrent/local-attention decoder that steps in constant memory, a
full-attention baseline behind the same interface, index-level planners for
overlap-merged tokenization and speaker-prompted synthesis windows,
slide-and-prompt extension, long-form evaluation metrics, dataset span
construction, and an efficiency bench.
"""

__version__ = "0.1.0"

from .config import ModelConfig, desk_config, transformer_config
from .decoder import (
    DecoderSession,
    NeuralSequenceModel,
    ScriptedModel,
    contrastive_accuracy,
    forward_parallel,
    sample_continuation,
    sample_token,
    score_loglikelihood,
)
from .errors import CorruptArchiveError, InfeasibleError, ManifestError, SchemaError
from .longform import GenerationSpec, generate_long, slide_and_prompt
from .streams import TokenStream, concat_streams, duration_to_tokens
from .weights import (
    ParameterSet,
    init_random_weights,
    load_weights,
    save_weights,
    tensor_inventory,
)
from .windowing import (
    EosAvoidancePlan,
    SynthesisPlan,
    WindowPlan,
    boundary_probe_spans,
    merge_windows,
    plan_final_window_padding,
    plan_synthesis_windows,
    plan_tokenization_windows,
)

__all__ = [
    "__version__",
    "ModelConfig",
    "desk_config",
    "transformer_config",
    "TokenStream",
    "concat_streams",
    "duration_to_tokens",
    "ParameterSet",
    "tensor_inventory",
    "init_random_weights",
    "save_weights",
    "load_weights",
    "NeuralSequenceModel",
    "ScriptedModel",
    "DecoderSession",
    "sample_token",
    "sample_continuation",
    "score_loglikelihood",
    "contrastive_accuracy",
    "forward_parallel",
    "GenerationSpec",
    "generate_long",
    "slide_and_prompt",
    "WindowPlan",
    "SynthesisPlan",
    "EosAvoidancePlan",
    "plan_tokenization_windows",
    "merge_windows",
    "plan_final_window_padding",
    "plan_synthesis_windows",
    "boundary_probe_spans",
    "SchemaError",
    "CorruptArchiveError",
    "ManifestError",
    "InfeasibleError",
]
