from .embed import HashedTrigramEmbedder, TextEmbedder, cosine_similarity
from .coherence import ScLSeries, probe_spans, reference_similarity, sc_l, time_strata
from .judge import (
    HttpJudge,
    JudgeVerdict,
    MockUniqueVocabJudge,
    SideBySideResult,
    VERDICT_LABELS,
    parse_verdict,
    render_judge_prompt,
    side_by_side,
    truncate_to_shorter,
)
from .ngram import NgramModel, ngram_ppl

__all__ = [
    "HashedTrigramEmbedder",
    "TextEmbedder",
    "cosine_similarity",
    "ScLSeries",
    "sc_l",
    "time_strata",
    "probe_spans",
    "reference_similarity",
    "JudgeVerdict",
    "VERDICT_LABELS",
    "render_judge_prompt",
    "parse_verdict",
    "truncate_to_shorter",
    "side_by_side",
    "SideBySideResult",
    "MockUniqueVocabJudge",
    "HttpJudge",
    "NgramModel",
    "ngram_ppl",
]
