from .lexicon import AbnormalityLexicon, default_lexicon
from .metrics import (
    CeScore,
    bleu_n,
    ce_scores,
    extract_abnormalities,
    metrics_report,
    rouge_l,
    tokenize,
)

__all__ = [
    "AbnormalityLexicon",
    "CeScore",
    "bleu_n",
    "ce_scores",
    "default_lexicon",
    "extract_abnormalities",
    "metrics_report",
    "rouge_l",
    "tokenize",
]
