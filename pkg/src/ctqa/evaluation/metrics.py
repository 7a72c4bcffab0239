"""Clinical-efficacy and text-overlap metrics for generated reports.

Clinical efficacy (CE) is exact-match presence agreement over abnormality
categories: a category counts as mentioned when one of its aliases appears as
a substring of a sentence that carries no negation cue, and the (generated,
reference) agreement cells are micro-averaged over every pair x category.

BLEU here is the plain variant: modified n-gram precision with brevity
penalty, geometric mean, single reference, no smoothing (a zero precision at
any order zeroes the score). ROUGE-L is the LCS F-measure with beta^2 fixed
at 1.44. Both share one tokenizer: lowercase, alphanumeric runs only.
"""
from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass

from ..errors import EmptyCandidateError, EmptyInputError
from .lexicon import AbnormalityLexicon

ROUGE_BETA_SQUARED = 1.44

# Sentence-scoped negation: any of these tokens anywhere in the sentence
# negates every alias in it. Coarse, but the standard normal-description
# sentences are negation-phrased ("... was not detected"), so per-position
# cue matching would misread them.
NEGATION_CUES = frozenset({"no", "not", "without", "neither", "nor", "absent"})

_SENTENCE_SPLIT = re.compile(r"[.;!?\n]+")
_TOKEN = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def extract_abnormalities(text: str, lex: AbnormalityLexicon) -> set[str]:
    """Category ids mentioned affirmatively anywhere in the text."""
    found: set[str] = set()
    for sentence in _SENTENCE_SPLIT.split(text):
        tokens = tokenize(sentence)
        if not tokens or NEGATION_CUES.intersection(tokens):
            continue
        normalized = " ".join(tokens)
        for category, aliases in lex.categories:
            if category in found:
                continue
            if any(alias in normalized for alias in aliases):
                found.add(category)
    return found


@dataclass(frozen=True)
class CeScore:
    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if (self.tp + self.fp) else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if (self.tp + self.fn) else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if (p + r) else 0.0


def ce_scores(pairs: list[tuple[str, str]], lex: AbnormalityLexicon) -> CeScore:
    """Micro-averaged exact-match agreement over all (pair, category) cells."""
    if not pairs:
        raise EmptyInputError("need at least one (generated, reference) pair")
    tp = fp = fn = 0
    for generated, reference in pairs:
        got = extract_abnormalities(generated, lex)
        expected = extract_abnormalities(reference, lex)
        tp += len(got & expected)
        fp += len(got - expected)
        fn += len(expected - got)
    return CeScore(tp=tp, fp=fp, fn=fn)


def _ngram_counts(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu_n(candidate: str, reference: str, max_n: int = 4) -> float:
    if not 1 <= max_n <= 4:
        raise ValueError(f"max_n must be in 1..4, got {max_n}")
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if not cand:
        raise EmptyCandidateError("candidate has no tokens")
    if not ref:
        raise EmptyInputError("reference has no tokens")
    log_precision_sum = 0.0
    for n in range(1, max_n + 1):
        cand_counts = _ngram_counts(cand, n)
        total = sum(cand_counts.values())
        if total == 0:
            return 0.0  # candidate shorter than n
        ref_counts = _ngram_counts(ref, n)
        clipped = sum(min(count, ref_counts[gram]) for gram, count in cand_counts.items())
        if clipped == 0:
            return 0.0
        log_precision_sum += math.log(clipped / total)
    brevity = 1.0 if len(cand) > len(ref) else math.exp(1.0 - len(ref) / len(cand))
    return brevity * math.exp(log_precision_sum / max_n)


def rouge_l(candidate: str, reference: str, beta_squared: float = ROUGE_BETA_SQUARED) -> float:
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if not cand or not ref:
        raise EmptyInputError("both texts must have tokens")
    lcs = _lcs_length(cand, ref)
    if lcs == 0:
        return 0.0
    recall = lcs / len(ref)
    precision = lcs / len(cand)
    return (1 + beta_squared) * recall * precision / (recall + beta_squared * precision)


def _lcs_length(a: list[str], b: list[str]) -> int:
    if len(b) > len(a):
        a, b = b, a
    previous = [0] * (len(b) + 1)
    for i in range(1, len(a) + 1):
        current = [0] * (len(b) + 1)
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                current[j] = previous[j - 1] + 1
            else:
                current[j] = max(previous[j], current[j - 1])
        previous = current
    return previous[len(b)]


def metrics_report(pairs: list[tuple[str, str]], lex: AbnormalityLexicon) -> dict:
    """Per-pair NLG averages plus micro CE, in the usual results-table schema.

    Pairs with an empty generated text score zero on the NLG metrics rather
    than aborting the batch.
    """
    if not pairs:
        raise EmptyInputError("need at least one (generated, reference) pair")
    bleu_sums = [0.0, 0.0, 0.0, 0.0]
    rouge_sum = 0.0
    for generated, reference in pairs:
        try:
            for n in range(1, 5):
                bleu_sums[n - 1] += bleu_n(generated, reference, max_n=n)
            rouge_sum += rouge_l(generated, reference)
        except EmptyInputError:
            pass
    count = len(pairs)
    ce = ce_scores(pairs, lex)
    return {
        "pairs": count,
        "bleu_1": bleu_sums[0] / count,
        "bleu_2": bleu_sums[1] / count,
        "bleu_3": bleu_sums[2] / count,
        "bleu_4": bleu_sums[3] / count,
        "rouge_l": rouge_sum / count,
        "rouge_l_beta_squared": ROUGE_BETA_SQUARED,
        "ce_tp": ce.tp,
        "ce_fp": ce.fp,
        "ce_fn": ce.fn,
        "ce_precision": ce.precision,
        "ce_recall": ce.recall,
        "ce_f1": ce.f1,
    }
