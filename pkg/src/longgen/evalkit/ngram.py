"""Additive-smoothing n-gram language model, the offline stand-in for
transcript perplexity scoring."""

from __future__ import annotations

import math
from collections import Counter

_BOS = "<s>"
_UNK = "<unk>"


class NgramModel:
    """Word n-gram model with add-alpha smoothing over a closed vocabulary
    (corpus words plus one unknown bucket)."""

    def __init__(self, corpus: list[str] | str, order: int, alpha: float = 1.0):
        if order < 1:
            raise ValueError("order must be at least 1")
        if alpha < 0:
            raise ValueError("alpha must be non-negative")
        sentences = [corpus] if isinstance(corpus, str) else list(corpus)
        tokenized = [s.split() for s in sentences if s.split()]
        if not tokenized:
            raise ValueError("training corpus is empty")
        self.order = order
        self.alpha = alpha
        self.vocab = sorted({w for sent in tokenized for w in sent} | {_UNK})
        self._vocab_set = set(self.vocab)
        self.ngram_counts: Counter = Counter()
        self.context_counts: Counter = Counter()
        for sent in tokenized:
            padded = [_BOS] * (order - 1) + sent
            for i in range(order - 1, len(padded)):
                context = tuple(padded[i - order + 1 : i])
                self.ngram_counts[context + (padded[i],)] += 1
                self.context_counts[context] += 1

    def _map(self, word: str) -> str:
        return word if word in self._vocab_set else _UNK

    def logprob(self, text: str) -> float:
        """Natural-log probability of the text's words, one smoothed n-gram
        term per word."""
        words = [self._map(w) for w in text.split()]
        if not words:
            raise ValueError("cannot score empty text")
        v = len(self.vocab)
        padded = [_BOS] * (self.order - 1) + words
        total = 0.0
        for i in range(self.order - 1, len(padded)):
            context = tuple(padded[i - self.order + 1 : i])
            num = self.ngram_counts[context + (padded[i],)] + self.alpha
            den = self.context_counts[context] + self.alpha * v
            if num == 0 or den == 0:
                return -math.inf
            total += math.log(num / den)
        return total

    def log_perplexity_per_word(self, text: str) -> float:
        words = text.split()
        return -self.logprob(text) / len(words)


def ngram_ppl(text: str, order: int, training_corpus: list[str] | str,
              alpha: float = 1.0) -> float:
    """Log-perplexity per word of `text` under an n-gram model fit on the
    corpus; deterministic."""
    return NgramModel(training_corpus, order, alpha).log_perplexity_per_word(text)
