"""Summary-quality metrics on a 0-100 scale.

Covers lexical overlap (BLEU, ROUGE-1/2, METEOR), pairwise TF-IDF cosine
similarity, Flesch Reading Ease, compression ratio, and embedding-based
scores (token-level precision/recall/F1 and whole-text relevance). All
functions are pure; embedding metrics take an explicit provider so tests
run fully offline with the deterministic hash provider.
"""

from __future__ import annotations

import hashlib
import math
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from ailp.porter import porter_stem

TokenSequence = list[str]

_SMOOTH_EPS = 1e-9
_SENTENCE_END = re.compile(r"[.!?]+")
_VOWEL_GROUP = re.compile(r"[aeiouy]+")


class MetricError(Exception):
    """A metric could not be computed from the given inputs."""


class UndefinedRatioError(MetricError):
    """Compression ratio requested against an empty body."""


def tokenize(text: str) -> TokenSequence:
    """Lowercase, split on whitespace, strip edge punctuation, drop empties."""
    tokens = []
    for raw in text.lower().split():
        token = _strip_edge_punctuation(raw)
        if token:
            tokens.append(token)
    return tokens


def _strip_edge_punctuation(token: str) -> str:
    start, end = 0, len(token)
    while start < end and unicodedata.category(token[start]).startswith("P"):
        start += 1
    while end > start and unicodedata.category(token[end - 1]).startswith("P"):
        end -= 1
    return token[start:end]


def word_count(text: str) -> int:
    return len(tokenize(text))


def _ngram_counts(tokens: TokenSequence, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _clipped_overlap(candidate: Counter, reference: Counter) -> int:
    return sum(min(count, reference[gram]) for gram, count in candidate.items())


def bleu(candidate: TokenSequence, reference: TokenSequence, max_n: int = 4) -> float:
    """Geometric mean of clipped n-gram precisions with a brevity penalty.

    Zero clipped counts are smoothed with a 1e-9 epsilon, and the n-gram
    order is capped at the shorter of the two sequences so short texts are
    scored over the orders they can actually support.
    """
    if not candidate or not reference:
        return 0.0
    effective_n = min(max_n, len(candidate), len(reference))
    log_precision_sum = 0.0
    for n in range(1, effective_n + 1):
        overlap = _clipped_overlap(_ngram_counts(candidate, n), _ngram_counts(reference, n))
        total = len(candidate) - n + 1
        precision = (overlap if overlap > 0 else _SMOOTH_EPS) / total
        log_precision_sum += math.log(precision)
    geometric_mean = math.exp(log_precision_sum / effective_n)
    c, r = len(candidate), len(reference)
    brevity_penalty = math.exp(1.0 - r / c) if c < r else 1.0
    return 100.0 * brevity_penalty * geometric_mean


def rouge_n(candidate: TokenSequence, reference: TokenSequence, n: int) -> float:
    """ROUGE-n F1 from clipped n-gram overlap."""
    if n not in (1, 2):
        raise ValueError(f"rouge_n supports n in {{1, 2}}, got {n}")
    candidate_total = len(candidate) - n + 1
    reference_total = len(reference) - n + 1
    if candidate_total <= 0 or reference_total <= 0:
        return 0.0
    overlap = _clipped_overlap(_ngram_counts(candidate, n), _ngram_counts(reference, n))
    if overlap == 0:
        return 0.0
    precision = overlap / candidate_total
    recall = overlap / reference_total
    return 100.0 * 2.0 * precision * recall / (precision + recall)


def meteor(candidate: TokenSequence, reference: TokenSequence) -> float:
    """Single-reference METEOR with exact and Porter-stem match stages.

    Fmean = 10PR/(R+9P), fragmentation penalty 0.5*(chunks/matches)^3.
    There is no synonym stage.
    """
    if not candidate or not reference:
        return 0.0
    pairs = _align_unigrams(candidate, reference)
    matches = len(pairs)
    if matches == 0:
        return 0.0
    precision = matches / len(candidate)
    recall = matches / len(reference)
    fmean = 10.0 * precision * recall / (recall + 9.0 * precision)
    penalty = 0.5 * (_chunk_count(pairs) / matches) ** 3
    return 100.0 * fmean * (1.0 - penalty)


def _align_unigrams(candidate: TokenSequence, reference: TokenSequence) -> list[tuple[int, int]]:
    """Greedy position-ordered alignment: exact matches first, then stems."""
    cand_match: dict[int, int] = {}
    used_ref: set[int] = set()
    for stage_key in (lambda token: token, porter_stem):
        ref_keys = [stage_key(token) for token in reference]
        for ci, ctok in enumerate(candidate):
            if ci in cand_match:
                continue
            ckey = stage_key(ctok)
            for ri, rkey in enumerate(ref_keys):
                if ri not in used_ref and ckey == rkey:
                    cand_match[ci] = ri
                    used_ref.add(ri)
                    break
    return sorted(cand_match.items())


def _chunk_count(pairs: list[tuple[int, int]]) -> int:
    """Number of maximal runs that are contiguous on both sides."""
    chunks = 0
    prev: tuple[int, int] | None = None
    for ci, ri in pairs:
        if prev is None or ci != prev[0] + 1 or ri != prev[1] + 1:
            chunks += 1
        prev = (ci, ri)
    return chunks


def tfidf_cosine(candidate_text: str, reference_text: str) -> float:
    """Cosine of TF-IDF vectors fitted on exactly this document pair.

    Raw term counts, smooth IDF ln((1+N)/(1+df))+1 with N=2, L2-normalized.
    """
    cand_tokens = tokenize(candidate_text)
    ref_tokens = tokenize(reference_text)
    if not cand_tokens or not ref_tokens:
        return 0.0
    cand_counts, ref_counts = Counter(cand_tokens), Counter(ref_tokens)
    vocabulary = sorted(set(cand_counts) | set(ref_counts))
    idf = {
        term: math.log(3.0 / (1.0 + ((term in cand_counts) + (term in ref_counts)))) + 1.0
        for term in vocabulary
    }
    cand_vec = np.array([cand_counts[t] * idf[t] for t in vocabulary])
    ref_vec = np.array([ref_counts[t] * idf[t] for t in vocabulary])
    return 100.0 * float(
        cand_vec @ ref_vec / (np.linalg.norm(cand_vec) * np.linalg.norm(ref_vec))
    )


def count_syllables(word: str) -> int:
    """Vowel-group heuristic with a silent trailing 'e' rule, minimum 1."""
    word = word.lower()
    count = len(_VOWEL_GROUP.findall(word))
    if word.endswith("e") and not (
        word.endswith("le") and len(word) >= 3 and word[-3] not in "aeiouy"
    ):
        count -= 1
    return max(1, count)


def flesch_reading_ease(text: str) -> float:
    """206.835 - 1.015*(words/sentences) - 84.6*(syllables/words).

    Sentences are terminal-punctuation runs (at least one); empty text
    scores 0 by convention.
    """
    words = tokenize(text)
    if not words:
        return 0.0
    sentences = max(1, len(_SENTENCE_END.findall(text)))
    syllables = sum(count_syllables(w) for w in words)
    return 206.835 - 1.015 * (len(words) / sentences) - 84.6 * (syllables / len(words))


def compression_ratio(summary_text: str, body_text: str) -> float:
    """Summary word count divided by body word count."""
    body_words = word_count(body_text)
    if body_words == 0:
        raise UndefinedRatioError("compression ratio is undefined for an empty body")
    return word_count(summary_text) / body_words


@runtime_checkable
class EmbeddingProvider(Protocol):
    """Deterministic embeddings: per-token matrix and whole-text vector."""

    def embed_tokens(self, text: str) -> np.ndarray: ...

    def embed_text(self, text: str) -> np.ndarray: ...


def _normalized_rows(matrix: np.ndarray, side: str) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] == 0:
        raise MetricError(f"{side} text produced no token embeddings")
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise MetricError(f"{side} text produced a zero-norm token embedding")
    return matrix / norms


def bertscore(
    candidate_text: str, reference_text: str, provider: EmbeddingProvider
) -> tuple[float, float, float]:
    """Greedy-matching precision/recall/F1 over token embedding cosines.

    No IDF weighting and no baseline rescaling; returns (P, R, F1) each
    scaled to 0-100.
    """
    cand = _normalized_rows(provider.embed_tokens(candidate_text), "candidate")
    ref = _normalized_rows(provider.embed_tokens(reference_text), "reference")
    similarity = cand @ ref.T
    precision = float(similarity.max(axis=1).mean())
    recall = float(similarity.max(axis=0).mean())
    f1 = 2.0 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return 100.0 * precision, 100.0 * recall, 100.0 * f1


def text_relevance(summary_text: str, body_text: str, provider: EmbeddingProvider) -> float:
    """Cosine between whole-text embeddings, clamped at 0 below, times 100."""
    summary_vec = np.asarray(provider.embed_text(summary_text), dtype=float)
    body_vec = np.asarray(provider.embed_text(body_text), dtype=float)
    norms = np.linalg.norm(summary_vec), np.linalg.norm(body_vec)
    if summary_vec.ndim != 1 or body_vec.ndim != 1 or 0.0 in norms:
        raise MetricError("text embeddings are empty or zero-norm")
    cosine = float(summary_vec @ body_vec / (norms[0] * norms[1]))
    return 100.0 * max(0.0, cosine)


class HashEmbeddingProvider:
    """Download-free deterministic embeddings for tests and offline runs.

    Each token hashes to a fixed vector with strictly positive components,
    so cosines are always in (0, 1] and identical texts embed identically.
    Safe for concurrent use.
    """

    def __init__(self, dim: int = 16, seed: int = 0) -> None:
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim
        self.seed = seed

    def _token_vector(self, token: str) -> np.ndarray:
        values: list[float] = []
        block = 0
        while len(values) < self.dim:
            digest = hashlib.sha256(f"{self.seed}:{block}:{token}".encode()).digest()
            for i in range(0, len(digest) - 1, 2):
                raw = int.from_bytes(digest[i : i + 2], "big")
                values.append((raw + 1) / 65536.0)
            block += 1
        return np.array(values[: self.dim])

    def embed_tokens(self, text: str) -> np.ndarray:
        tokens = tokenize(text)
        if not tokens:
            return np.zeros((0, self.dim))
        return np.stack([self._token_vector(t) for t in tokens])

    def embed_text(self, text: str) -> np.ndarray:
        matrix = self.embed_tokens(text)
        if matrix.shape[0] == 0:
            return np.zeros(self.dim)
        return matrix.mean(axis=0)


class TransformerEmbeddingProvider:
    """Optional adapter over a Hugging Face masked-LM encoder.

    Imports torch/transformers lazily; requires the model weights to be
    available locally or downloadable. Not used by the test suite.
    """

    def __init__(self, model_name: str = "bert-base-uncased") -> None:
        import torch
        from transformers import AutoModel, AutoTokenizer

        self._torch = torch
        self._tokenizer = AutoTokenizer.from_pretrained(model_name)
        self._model = AutoModel.from_pretrained(model_name)
        self._model.eval()

    def _hidden_states(self, text: str) -> np.ndarray:
        encoded = self._tokenizer(
            text, return_tensors="pt", truncation=True, return_special_tokens_mask=True
        )
        special = encoded.pop("special_tokens_mask")[0].bool()
        with self._torch.no_grad():
            hidden = self._model(**encoded).last_hidden_state[0]
        return hidden[~special].numpy()

    def embed_tokens(self, text: str) -> np.ndarray:
        return self._hidden_states(text)

    def embed_text(self, text: str) -> np.ndarray:
        states = self._hidden_states(text)
        if states.shape[0] == 0:
            return np.zeros(self._model.config.hidden_size)
        return states.mean(axis=0)


@dataclass(frozen=True)
class MetricRow:
    """One summary's scores; field names match the evaluation wire format."""

    bleu: float
    meteor: float
    rouge1: float
    rouge2: float
    sent_sim: float
    flesch: float
    bert_p: float
    bert_r: float
    bert_f1: float
    compression: float
    relevance: float
    label_compression: float

    def as_dict(self) -> dict[str, float]:
        return {
            "bleu": self.bleu,
            "meteor": self.meteor,
            "rouge1": self.rouge1,
            "rouge2": self.rouge2,
            "sent_sim": self.sent_sim,
            "flesch": self.flesch,
            "bert_p": self.bert_p,
            "bert_r": self.bert_r,
            "bert_f1": self.bert_f1,
            "compression": self.compression,
            "relevance": self.relevance,
            "label_compression": self.label_compression,
        }


def score_summary(
    summary_text: str,
    reference_text: str,
    body_text: str,
    provider: EmbeddingProvider,
) -> MetricRow:
    """All metrics for one summary against the reference label and page body."""
    candidate = tokenize(summary_text)
    reference = tokenize(reference_text)
    bert_p, bert_r, bert_f1 = bertscore(summary_text, reference_text, provider)
    reference_words = len(reference)
    if reference_words == 0:
        raise UndefinedRatioError("label compression is undefined for an empty reference")
    return MetricRow(
        bleu=bleu(candidate, reference),
        meteor=meteor(candidate, reference),
        rouge1=rouge_n(candidate, reference, 1),
        rouge2=rouge_n(candidate, reference, 2),
        sent_sim=tfidf_cosine(summary_text, reference_text),
        flesch=flesch_reading_ease(summary_text),
        bert_p=bert_p,
        bert_r=bert_r,
        bert_f1=bert_f1,
        compression=compression_ratio(summary_text, body_text),
        relevance=text_relevance(summary_text, body_text, provider),
        label_compression=len(candidate) / reference_words,
    )
