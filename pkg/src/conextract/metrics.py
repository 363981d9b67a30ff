"""Exact-match P/R/F1, Porter-stemmed P@k/R@k/F1@k, N_EX, and macro aggregation."""

from __future__ import annotations

from dataclasses import dataclass, field
from statistics import fmean
from typing import Iterable, Sequence

from .porter import porter_stem
from .text import collapse

DEFAULT_K = (5, 10)


class MetricsError(ValueError):
    pass


def normalize(phrase: str) -> str:
    norm = collapse(phrase)
    if not norm:
        raise MetricsError(f"phrase {phrase!r} is empty after normalization")
    return norm


def stem_phrase(phrase: str) -> str:
    return " ".join(porter_stem(tok) for tok in phrase.split(" "))


def _f1(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def prf(predicted: Iterable[str], gold: Iterable[str]) -> tuple[float, float, float]:
    """Exact-match precision/recall/F1 over normalized phrase sets (no stemming)."""
    pred = set(predicted)
    ref = set(gold)
    if not ref:
        raise MetricsError("gold set is empty")
    hits = len(pred & ref)
    p = hits / len(pred) if pred else 0.0
    r = hits / len(ref)
    return p, r, _f1(p, r)


def prf_at_k(
    ranked_pred: Sequence[str],
    gold: Iterable[str],
    k: int,
    recall_denominator: str = "formula",
) -> tuple[float, float, float]:
    """P@k, R@k and F1@k after stemming both sides.

    Predictions are stemmed and de-duplicated in rank order before the top
    ``k`` are taken. With ``recall_denominator="formula"`` R@k divides by
    ``min(|gold|, k)``; ``"gold"`` divides by ``|gold|``.
    """
    if k < 1:
        raise MetricsError("k must be >= 1")
    ref = {stem_phrase(g) for g in gold}
    if not ref:
        raise MetricsError("gold set is empty")
    top: list[str] = []
    for phrase in ranked_pred:
        stemmed = stem_phrase(phrase)
        if stemmed not in top:
            top.append(stemmed)
            if len(top) == k:
                break
    hits = len(set(top) & ref)
    p = hits / len(top) if top else 0.0
    if recall_denominator == "formula":
        denom = min(len(ref), k)
    elif recall_denominator == "gold":
        denom = len(ref)
    else:
        raise MetricsError(f"unknown recall denominator {recall_denominator!r}")
    r = hits / denom
    return p, r, _f1(p, r)


@dataclass(frozen=True)
class DocScore:
    doc_id: str
    p: float
    r: float
    f1: float
    p_at: dict[int, float] = field(default_factory=dict)
    r_at: dict[int, float] = field(default_factory=dict)
    f1_at: dict[int, float] = field(default_factory=dict)
    n_predicted: int = 0


def score_document(
    doc_id: str,
    ranked_pred: Sequence[str],
    gold: Iterable[str],
    k_values: Sequence[int] = DEFAULT_K,
    recall_denominator: str = "formula",
) -> DocScore:
    """Score one document; ``ranked_pred`` is confidence-ordered."""
    pred_norm = [normalize(p) for p in ranked_pred]
    gold_norm = {normalize(g) for g in gold}
    p, r, f1 = prf(pred_norm, gold_norm)
    p_at, r_at, f1_at = {}, {}, {}
    for k in k_values:
        p_at[k], r_at[k], f1_at[k] = prf_at_k(pred_norm, gold_norm, k, recall_denominator)
    return DocScore(doc_id, p, r, f1, p_at, r_at, f1_at, n_predicted=len(set(pred_norm)))


@dataclass(frozen=True)
class EvalReport:
    split_name: str
    model_id: str
    template_name: str
    precision: float
    recall: float
    f1: float
    f1_at: dict[int, float]
    n_ex: float
    per_doc: tuple[DocScore, ...] = ()

    @property
    def f1_at_5(self) -> float:
        return self.f1_at[5]

    @property
    def f1_at_10(self) -> float:
        return self.f1_at[10]


def aggregate(
    per_doc: Sequence[DocScore],
    split_name: str = "",
    model_id: str = "",
    template_name: str = "",
) -> EvalReport:
    """Unweighted mean over documents of every metric; N_EX is the mean prediction count."""
    if not per_doc:
        raise MetricsError("cannot aggregate zero documents")
    ks = sorted(per_doc[0].f1_at)
    return EvalReport(
        split_name=split_name,
        model_id=model_id,
        template_name=template_name,
        precision=fmean(d.p for d in per_doc),
        recall=fmean(d.r for d in per_doc),
        f1=fmean(d.f1 for d in per_doc),
        f1_at={k: fmean(d.f1_at[k] for d in per_doc) for k in ks},
        n_ex=fmean(d.n_predicted for d in per_doc),
        per_doc=tuple(per_doc),
    )
