"""Satisfaction scoring, holdout validation, entropy and delay profiling.

Scores compose observed ratings with the standardized regression
weights of a fitted structural model:

    LVR_i = sum_j OVR_j * w_j / sum_j w_j      (within latent i)
    SQR   = sum_i LVR_i * W_i / sum_i W_i      (across latents)

so every score stays inside the rating scale. Holdout validation
compares SQR against the post-trip overall satisfaction bookend.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .dataset import RespondentRecord, SurveyDataset
from .sem import SemEstimate

__all__ = [
    "ScoreWeights",
    "RespondentScore",
    "ValidationSummary",
    "EntropyReport",
    "DelayBand",
    "DelayStrata",
    "weights_from_estimate",
    "lvr",
    "sqr",
    "score_respondent",
    "validation_summary",
    "write_scores_csv",
    "entropy",
    "entropy_report",
    "delay_strata",
]


@dataclass(frozen=True)
class ScoreWeights:
    """Standardized weights used by the two-stage score.

    latents       : latent order used in reports and score CSVs.
    item_weights  : latent -> {observed item index -> weight}.
    latent_weights: latent -> structural weight.
    nonpositive   : labels of any weight <= 0 (scores refuse to use them).
    """

    latents: tuple[str, ...]
    item_weights: Mapping[str, Mapping[int, float]]
    latent_weights: Mapping[str, float]
    nonpositive: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        flagged: list[str] = []
        for name in self.latents:
            if name not in self.item_weights or name not in self.latent_weights:
                raise ValueError(f"weights missing for latent {name!r}")
            if self.latent_weights[name] <= 0:
                flagged.append(f"latent:{name}")
            for item, w in self.item_weights[name].items():
                if w <= 0:
                    flagged.append(f"item:{name}:{item}")
        object.__setattr__(self, "nonpositive", tuple(flagged))

    def to_jsonable(self) -> dict:
        return {
            "latents": list(self.latents),
            "item_weights": {k: {str(i): float(w) for i, w in v.items()} for k, v in self.item_weights.items()},
            "latent_weights": {k: float(v) for k, v in self.latent_weights.items()},
        }

    @classmethod
    def from_jsonable(cls, doc: Mapping) -> "ScoreWeights":
        latents = tuple(str(x) for x in doc["latents"])
        item_weights = {
            str(k): {int(i): float(w) for i, w in v.items()} for k, v in doc["item_weights"].items()
        }
        latent_weights = {str(k): float(v) for k, v in doc["latent_weights"].items()}
        return cls(latents, item_weights, latent_weights)


def weights_from_estimate(est: SemEstimate) -> ScoreWeights:
    """Pull standardized loadings and structural weights off a fitted model.

    The estimate must contain exactly one endogenous latent (the overall
    quality construct); its predecessors become the scored latents.
    """
    if est.std_lam is None or est.std_beta is None:
        raise ValueError("standardize the estimate before extracting weights")
    targets = {dst for _, dst in est.model.structural_paths}
    if len(targets) != 1:
        raise ValueError("weights need a model with exactly one endogenous latent")
    target = targets.pop()
    li = {name: j for j, name in enumerate(est.model.latents)}
    oi = {item: i for i, item in enumerate(est.model.observed)}
    sources = tuple(src for src, _ in est.model.structural_paths)
    item_weights: dict[str, dict[int, float]] = {}
    latent_weights: dict[str, float] = {}
    for name in sources:
        latent_weights[name] = float(est.std_beta[li[target], li[name]])
        item_weights[name] = {
            item: float(est.std_lam[oi[item], li[name]]) for item in est.model.indicators[name]
        }
    return ScoreWeights(sources, item_weights, latent_weights)


def lvr(r: RespondentRecord, w: ScoreWeights, latent: str) -> float | None:
    """Latent variable rating: weighted mean of the latent's item ratings.

    Returns None when the respondent is missing any of the items.
    """
    items = w.item_weights[latent]
    if not items:
        raise ValueError(f"latent {latent!r} has no item weights")
    num = 0.0
    den = 0.0
    for item, weight in items.items():
        if weight <= 0:
            raise ValueError(f"nonpositive weight for item {item} of {latent!r}")
        v = r.rating(item)
        if v is None:
            return None
        num += v * weight
        den += weight
    return num / den


def sqr(lvr_values: Mapping[str, float], w: ScoreWeights) -> float:
    """Service quality rating: weighted mean of the latent ratings."""
    num = 0.0
    den = 0.0
    for name in w.latents:
        weight = w.latent_weights[name]
        if weight <= 0:
            raise ValueError(f"nonpositive weight for latent {name!r}")
        num += lvr_values[name] * weight
        den += weight
    if den == 0:
        raise ValueError("latent weights sum to zero")
    return num / den


@dataclass(frozen=True)
class RespondentScore:
    id: str
    lvr: Mapping[str, float]
    sqr: float
    actual: int
    error: float
    signed_error: float


def score_respondent(r: RespondentRecord, w: ScoreWeights) -> RespondentScore | None:
    """Two-stage score plus relative error against the post-trip bookend."""
    values: dict[str, float] = {}
    for name in w.latents:
        v = lvr(r, w, name)
        if v is None:
            return None
        values[name] = v
    s = sqr(values, w)
    signed = (s - r.sati_after) / r.sati_after
    return RespondentScore(
        id=r.id,
        lvr=values,
        sqr=s,
        actual=r.sati_after,
        error=abs(signed),
        signed_error=signed,
    )


@dataclass(frozen=True)
class ValidationSummary:
    scores: tuple[RespondentScore, ...] = field(repr=False)
    n_scored: int
    n_skipped: int
    mean_error: float
    share_within_10pct: float


def validation_summary(d: SurveyDataset, w: ScoreWeights) -> ValidationSummary:
    """Score every scoreable respondent and summarize the relative error."""
    scores: list[RespondentScore] = []
    skipped = 0
    for r in d.respondents:
        s = score_respondent(r, w)
        if s is None:
            skipped += 1
        else:
            scores.append(s)
    if not scores:
        raise ValueError("no respondent could be scored (missing ratings)")
    errors = np.array([s.error for s in scores])
    signed = np.array([s.signed_error for s in scores])
    return ValidationSummary(
        scores=tuple(scores),
        n_scored=len(scores),
        n_skipped=skipped,
        mean_error=float(errors.mean()),
        share_within_10pct=float(np.mean(np.abs(signed) <= 0.10)),
    )


def write_scores_csv(summary: ValidationSummary, w: ScoreWeights, path: str) -> None:
    """Per-respondent scores: id, one LVR column per latent, SQR, error."""
    header = ["id"] + [f"lvr_{k + 1}" for k in range(len(w.latents))] + ["sqr", "error"]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for s in summary.scores:
            row = [s.id] + [repr(float(s.lvr[name])) for name in w.latents]
            row += [repr(float(s.sqr)), repr(float(s.error))]
            writer.writerow(row)


def entropy(values: Sequence[float]) -> float:
    """Normalized Shannon entropy of one item's ratings across respondents.

    With y_k the rating of respondent k and P_k = y_k / sum(y),

        E = -(1 / ln N) * sum_k P_k ln P_k

    and the 0 * ln 0 term taken as 0. E is 1 when everyone gives the
    same rating and shrinks as answers concentrate on few respondents.
    """
    y = np.asarray(values, dtype=float)
    if y.size < 2:
        raise ValueError("entropy needs at least 2 respondents")
    if np.any(y < 0):
        raise ValueError("ratings must be nonnegative")
    total = y.sum()
    if total <= 0:
        raise ValueError("zero rating sum")
    p = y / total
    nz = p > 0
    return float(-(p[nz] * np.log(p[nz])).sum() / math.log(y.size))


@dataclass(frozen=True)
class EntropyReport:
    """Per-item and per-latent response entropy.

    variability is 1 - E; latents are ranked by descending variability
    (most diverging perceptions first).
    """

    per_item: Mapping[int, float]
    per_latent: Mapping[str, float]
    variability: Mapping[str, float]
    ranking: tuple[str, ...]


def entropy_report(d: SurveyDataset, latent_items: Mapping[str, Sequence[int]]) -> EntropyReport:
    per_item: dict[int, float] = {}
    for items in latent_items.values():
        for item in items:
            if item in per_item:
                continue
            vals = [r.rating(item) for r in d.respondents]
            vals = [v for v in vals if v is not None]
            per_item[item] = entropy(vals)
    per_latent = {
        name: float(np.mean([per_item[i] for i in items])) for name, items in latent_items.items() if items
    }
    variability = {name: 1.0 - e for name, e in per_latent.items()}
    ranking = tuple(sorted(variability, key=lambda nm: (-variability[nm], nm)))
    return EntropyReport(per_item, per_latent, variability, ranking)


_DELAY_BANDS: tuple[tuple[str, float, float], ...] = (
    ("[0,2]", 0.0, 2.0),
    ("(2,4]", 2.0, 4.0),
    ("(4,8]", 4.0, 8.0),
    ("(8,16]", 8.0, 16.0),
    (">16", 16.0, math.inf),
)


@dataclass(frozen=True)
class DelayBand:
    label: str
    n: int
    share_pct: float
    s_mean: float | None
    s_mean_alt: float | None


@dataclass(frozen=True)
class DelayStrata:
    bands: tuple[DelayBand, ...]
    n_with_delay: int
    n_missing_delay: int


def _band_index(hours: float) -> int:
    # boundary values fall into the lower band
    for k, (_, _, hi) in enumerate(_DELAY_BANDS):
        if hours <= hi:
            return k
    return len(_DELAY_BANDS) - 1


def delay_strata(
    d: SurveyDataset,
    alt_items: Sequence[int] | None = None,
) -> DelayStrata:
    """Satisfaction stratified by reported delay bands.

    s_mean is the post-trip bookend average inside each band. When
    alt_items is given (for example the retained items outside the
    time-pressure block), s_mean_alt averages each respondent's mean
    rating over those items, which reads satisfaction with delay
    exposure removed from the instrument itself.
    """
    groups: dict[int, list[RespondentRecord]] = {k: [] for k in range(len(_DELAY_BANDS))}
    missing = 0
    for r in d.respondents:
        if r.delay_hours is None:
            missing += 1
            continue
        groups[_band_index(r.delay_hours)].append(r)
    total = sum(len(g) for g in groups.values())
    if total == 0:
        raise ValueError("no respondent reports a delay")
    bands: list[DelayBand] = []
    for k, (label, _, _) in enumerate(_DELAY_BANDS):
        members = groups[k]
        n = len(members)
        s_mean = float(np.mean([r.sati_after for r in members])) if n else None
        s_alt: float | None = None
        if alt_items and n:
            per_resp: list[float] = []
            for r in members:
                vals = [r.rating(i) for i in alt_items]
                vals = [v for v in vals if v is not None]
                if vals:
                    per_resp.append(float(np.mean(vals)))
            s_alt = float(np.mean(per_resp)) if per_resp else None
        bands.append(DelayBand(label, n, 100.0 * n / total, s_mean, s_alt))
    return DelayStrata(tuple(bands), total, missing)
