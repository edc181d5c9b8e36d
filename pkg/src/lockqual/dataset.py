"""Survey ingestion, screening, descriptives and train/holdout splitting.

The on-disk format is a flat CSV with header

    id,age_band,gender,experience_band,vessel_type,dwt_band,delay_hours,q0,q1,...,q32,q33

where q0 is overall satisfaction before the trip, q33 after, and
q1..q32 are the catalog items. Ratings are integers on a 1..5 Likert
scale; an empty cell is a missing rating. delay_hours may be empty.
"""
from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .catalog import DEFAULT_CATALOG, SATI_AFTER, SATI_BEFORE, VariableCatalog


class SurveyFormatError(ValueError):
    """Raised when a survey file does not match the expected layout."""


_HEADER_FIXED = ["id", "age_band", "gender", "experience_band", "vessel_type", "dwt_band", "delay_hours"]


def _expected_header(n_items: int) -> list[str]:
    return _HEADER_FIXED + [f"q{i}" for i in range(0, n_items + 2)]


@dataclass(frozen=True)
class RespondentRecord:
    """One screened questionnaire row."""

    id: str
    age_band: str
    gender: str
    experience_band: str
    vessel_type: str
    dwt_band: str
    delay_hours: float | None
    sati_before: int
    sati_after: int
    ratings: Mapping[int, int]

    def rating(self, index: int) -> int | None:
        """Rating for an observed-variable index (0 and 33 are the bookends)."""
        if index == SATI_BEFORE:
            return self.sati_before
        if index == SATI_AFTER:
            return self.sati_after
        return self.ratings.get(index)


@dataclass(frozen=True)
class RejectedRow:
    row_number: int
    respondent_id: str
    reason: str


@dataclass(frozen=True)
class SurveyDataset:
    respondents: tuple[RespondentRecord, ...]
    catalog: VariableCatalog
    rejected: tuple[RejectedRow, ...] = field(default=(), compare=False)

    @property
    def n(self) -> int:
        return len(self.respondents)

    def ids(self) -> tuple[str, ...]:
        return tuple(r.id for r in self.respondents)

    def matrix(self, indices: Sequence[int], complete_only: bool = True) -> tuple[list[str], np.ndarray]:
        """Ratings as a float matrix, one row per respondent.

        Rows with any missing rating among the requested indices are
        dropped when complete_only is set (listwise deletion).
        """
        ids: list[str] = []
        rows: list[list[float]] = []
        for r in self.respondents:
            vals = [r.rating(i) for i in indices]
            if complete_only and any(v is None for v in vals):
                continue
            ids.append(r.id)
            rows.append([float(v) if v is not None else math.nan for v in vals])
        return ids, np.asarray(rows, dtype=float).reshape(len(rows), len(indices))


def _parse_rating(cell: str) -> tuple[int | None, str | None]:
    cell = cell.strip()
    if cell == "":
        return None, None
    try:
        value = int(cell)
    except ValueError:
        return None, "invalid rating"
    if not 1 <= value <= 5:
        return None, "rating out of range"
    return value, None


def load_survey(path: str, catalog: VariableCatalog = DEFAULT_CATALOG) -> SurveyDataset:
    """Read and screen a survey CSV.

    Rows failing validation are excluded from the dataset and reported
    on the returned object's ``rejected`` tuple together with the
    1-based data row number and a reason.
    """
    n_items = len(catalog)
    expected = _expected_header(n_items)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SurveyFormatError("empty survey file") from None
        if [h.strip() for h in header] != expected:
            raise SurveyFormatError(
                "unexpected header; want " + ",".join(expected[:8]) + ",...," + expected[-1]
            )
        respondents: list[RespondentRecord] = []
        rejected: list[RejectedRow] = []
        seen: set[str] = set()
        for row_number, row in enumerate(reader, start=1):
            if not row or all(c.strip() == "" for c in row):
                continue
            rid = row[0].strip() if row else ""
            if len(row) != len(expected):
                rejected.append(RejectedRow(row_number, rid, "wrong number of fields"))
                continue
            if rid == "":
                rejected.append(RejectedRow(row_number, rid, "missing respondent id"))
                continue
            if rid in seen:
                rejected.append(RejectedRow(row_number, rid, "duplicate respondent id"))
                continue
            delay_cell = row[6].strip()
            delay: float | None
            if delay_cell == "":
                delay = None
            else:
                try:
                    delay = float(delay_cell)
                except ValueError:
                    rejected.append(RejectedRow(row_number, rid, "invalid delay"))
                    continue
                if not math.isfinite(delay):
                    rejected.append(RejectedRow(row_number, rid, "invalid delay"))
                    continue
                if delay < 0:
                    rejected.append(RejectedRow(row_number, rid, "negative delay"))
                    continue
            cells = row[7:]
            bad_reason: str | None = None
            parsed: list[int | None] = []
            for cell in cells:
                value, reason = _parse_rating(cell)
                if reason is not None:
                    bad_reason = reason
                    break
                parsed.append(value)
            if bad_reason is not None:
                rejected.append(RejectedRow(row_number, rid, bad_reason))
                continue
            before, after = parsed[0], parsed[-1]
            if before is None or after is None:
                rejected.append(RejectedRow(row_number, rid, "missing overall satisfaction"))
                continue
            ratings = {i: v for i, v in zip(range(1, n_items + 1), parsed[1:-1]) if v is not None}
            respondents.append(
                RespondentRecord(
                    id=rid,
                    age_band=row[1].strip(),
                    gender=row[2].strip(),
                    experience_band=row[3].strip(),
                    vessel_type=row[4].strip(),
                    dwt_band=row[5].strip(),
                    delay_hours=delay,
                    sati_before=before,
                    sati_after=after,
                    ratings=ratings,
                )
            )
            seen.add(rid)
    return SurveyDataset(tuple(respondents), catalog, tuple(rejected))


def write_survey(d: SurveyDataset, path: str) -> None:
    """Write a dataset back to the flat CSV format (reload round-trips)."""
    n_items = len(d.catalog)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_expected_header(n_items))
        for r in d.respondents:
            delay = "" if r.delay_hours is None else repr(float(r.delay_hours))
            qs: list[str] = [str(r.sati_before)]
            for i in range(1, n_items + 1):
                v = r.ratings.get(i)
                qs.append("" if v is None else str(v))
            qs.append(str(r.sati_after))
            writer.writerow([r.id, r.age_band, r.gender, r.experience_band, r.vessel_type, r.dwt_band, delay] + qs)


@dataclass(frozen=True)
class ItemStats:
    """Moment summary for one rating column.

    Skewness and kurtosis are the sample third and fourth standardized
    moments (kurtosis in excess form); both are None when fewer than two
    distinct values are observed. The normality screen passes when both
    statistics lie in [-1.5, 1.5].
    """

    n: int
    mean: float
    std: float
    skewness: float | None
    kurtosis: float | None
    normal: bool | None


@dataclass(frozen=True)
class DescriptiveReport:
    items: Mapping[int, ItemStats]
    sati_before: ItemStats
    sati_after: ItemStats
    overall_sati_after: float


def _column_stats(values: Sequence[float]) -> ItemStats:
    x = np.asarray(values, dtype=float)
    n = x.size
    if n == 0:
        return ItemStats(0, math.nan, math.nan, None, None, None)
    mean = float(np.mean(x))
    std = float(np.std(x, ddof=1)) if n >= 2 else 0.0
    if n < 2 or len(set(x.tolist())) < 2:
        return ItemStats(n, mean, std, None, None, None)
    dev = x - mean
    m2 = float(np.mean(dev**2))
    m3 = float(np.mean(dev**3))
    m4 = float(np.mean(dev**4))
    skew = m3 / m2**1.5
    kurt = m4 / m2**2 - 3.0
    normal = abs(skew) <= 1.5 and abs(kurt) <= 1.5
    return ItemStats(n, mean, std, skew, kurt, normal)


def describe(d: SurveyDataset) -> DescriptiveReport:
    """Per-item moment summaries plus the overall satisfaction bookends."""
    items: dict[int, ItemStats] = {}
    for idx in d.catalog.indices:
        vals = [r.ratings[idx] for r in d.respondents if idx in r.ratings]
        items[idx] = _column_stats(vals)
    before = _column_stats([r.sati_before for r in d.respondents])
    after = _column_stats([r.sati_after for r in d.respondents])
    overall = after.mean
    return DescriptiveReport(items, before, after, overall)


def split(d: SurveyDataset, n_train: int, seed: int) -> tuple[SurveyDataset, SurveyDataset]:
    """Deterministic train/holdout split.

    Respondent ids are sorted lexicographically, shuffled with the
    seeded generator, and the first n_train go to the training part.
    Original row order is preserved inside each part.
    """
    if not 0 < n_train < d.n:
        raise ValueError(f"n_train must be in (0, {d.n})")
    ids = sorted(r.id for r in d.respondents)
    rng = random.Random(seed)
    rng.shuffle(ids)
    train_ids = set(ids[:n_train])
    train = tuple(r for r in d.respondents if r.id in train_ids)
    hold = tuple(r for r in d.respondents if r.id not in train_ids)
    return (
        SurveyDataset(train, d.catalog),
        SurveyDataset(hold, d.catalog),
    )
