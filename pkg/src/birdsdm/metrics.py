"""Evaluation: regression errors, top-k overlap accuracies, per-species
precision/recall, and report/GeoJSON export.

Rankings break ties by the lowest species index everywhere.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import DataError

DENOMINATORS = ("min", "k")


def _check_shapes(preds, truth):
    preds = np.asarray(preds, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if preds.shape != truth.shape:
        raise DataError(f"prediction shape {preds.shape} != truth shape {truth.shape}")
    return preds, truth


def mse(preds, truth) -> float:
    preds, truth = _check_shapes(preds, truth)
    return float(np.mean((preds - truth) ** 2))


def mae(preds, truth) -> float:
    preds, truth = _check_shapes(preds, truth)
    return float(np.mean(np.abs(preds - truth)))


def ranking(row) -> np.ndarray:
    """Indices by decreasing value, lowest index first among ties."""
    return np.argsort(-np.asarray(row, dtype=np.float64), kind="stable")


def top_k_set(row, k: int) -> set[int]:
    return set(ranking(row)[:k].tolist())


def observed_top_k(truth_row, k: int) -> set[int]:
    truth_row = np.asarray(truth_row, dtype=np.float64)
    return set(i for i in ranking(truth_row)[:k].tolist() if truth_row[i] > 0)


def top_k_accuracy(pred_row, truth_row, k: int, denominator: str = "min") -> float | None:
    """Overlap of the top-``k`` predicted and top-``k`` observed species.

    Only species with a non-zero observed rate count as observed. The
    overlap is divided by ``min(k, #observed)`` (``denominator="min"``) or
    by ``k``. Returns None when nothing was observed.
    """
    pred_row, truth_row = _check_shapes(pred_row, truth_row)
    n = truth_row.shape[-1]
    if not 1 <= k <= n:
        raise DataError(f"k={k} outside [1, {n}]")
    if denominator not in DENOMINATORS:
        raise DataError(f"denominator must be one of {DENOMINATORS}")
    n_obs = int(np.count_nonzero(truth_row > 0))
    if n_obs == 0:
        return None
    hits = len(top_k_set(pred_row, k) & observed_top_k(truth_row, k))
    return hits / (min(k, n_obs) if denominator == "min" else k)


def adaptive_top_k(pred_row, truth_row) -> float | None:
    """Top-k accuracy with ``k`` = number of species observed at the hotspot."""
    k = int(np.count_nonzero(np.asarray(truth_row) > 0))
    if k == 0:
        return None
    return top_k_accuracy(pred_row, truth_row, k)


@dataclass
class SpeciesScore:
    species: int
    precision: float | None
    recall: float | None
    occurrences: int
    name: str = ""


def per_species_precision_recall(preds, truth, names: Sequence[str] | None = None) -> list[SpeciesScore]:
    """Per-species precision/recall of presence across hotspots.

    At each hotspot the species predicted present are the adaptive top-k
    set of the predictions, and the observed species are those with a
    non-zero rate. Precision (recall) is None when the species was never
    predicted (observed).
    """
    preds, truth = _check_shapes(preds, truth)
    n = truth.shape[1]
    predicted = np.zeros_like(truth, dtype=bool)
    observed = truth > 0
    for h in range(len(truth)):
        k = int(observed[h].sum())
        if k:
            predicted[h, ranking(preds[h])[:k]] = True
    tp = (predicted & observed).sum(axis=0)
    fp = (predicted & ~observed).sum(axis=0)
    fn = (~predicted & observed).sum(axis=0)
    out = []
    for s in range(n):
        prec = float(tp[s] / (tp[s] + fp[s])) if tp[s] + fp[s] else None
        rec = float(tp[s] / (tp[s] + fn[s])) if tp[s] + fn[s] else None
        out.append(SpeciesScore(s, prec, rec, int(tp[s] + fn[s]), names[s] if names is not None else str(s)))
    return out


@dataclass
class HotspotScore:
    hotspot_id: str
    lat: float
    lon: float
    adaptive_topk: float | None
    k: int


@dataclass
class EvalReport:
    mse: float
    mae: float
    top10: float | None
    top30: float | None
    adaptive_topk: float | None
    n_hotspots: int
    skipped: int
    topk_denominator: str = "min"
    per_species: list[SpeciesScore] = field(default_factory=list)
    per_hotspot: list[HotspotScore] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        d = dict(d)
        d["per_species"] = [SpeciesScore(**s) for s in d.get("per_species", [])]
        d["per_hotspot"] = [HotspotScore(**h) for h in d.get("per_hotspot", [])]
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        return cls.from_dict(json.loads(text))


def _mean_defined(values):
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if vals else None


def evaluate(preds, truth, hotspots: Sequence | None = None, species_names: Sequence[str] | None = None,
             topk_denominator: str = "min") -> EvalReport:
    """Full report for predictions aligned with ``truth``.

    ``truth`` is an EncounterTable (hotspots and names are then taken from
    it) or a matrix. Rows with no observed species are skipped in the rank
    metrics and counted in ``skipped``.
    """
    if hasattr(truth, "rates"):
        hotspots = truth.hotspots if hotspots is None else hotspots
        species_names = truth.species.names if species_names is None else species_names
        truth = truth.rates
    preds, truth = _check_shapes(preds, truth)
    if truth.ndim != 2:
        raise DataError("evaluate expects [hotspots x species] matrices")
    if hotspots is not None and len(hotspots) != len(truth):
        raise DataError(f"{len(truth)} rows but {len(hotspots)} hotspots")
    n = truth.shape[1]
    per_hotspot = []
    top10, top30 = [], []
    for h in range(len(truth)):
        k = int(np.count_nonzero(truth[h] > 0))
        acc = adaptive_top_k(preds[h], truth[h])
        if hotspots is not None:
            hs = hotspots[h]
            per_hotspot.append(HotspotScore(hs.id, hs.lat, hs.lon, acc, k))
        else:
            per_hotspot.append(HotspotScore(str(h), math.nan, math.nan, acc, k))
        if n >= 10:
            top10.append(top_k_accuracy(preds[h], truth[h], 10, topk_denominator))
        if n >= 30:
            top30.append(top_k_accuracy(preds[h], truth[h], 30, topk_denominator))
    accs = [p.adaptive_topk for p in per_hotspot]
    return EvalReport(
        mse=mse(preds, truth),
        mae=mae(preds, truth),
        top10=_mean_defined(top10),
        top30=_mean_defined(top30),
        adaptive_topk=_mean_defined(accs),
        n_hotspots=len(truth),
        skipped=sum(a is None for a in accs),
        topk_denominator=topk_denominator,
        per_species=per_species_precision_recall(preds, truth, species_names),
        per_hotspot=per_hotspot,
    )


def write_per_species_csv(path, report: EvalReport):
    """Rows sorted by recall (descending, undefined last), then species index."""
    rows = sorted(report.per_species,
                  key=lambda s: (s.recall is None, -(s.recall or 0.0), s.species))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["species", "recall", "precision", "occurrences"])
        for s in rows:
            w.writerow([s.name, "" if s.recall is None else repr(s.recall),
                        "" if s.precision is None else repr(s.precision), s.occurrences])


def performance_geojson(report: EvalReport) -> dict:
    features = []
    for h in report.per_hotspot:
        features.append({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [h.lon, h.lat]},
            "properties": {"hotspot_id": h.hotspot_id, "adaptive_topk": h.adaptive_topk, "k": h.k},
        })
    return {"type": "FeatureCollection", "features": features}


def export_performance_geojson(report: EvalReport, path=None) -> dict:
    collection = performance_geojson(report)
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(collection, fh, indent=1)
            fh.write("\n")
    return collection


def table_row(report: EvalReport) -> dict[str, float | None]:
    """Summary in the usual table units: MSE x1e3, MAE x1e2, accuracies in %."""
    pct = lambda v: None if v is None else 100.0 * v  # noqa: E731
    return {"MSE[1e-3]": report.mse * 1e3, "MAE[1e-2]": report.mae * 1e2,
            "Top-k": pct(report.adaptive_topk), "Top-30": pct(report.top30), "Top-10": pct(report.top10)}
