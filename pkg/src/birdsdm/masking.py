"""Geographic post-processing of predictions: hard range-map masking and
regional soft-mask correction factors."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, MissingInputError


def hard_mask(preds, hotspots: Sequence, range_maps: Sequence) -> np.ndarray:
    """Zero species outside their range; species without a map are untouched."""
    out = np.array(preds, dtype=np.float64, copy=True)
    if out.shape[0] != len(hotspots):
        raise DataError(f"{out.shape[0]} prediction rows for {len(hotspots)} hotspots")
    regions = [h.region_id for h in hotspots]
    for m in range_maps:
        if not m.available:
            continue
        outside = np.fromiter((r not in m.allowed_regions for r in regions), dtype=bool, count=len(regions))
        out[outside, m.species_index] = 0.0
    return out


@dataclass
class SoftMaskFactors:
    """``factors[r, s]`` for ``regions[r]``; ``region_counts`` and
    ``global_count`` are the checklist totals the fractions used."""

    regions: tuple[str, ...]
    factors: np.ndarray
    region_counts: np.ndarray
    global_count: int
    _row: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.regions = tuple(self.regions)
        self._row = {r: i for i, r in enumerate(self.regions)}

    def row(self, region_id: str, n_species: int) -> np.ndarray:
        i = self._row.get(region_id)
        return np.ones(n_species) if i is None else self.factors[i]


def compute_soft_mask_factors(train_checklists: Sequence, hotspots: Sequence, n_species: int,
                              regions: Iterable[str] | None = None) -> SoftMaskFactors:
    """Regional over global reporting fraction per species.

    ``c[R, s] = (reports of s in R / checklists in R) /
    (reports of s anywhere / all checklists)``. A species never reported
    gets 0; a region without checklists gets 1 (neutral).
    ``train_checklists`` must come from training hotspots only.
    """
    if not train_checklists:
        raise DataError("soft-mask factors need a non-empty training set")
    region_of = {h.id: h.region_id for h in hotspots}
    universe = sorted(set(regions) if regions is not None else set(region_of.values()))
    row = {r: i for i, r in enumerate(universe)}
    reports = np.zeros((len(universe), n_species), dtype=np.int64)
    counts = np.zeros(len(universe), dtype=np.int64)
    for c in train_checklists:
        try:
            r = row[region_of[c.hotspot_id]]
        except KeyError:
            raise DataError(f"checklist hotspot {c.hotspot_id!r} has no known region") from None
        counts[r] += 1
        if c.species_reported:
            reports[r, list(c.species_reported)] += 1
    total = int(counts.sum())
    global_frac = reports.sum(axis=0) / total
    factors = np.ones((len(universe), n_species))
    seen = counts > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        regional = reports[seen] / counts[seen, None]
        factors[seen] = np.where(global_frac > 0, regional / global_frac, 0.0)
    factors[:, global_frac == 0] = 0.0
    return SoftMaskFactors(tuple(universe), factors, counts, total)


def apply_soft_mask(preds, factors: SoftMaskFactors, hotspots: Sequence) -> np.ndarray:
    preds = np.asarray(preds, dtype=np.float64)
    if preds.shape[0] != len(hotspots):
        raise DataError(f"{preds.shape[0]} prediction rows for {len(hotspots)} hotspots")
    c = np.stack([factors.row(h.region_id, preds.shape[1]) for h in hotspots]) if len(hotspots) else preds
    return np.clip(c * preds, 0.0, 1.0)


def write_factors(path, factors: SoftMaskFactors, species_names: Sequence[str]):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["region_id", "species", "factor"])
        for i, r in enumerate(factors.regions):
            for s, name in enumerate(species_names):
                w.writerow([r, name, repr(float(factors.factors[i, s]))])


def read_factors(path, species_names: Sequence[str]) -> SoftMaskFactors:
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"factors file not found: {path}")
    col = {n: i for i, n in enumerate(species_names)}
    rows: dict[str, np.ndarray] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["region_id", "species", "factor"]:
            raise DataError(f"{path}: header must be region_id,species,factor")
        for lineno, rec in enumerate(reader, start=2):
            if rec["species"] not in col:
                raise DataError(f"{path} line {lineno}: unknown species {rec['species']!r}")
            rows.setdefault(rec["region_id"], np.ones(len(col)))[col[rec["species"]]] = float(rec["factor"])
    regions = tuple(rows)
    factors = np.stack([rows[r] for r in regions]) if regions else np.ones((0, len(col)))
    return SoftMaskFactors(regions, factors, np.zeros(len(regions), dtype=np.int64), 0)
