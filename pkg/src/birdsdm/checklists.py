"""Checklist ingestion and per-hotspot encounter rates.

A hotspot's encounter rate for a species is the fraction of its complete
checklists that report the species.
"""
from __future__ import annotations

import csv
import datetime as dt
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from ._binio import Reader, Writer
from .errors import DataError, MissingInputError

CHECKLIST_HEADER = ("hotspot_id", "lat", "lon", "region_id", "date", "species")
RANGEMAP_HEADER = ("species", "region_id")
TABLE_MAGIC = b"SDMT"
TABLE_VERSION = 1


@dataclass(frozen=True)
class SpeciesIndex:
    names: tuple[str, ...]
    id_of: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        names = tuple(self.names)
        if not names:
            raise DataError("species list is empty")
        id_of = {}
        for i, name in enumerate(names):
            if not name:
                raise DataError(f"species list line {i + 1}: empty name")
            if name in id_of:
                raise DataError(f"duplicate species name {name!r}")
            id_of[name] = i
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "id_of", id_of)

    def __len__(self):
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.id_of[name]
        except KeyError:
            raise DataError(f"unknown species {name!r} (not in species list)") from None


@dataclass(frozen=True)
class Checklist:
    hotspot_id: str
    species_reported: frozenset[int]
    date: dt.date | None = None


@dataclass(frozen=True)
class Hotspot:
    id: str
    lat: float
    lon: float
    region_id: str
    n_checklists: int = 0

    def __post_init__(self):
        if not (-90.0 <= self.lat <= 90.0):
            raise DataError(f"hotspot {self.id}: latitude {self.lat} outside [-90, 90]")
        if not (-180.0 <= self.lon <= 180.0):
            raise DataError(f"hotspot {self.id}: longitude {self.lon} outside [-180, 180]")
        if self.n_checklists < 0:
            raise DataError(f"hotspot {self.id}: negative checklist count")


@dataclass(frozen=True)
class RangeMap:
    species_index: int
    allowed_regions: frozenset[str] = frozenset()
    available: bool = False

    def __post_init__(self):
        if not self.available and self.allowed_regions:
            raise DataError("an unavailable range map cannot list allowed regions")


@dataclass
class EncounterTable:
    hotspots: list[Hotspot]
    species: SpeciesIndex
    rates: np.ndarray

    def __post_init__(self):
        self.rates = np.asarray(self.rates, dtype=np.float64)
        if self.rates.shape != (len(self.hotspots), len(self.species)):
            raise DataError(
                f"rates shape {self.rates.shape} does not match "
                f"{len(self.hotspots)} hotspots x {len(self.species)} species"
            )
        if self.rates.size and (np.isnan(self.rates).any() or self.rates.min() < 0 or self.rates.max() > 1):
            raise DataError("encounter rates must lie in [0, 1]")

    @property
    def hotspot_ids(self) -> list[str]:
        return [h.id for h in self.hotspots]

    @property
    def n_checklists(self) -> np.ndarray:
        return np.array([h.n_checklists for h in self.hotspots], dtype=np.int64)

    def subset(self, hotspot_ids: Iterable[str]) -> "EncounterTable":
        """Rows for ``hotspot_ids``, in the order given."""
        pos = {h.id: i for i, h in enumerate(self.hotspots)}
        try:
            rows = [pos[h] for h in hotspot_ids]
        except KeyError as exc:
            raise DataError(f"hotspot {exc.args[0]!r} not in table") from None
        return EncounterTable([self.hotspots[i] for i in rows], self.species, self.rates[rows].copy())

    def with_rates(self, rates: np.ndarray) -> "EncounterTable":
        return EncounterTable(list(self.hotspots), self.species, rates)


def read_species_list(path) -> SpeciesIndex:
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"species list not found: {path}")
    names = [line.rstrip("\r\n") for line in path.read_text(encoding="utf-8").split("\n")]
    while names and names[-1] == "":
        names.pop()
    return SpeciesIndex(tuple(names))


def write_species_list(path, species: SpeciesIndex):
    Path(path).write_text("".join(name + "\n" for name in species.names), encoding="utf-8")


def _in_date_filter(date, months, date_range):
    if months is not None and date.month not in months:
        return False
    if date_range is not None and not (date_range[0] <= date <= date_range[1]):
        return False
    return True


def ingest_checklists(
    records: Iterable[Mapping[str, str]],
    species: SpeciesIndex,
    months: Sequence[int] | None = None,
    date_range: tuple[dt.date, dt.date] | None = None,
    first_line: int = 2,
) -> tuple[SpeciesIndex, list[Checklist], list[Hotspot]]:
    """Parse checklist rows into checklists and deduplicated hotspots.

    ``records`` are mappings keyed by the checklist CSV header. ``first_line``
    is the file line number of the first record, used in error messages.
    Rows outside ``months`` / ``date_range`` are skipped.
    """
    months = set(months) if months is not None else None
    checklists: list[Checklist] = []
    coords: dict[str, tuple[float, float, str]] = {}
    order: list[str] = []
    counts: Counter = Counter()

    for lineno, row in enumerate(records, start=first_line):
        try:
            missing = [k for k in CHECKLIST_HEADER if row.get(k) is None]
            if missing:
                raise ValueError(f"missing field(s) {', '.join(missing)}")
            hid = row["hotspot_id"].strip()
            if not hid:
                raise ValueError("empty hotspot_id")
            lat = float(row["lat"])
            lon = float(row["lon"])
            region = row["region_id"].strip()
            date = dt.date.fromisoformat(row["date"].strip())
        except (ValueError, TypeError, AttributeError) as exc:
            raise DataError(f"line {lineno}: malformed checklist row ({exc})") from None
        if not (-90.0 <= lat <= 90.0) or not (-180.0 <= lon <= 180.0):
            raise DataError(f"line {lineno}: coordinates ({lat}, {lon}) out of range")
        names = [s.strip() for s in row["species"].split(";") if s.strip()]
        try:
            reported = frozenset(species.index(n) for n in names)
        except DataError as exc:
            raise DataError(f"line {lineno}: {exc}") from None

        if hid in coords:
            if coords[hid] != (lat, lon, region):
                raise DataError(
                    f"line {lineno}: hotspot {hid} has inconsistent coordinates/region "
                    f"{(lat, lon, region)} vs {coords[hid]}"
                )
        else:
            coords[hid] = (lat, lon, region)
            order.append(hid)

        if not _in_date_filter(date, months, date_range):
            continue
        checklists.append(Checklist(hid, reported, date))
        counts[hid] += 1

    if not checklists:
        raise DataError("no checklists")
    hotspots = [
        Hotspot(hid, coords[hid][0], coords[hid][1], coords[hid][2], counts[hid])
        for hid in order
        if counts[hid] > 0
    ]
    return species, checklists, hotspots


def read_checklists_csv(path, species: SpeciesIndex, **kwargs):
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"checklists file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != CHECKLIST_HEADER:
            raise DataError(f"{path}: header must be {','.join(CHECKLIST_HEADER)}")
        return ingest_checklists(reader, species, **kwargs)


def compute_encounter_rates(
    checklists: Sequence[Checklist],
    hotspots: Sequence[Hotspot],
    species: SpeciesIndex,
    min_checklists: int = 5,
) -> EncounterTable:
    if min_checklists < 1:
        raise DataError("min_checklists must be >= 1")
    kept = [h for h in hotspots if h.n_checklists >= min_checklists]
    if not kept:
        raise DataError("empty table: every hotspot has fewer than "
                        f"{min_checklists} checklists")
    row_of = {h.id: i for i, h in enumerate(kept)}
    reports = np.zeros((len(kept), len(species)), dtype=np.int64)
    totals = np.zeros(len(kept), dtype=np.int64)
    for c in checklists:
        i = row_of.get(c.hotspot_id)
        if i is None:
            continue
        totals[i] += 1
        if c.species_reported:
            reports[i, list(c.species_reported)] += 1
    expected = np.array([h.n_checklists for h in kept])
    if not np.array_equal(totals, expected):
        bad = kept[int(np.flatnonzero(totals != expected)[0])]
        raise DataError(f"hotspot {bad.id}: n_checklists does not match the checklists given")
    return EncounterTable(kept, species, reports / totals[:, None])


def apply_vagrant_correction(table: EncounterTable, maps: Sequence[RangeMap]) -> EncounterTable:
    """Zero the rates of species recorded outside their range map."""
    rates = table.rates.copy()
    regions = np.array([h.region_id for h in table.hotspots], dtype=object)
    for m in maps:
        if not m.available:
            continue
        outside = np.array([r not in m.allowed_regions for r in regions], dtype=bool)
        rates[outside, m.species_index] = 0.0
    return table.with_rates(rates)


def species_count_histogram(table: EncounterTable) -> tuple[np.ndarray, float]:
    """Histogram of the number of species with non-zero rate per hotspot.

    Returns ``(counts, mean)`` where ``counts[k]`` is the number of hotspots
    with exactly ``k`` species encountered.
    """
    if not table.hotspots:
        raise DataError("empty table")
    per_row = np.count_nonzero(table.rates > 0, axis=1)
    counts = np.bincount(per_row, minlength=len(table.species) + 1)
    return counts, float(per_row.mean())


def read_range_maps(path, species: SpeciesIndex) -> list[RangeMap]:
    """One RangeMap per species; species absent from the file are unavailable."""
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"range map file not found: {path}")
    allowed: dict[int, set[str]] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != RANGEMAP_HEADER:
            raise DataError(f"{path}: header must be {','.join(RANGEMAP_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            name, region = (row["species"] or "").strip(), (row["region_id"] or "").strip()
            if not name or not region:
                raise DataError(f"{path} line {lineno}: empty field")
            try:
                allowed.setdefault(species.index(name), set()).add(region)
            except DataError as exc:
                raise DataError(f"{path} line {lineno}: {exc}") from None
    return [
        RangeMap(s, frozenset(allowed[s]), True) if s in allowed else RangeMap(s)
        for s in range(len(species))
    ]


def write_range_maps(path, maps: Sequence[RangeMap], species: SpeciesIndex):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RANGEMAP_HEADER)
        for m in maps:
            if m.available:
                for region in sorted(m.allowed_regions):
                    w.writerow([species.names[m.species_index], region])


def write_table(path, table: EncounterTable):
    """Write an SDMT file.

    Layout (little-endian): magic ``SDMT``, u32 version, u32 hotspot count,
    u32 species count, species names, per-hotspot (id, lat f64, lon f64,
    region id, u32 checklist count), then float32 rates row-major. Strings
    are u32 byte length followed by UTF-8.
    """
    with open(path, "wb") as fh:
        w = Writer(fh)
        w.magic(TABLE_MAGIC, TABLE_VERSION)
        w.u32(len(table.hotspots))
        w.u32(len(table.species))
        for name in table.species.names:
            w.text(name)
        for h in table.hotspots:
            w.text(h.id)
            w.f64(h.lat)
            w.f64(h.lon)
            w.text(h.region_id)
            w.u32(h.n_checklists)
        w.array(table.rates, "f4")


def read_table(path) -> EncounterTable:
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"table not found: {path}")
    with path.open("rb") as fh:
        r = Reader(fh, str(path))
        r.magic(TABLE_MAGIC)
        n_h, n_s = r.u32(), r.u32()
        species = SpeciesIndex(tuple(r.text() for _ in range(n_s)))
        hotspots = []
        for _ in range(n_h):
            hid = r.text()
            lat, lon = r.f64(), r.f64()
            hotspots.append(Hotspot(hid, lat, lon, r.text(), r.u32()))
        rates = r.array(n_h * n_s, "f4").reshape(n_h, n_s).astype(np.float64)
        r.expect_eof()
    return EncounterTable(hotspots, species, rates)


def quantize(table: EncounterTable) -> EncounterTable:
    """The table as it reads back from disk (rates rounded to float32)."""
    return replace(table, rates=table.rates.astype(np.float32).astype(np.float64))
