"""Spatially blocked train/val/test splitting.

Hotspots closer than ``min_dist_km`` are chained into one cluster
(single linkage), and whole clusters are dealt to the splits, so any two
hotspots in different splits are at least ``min_dist_km`` apart.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError, MissingInputError

EARTH_RADIUS_KM = 6371.0
SPLITS = ("train", "val", "test")


@dataclass
class Cluster:
    id: int
    member_hotspot_ids: list[str]


@dataclass
class SplitAssignment:
    split_of: dict[str, str]
    seed: int
    ratios: tuple[float, float, float]

    def ids(self, split: str) -> list[str]:
        return [h for h, s in self.split_of.items() if s == split]

    def fractions(self) -> dict[str, float]:
        n = len(self.split_of)
        return {s: sum(v == s for v in self.split_of.values()) / n for s in SPLITS}


def geodesic_distance_km(a, b) -> float:
    """Haversine distance between two (lat, lon) points in degrees."""
    return float(haversine_km(np.array([a[0]]), np.array([a[1]]), np.array([b[0]]), np.array([b[1]]))[0])


def haversine_km(lat1, lon1, lat2, lon2):
    lat1, lon1, lat2, lon2 = (np.radians(np.asarray(v, dtype=np.float64)) for v in (lat1, lon1, lat2, lon2))
    h = np.sin((lat2 - lat1) / 2) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2) ** 2
    return 2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def pairwise_distance_km(lats, lons) -> np.ndarray:
    lats = np.asarray(lats, dtype=np.float64)
    lons = np.asarray(lons, dtype=np.float64)
    return haversine_km(lats[:, None], lons[:, None], lats[None, :], lons[None, :])


def _find(parent, i):
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


def cluster_hotspots(hotspots: Sequence, min_dist_km: float = 5.0, chunk: int = 2048) -> list[Cluster]:
    """Single-linkage clusters: connected components of ``d < min_dist_km``.

    Clusters are numbered by their first member in ``hotspots`` order and
    list members in that order.
    """
    if min_dist_km <= 0:
        raise DataError("min_dist_km must be positive")
    if not hotspots:
        raise DataError("no hotspots to cluster")
    n = len(hotspots)
    lats = np.array([h.lat for h in hotspots], dtype=np.float64)
    lons = np.array([h.lon for h in hotspots], dtype=np.float64)
    parent = list(range(n))
    for start in range(0, n, chunk):
        stop = min(n, start + chunk)
        d = haversine_km(lats[start:stop, None], lons[start:stop, None], lats[None, :], lons[None, :])
        rows, cols = np.nonzero(d < min_dist_km)
        for i, j in zip(rows + start, cols):
            if j <= i:
                continue
            ri, rj = _find(parent, i), _find(parent, j)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)

    label_of_root: dict[int, int] = {}
    clusters: list[Cluster] = []
    for i, h in enumerate(hotspots):
        root = _find(parent, i)
        if root not in label_of_root:
            label_of_root[root] = len(clusters)
            clusters.append(Cluster(len(clusters), []))
        clusters[label_of_root[root]].member_hotspot_ids.append(h.id)
    return clusters


def assign_splits(clusters: Sequence[Cluster], ratios=(0.7, 0.2, 0.1), seed: int = 0) -> SplitAssignment:
    """Deal shuffled clusters to the split with the largest hotspot deficit.

    The deficit of a split is its target ratio minus its current share of
    all hotspots; ties go to the earlier split in train/val/test order.
    Shuffling uses numpy's PCG64 generator seeded with ``seed``.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != len(SPLITS) or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise DataError(f"ratios must be {len(SPLITS)} positive values summing to 1, got {ratios}")
    if len(clusters) < len(SPLITS):
        raise DataError(f"insufficient clusters: {len(clusters)} < {len(SPLITS)} splits")
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise DataError("seed must be an unsigned 64-bit integer")

    total = sum(len(c.member_hotspot_ids) for c in clusters)
    order = np.random.default_rng(seed).permutation(len(clusters))
    counts = np.zeros(len(SPLITS), dtype=np.int64)
    target = np.array(ratios)
    split_of: dict[str, str] = {}
    for ci in order:
        members = clusters[ci].member_hotspot_ids
        j = int(np.argmax(target - counts / total))
        counts[j] += len(members)
        for hid in members:
            split_of[hid] = SPLITS[j]
    # report in cluster/member order rather than shuffle order
    ordered = {hid: split_of[hid] for c in clusters for hid in c.member_hotspot_ids}
    return SplitAssignment(ordered, seed, ratios)


def write_splits(path, assignment: SplitAssignment):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["hotspot_id", "split"])
        for hid, s in assignment.split_of.items():
            w.writerow([hid, s])


def read_splits(path, seed: int = 0, ratios=(0.7, 0.2, 0.1)) -> SplitAssignment:
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"splits file not found: {path}")
    split_of = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["hotspot_id", "split"]:
            raise DataError(f"{path}: header must be hotspot_id,split")
        for lineno, row in enumerate(reader, start=2):
            if row["split"] not in SPLITS:
                raise DataError(f"{path} line {lineno}: unknown split {row['split']!r}")
            split_of[row["hotspot_id"]] = row["split"]
    return SplitAssignment(split_of, seed, tuple(ratios))
