"""Seeded synthetic worlds: hotspots, checklists, range maps and patches.

Each hotspot gets a habitat archetype. Archetypes come in pairs sharing a
climate group: environmental bands only see the group, image bands and
landcover see the archetype, and species reporting probabilities depend
on both. Image data therefore carries species signal beyond the
environmental bands.
"""
from __future__ import annotations

import csv
import datetime as dt
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .checklists import (Checklist, Hotspot, RangeMap, SpeciesIndex, write_range_maps,
                         write_species_list)
from .errors import DataError
from .features import (ENV_BANDS, IMAGE_BANDS, LANDCOVER_BAND, N_LANDCOVER_CLASSES, RasterPatch,
                       patch_path, write_band_manifest, write_patch)


@dataclass
class Archetype:
    band_means: list[float]
    affinity: list[float]


@dataclass
class SyntheticWorldSpec:
    n_hotspots: int = 300
    n_species: int = 40
    n_regions: int = 4
    patch_size: int = 16
    env_patch_size: int = 4
    n_archetypes: int = 6
    n_groups: int = 3
    min_checklists: int = 3
    max_checklists: int = 40
    range_fraction: float = 0.25
    vagrant_prob: float = 0.0
    # logit-scale spread of species affinities
    base_logit: float = -1.0
    group_sd: float = 1.5
    archetype_sd: float = 1.2
    pixel_noise: float = 0.04
    env_noise: float = 0.05
    origin: tuple[float, float] = (35.0, -100.0)
    spacing_deg: float = 0.08
    jitter: float = 0.3
    with_landcover: bool = True
    seed: int = 0
    archetypes: list[Archetype] | None = None

    def __post_init__(self):
        if self.n_hotspots < 1:
            raise DataError("n_hotspots must be >= 1")
        if self.n_species < 1 or self.n_regions < 1 or self.n_archetypes < 1 or self.n_groups < 1:
            raise DataError("n_species, n_regions, n_archetypes and n_groups must be >= 1")
        if not 1 <= self.min_checklists <= self.max_checklists:
            raise DataError("need 1 <= min_checklists <= max_checklists")
        if self.archetypes is not None:
            self.archetypes = [a if isinstance(a, Archetype) else Archetype(**a) for a in self.archetypes]
            self.n_archetypes = len(self.archetypes)
            for a in self.archetypes:
                if len(a.affinity) != self.n_species or len(a.band_means) != len(IMAGE_BANDS):
                    raise DataError("archetype affinity/band_means have the wrong length")
                if min(a.affinity) < 0 or max(a.affinity) > 1:
                    raise DataError("affinities must lie in [0, 1]")


@dataclass
class World:
    spec: SyntheticWorldSpec
    species: SpeciesIndex
    hotspots: list[Hotspot]
    archetype_of: np.ndarray
    probabilities: np.ndarray  # [hotspots x species] reporting probability
    checklists: list[Checklist]
    range_maps: list[RangeMap]
    patches: dict[str, dict[str, RasterPatch]] = field(default_factory=dict)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def generate_world(spec: SyntheticWorldSpec) -> World:
    rng = np.random.default_rng(spec.seed)
    S, K, G = spec.n_species, spec.n_archetypes, spec.n_groups
    species = SpeciesIndex(tuple(f"sp_{i:03d}" for i in range(S)))
    group_of = np.arange(K) % G

    if spec.archetypes is None:
        base = rng.normal(spec.base_logit, 1.0, S)
        group_eff = rng.normal(0.0, spec.group_sd, (G, S))
        arch_eff = rng.normal(0.0, spec.archetype_sd, (K, S))
        affinity = _sigmoid(base + group_eff[group_of] + arch_eff)
        band_means = rng.uniform(0.05, 0.5, (K, len(IMAGE_BANDS)))
    else:
        affinity = np.array([a.affinity for a in spec.archetypes], dtype=np.float64)
        band_means = np.array([a.band_means for a in spec.archetypes], dtype=np.float64)
    env_means = rng.normal(0.0, 1.0, (G, len(ENV_BANDS)))

    # hotspots on a jittered grid; regions are vertical strips of columns
    ncols = math.ceil(math.sqrt(spec.n_hotspots))
    hotspots = []
    for i in range(spec.n_hotspots):
        r, c = divmod(i, ncols)
        dlat, dlon = rng.uniform(-spec.jitter, spec.jitter, 2) * spec.spacing_deg
        lat = round(float(spec.origin[0] + r * spec.spacing_deg + dlat), 6)
        lon = round(float(spec.origin[1] + c * spec.spacing_deg + dlon), 6)
        region = f"R{c * spec.n_regions // ncols}"
        hotspots.append(Hotspot(f"H{i:05d}", lat, lon, region, 0))
    archetype_of = rng.integers(0, K, spec.n_hotspots)

    regions = [f"R{j}" for j in range(spec.n_regions)]
    range_maps = []
    in_range = np.ones((spec.n_hotspots, S), dtype=bool)
    hot_regions = np.array([h.region_id for h in hotspots])
    for s in range(S):
        if spec.n_regions > 1 and rng.random() < spec.range_fraction:
            width = int(rng.integers(1, spec.n_regions))
            start = int(rng.integers(0, spec.n_regions - width + 1))
            allowed = frozenset(regions[start:start + width])
            range_maps.append(RangeMap(s, allowed, True))
            in_range[:, s] = np.isin(hot_regions, list(allowed))
        else:
            range_maps.append(RangeMap(s))

    probs = affinity[archetype_of] * np.where(in_range, 1.0, spec.vagrant_prob)

    checklists = []
    counts = rng.integers(spec.min_checklists, spec.max_checklists + 1, spec.n_hotspots)
    for i, h in enumerate(hotspots):
        draws = rng.random((counts[i], S)) < probs[i]
        for j in range(counts[i]):
            day = dt.date(2016 + j % 5, 6, 1 + j % 30)
            checklists.append(Checklist(h.id, frozenset(np.flatnonzero(draws[j]).tolist()), day))
    hotspots = [Hotspot(h.id, h.lat, h.lon, h.region_id, int(n)) for h, n in zip(hotspots, counts)]

    P, E = spec.patch_size, max(1, spec.env_patch_size)
    patches: dict[str, dict[str, RasterPatch]] = {}
    for i, h in enumerate(hotspots):
        a = archetype_of[i]
        img = band_means[a][:, None, None] + rng.normal(0.0, spec.pixel_noise, (len(IMAGE_BANDS), P, P))
        env = env_means[group_of[a]][:, None, None] + rng.normal(0.0, spec.env_noise, (len(ENV_BANDS), E, E))
        entry = {
            "image": RasterPatch(h.id, IMAGE_BANDS, img.astype(np.float32), 10.0),
            "env": RasterPatch(h.id, ENV_BANDS, env.astype(np.float32), 10.0 * P / E),
        }
        if spec.with_landcover:
            lc = np.full((P, P), a % N_LANDCOVER_CLASSES)
            noisy = rng.random((P, P)) < 0.2
            lc[noisy] = rng.integers(0, N_LANDCOVER_CLASSES, int(noisy.sum()))
            entry["landcover"] = RasterPatch(h.id, (LANDCOVER_BAND,), lc[None].astype(np.float32), 10.0)
        patches[h.id] = entry

    return World(spec, species, hotspots, archetype_of, probs, checklists, range_maps, patches)


def write_world(world: World, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    patch_dir = out / "patches"
    patch_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "checklists": out / "checklists.csv",
        "species": out / "species.txt",
        "rangemaps": out / "rangemaps.csv",
        "patches": patch_dir,
        "world": out / "world.json",
    }
    write_species_list(paths["species"], world.species)
    coords = {h.id: h for h in world.hotspots}
    with open(paths["checklists"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["hotspot_id", "lat", "lon", "region_id", "date", "species"])
        for c in world.checklists:
            h = coords[c.hotspot_id]
            names = ";".join(world.species.names[s] for s in sorted(c.species_reported))
            w.writerow([h.id, repr(h.lat), repr(h.lon), h.region_id, c.date.isoformat(), names])
    write_range_maps(paths["rangemaps"], world.range_maps, world.species)
    write_band_manifest(patch_dir / "bands.json",
                        landcover=(LANDCOVER_BAND,) if world.spec.with_landcover else ())
    for hid, entry in world.patches.items():
        for source, patch in entry.items():
            write_patch(patch_path(patch_dir, hid, source), patch)
    meta = {"spec": asdict(world.spec),
            "archetype_of": {h.id: int(a) for h, a in zip(world.hotspots, world.archetype_of)}}
    paths["world"].write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return paths


def generate_synthetic_world(spec: SyntheticWorldSpec, out_dir) -> dict[str, Path]:
    return write_world(generate_world(spec), out_dir)
