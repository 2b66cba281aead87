"""Raster patches: IO, cropping, normalization, channel stacking, flips,
and point-sampled environmental feature vectors."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from ._binio import Reader, Writer
from .errors import DataError, MissingInputError

IMAGE_BANDS = ("R", "G", "B", "NIR")
ENV_BANDS = tuple(f"bio_{i}" for i in range(1, 20)) + tuple(f"soil_{i}" for i in range(1, 9))
LANDCOVER_BAND = "landcover"
N_LANDCOVER_CLASSES = 10
ONEHOT_BANDS = tuple(f"lc_{i}" for i in range(N_LANDCOVER_CLASSES))
CATEGORICAL_BANDS = frozenset((LANDCOVER_BAND,) + ONEHOT_BANDS)

PATCH_MAGIC = b"SDMP"
PATCH_VERSION = 1
SOURCE_SUFFIX = {"image": ".img.sdmp", "env": ".env.sdmp", "landcover": ".lc.sdmp"}


@dataclass
class RasterPatch:
    hotspot_id: str
    bands: tuple[str, ...]
    data: np.ndarray
    resolution_m: float = 10.0

    def __post_init__(self):
        self.bands = tuple(self.bands)
        self.data = np.asarray(self.data)
        if self.data.ndim != 3 or self.data.shape[0] != len(self.bands):
            raise DataError(f"patch {self.hotspot_id}: data shape {self.data.shape} "
                            f"does not match {len(self.bands)} bands")
        if len(set(self.bands)) != len(self.bands):
            raise DataError(f"patch {self.hotspot_id}: duplicate band names")

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    def band(self, name: str) -> np.ndarray:
        try:
            return self.data[self.bands.index(name)]
        except ValueError:
            raise DataError(f"patch {self.hotspot_id}: missing band {name!r}") from None

    def _with(self, data, bands=None, resolution_m=None):
        return RasterPatch(self.hotspot_id, self.bands if bands is None else bands, data,
                           self.resolution_m if resolution_m is None else resolution_m)


@dataclass
class NormalizationStats:
    bands: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray

    @property
    def constant(self) -> np.ndarray:
        return self.std == 0

    def to_json(self) -> str:
        return json.dumps({"bands": list(self.bands), "mean": self.mean.tolist(),
                           "std": self.std.tolist()}, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "NormalizationStats":
        d = json.loads(text)
        return cls(tuple(d["bands"]), np.array(d["mean"], dtype=np.float64),
                   np.array(d["std"], dtype=np.float64))


@dataclass
class FeatureVector:
    hotspot_id: str
    values: np.ndarray


def write_patch(path, patch: RasterPatch):
    """SDMP layout: magic, u32 version, hotspot id, u32 band count, band
    names, u32 height, u32 width, f64 resolution (m), float32 data
    [bands x H x W]. All little-endian; strings are u32-length UTF-8."""
    with open(path, "wb") as fh:
        w = Writer(fh)
        w.magic(PATCH_MAGIC, PATCH_VERSION)
        w.text(patch.hotspot_id)
        w.u32(len(patch.bands))
        for b in patch.bands:
            w.text(b)
        w.u32(patch.height)
        w.u32(patch.width)
        w.f64(patch.resolution_m)
        w.array(patch.data, "f4")


def read_patch(path) -> RasterPatch:
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"patch not found: {path}")
    with path.open("rb") as fh:
        r = Reader(fh, str(path))
        r.magic(PATCH_MAGIC)
        hid = r.text()
        bands = tuple(r.text() for _ in range(r.u32()))
        h, w = r.u32(), r.u32()
        res = r.f64()
        data = r.array(len(bands) * h * w, "f4").reshape(len(bands), h, w)
        r.expect_eof()
    return RasterPatch(hid, bands, data, res)


def patch_path(patch_dir, hotspot_id: str, source: str) -> Path:
    return Path(patch_dir) / f"{hotspot_id}{SOURCE_SUFFIX[source]}"


def write_band_manifest(path, image=IMAGE_BANDS, env=ENV_BANDS, landcover=(LANDCOVER_BAND,)):
    manifest = {"image": list(image), "env": list(env), "landcover": list(landcover)}
    Path(path).write_text(json.dumps(manifest, indent=1) + "\n", encoding="utf-8")


def read_band_manifest(path) -> dict[str, tuple[str, ...]]:
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"band manifest not found: {path}")
    raw = json.loads(path.read_text(encoding="utf-8"))
    return {k: tuple(raw.get(k, ())) for k in ("image", "env", "landcover")}


def center_crop(patch: RasterPatch, size: int) -> RasterPatch:
    if patch.height < size or patch.width < size:
        raise DataError(f"patch {patch.hotspot_id} is {patch.height}x{patch.width}, "
                        f"smaller than crop size {size}")
    top = (patch.height - size) // 2
    left = (patch.width - size) // 2
    return patch._with(patch.data[:, top:top + size, left:left + size].copy())


def continuous_bands(bands: Iterable[str]) -> tuple[str, ...]:
    return tuple(b for b in bands if b not in CATEGORICAL_BANDS)


def compute_band_stats(patches: Sequence[RasterPatch], split_of: Mapping[str, str] | None = None) -> NormalizationStats:
    """Per-band mean and population std over every pixel of the train patches.

    When ``split_of`` is given only hotspots mapped to ``"train"`` contribute.
    Per-patch moments are merged in list order (Chan et al. pairwise update).
    """
    train = [p for p in patches if split_of is None or split_of.get(p.hotspot_id) == "train"]
    if not train:
        raise DataError("no training patches to compute band statistics from")
    bands = continuous_bands(train[0].bands)
    n = 0
    mean = np.zeros(len(bands))
    m2 = np.zeros(len(bands))
    for p in train:
        x = np.stack([p.band(b) for b in bands]).reshape(len(bands), -1).astype(np.float64)
        nb = x.shape[1]
        mb = x.mean(axis=1)
        m2b = ((x - mb[:, None]) ** 2).sum(axis=1)
        delta = mb - mean
        tot = n + nb
        mean = mean + delta * (nb / tot)
        m2 = m2 + m2b + delta**2 * (n * nb / tot)
        n = tot
    std = np.sqrt(m2 / n)
    # float noise on a constant band must not turn into a huge scale factor
    std[std <= 1e-12 * np.maximum(1.0, np.abs(mean))] = 0.0
    return NormalizationStats(bands, mean, std)


def _band_params(patch: RasterPatch, stats: NormalizationStats):
    pos = {b: i for i, b in enumerate(stats.bands)}
    shift = np.zeros(len(patch.bands))
    scale = np.ones(len(patch.bands))
    for i, b in enumerate(patch.bands):
        if b in CATEGORICAL_BANDS:
            continue
        if b not in pos:
            raise DataError(f"patch {patch.hotspot_id}: no normalization stats for band {b!r}")
        j = pos[b]
        shift[i] = stats.mean[j]
        scale[i] = stats.std[j] if stats.std[j] > 0 else 1.0
    return shift[:, None, None], scale[:, None, None]


def normalize(patch: RasterPatch, stats: NormalizationStats) -> RasterPatch:
    """``(x - mean) / std`` per band; constant bands are only centered and
    categorical bands pass through."""
    shift, scale = _band_params(patch, stats)
    return patch._with((patch.data.astype(np.float64) - shift) / scale)


def denormalize(patch: RasterPatch, stats: NormalizationStats) -> RasterPatch:
    shift, scale = _band_params(patch, stats)
    return patch._with(patch.data.astype(np.float64) * scale + shift)


def resample_nearest(patch: RasterPatch, height: int, width: int) -> RasterPatch:
    """Nearest-neighbour resampling onto a ``height x width`` grid covering
    the same extent (pixel centres mapped to source pixels)."""
    if (patch.height, patch.width) == (height, width):
        return patch
    rows = np.minimum(((np.arange(height) + 0.5) * patch.height / height).astype(np.int64), patch.height - 1)
    cols = np.minimum(((np.arange(width) + 0.5) * patch.width / width).astype(np.int64), patch.width - 1)
    res = patch.resolution_m * patch.height / height
    return patch._with(patch.data[:, rows][:, :, cols], resolution_m=res)


def one_hot_landcover(lc: RasterPatch) -> RasterPatch:
    codes = lc.band(LANDCOVER_BAND)
    classes = np.rint(codes).astype(np.int64)
    if np.any(classes != codes) or classes.min() < 0 or classes.max() >= N_LANDCOVER_CLASSES:
        raise DataError(f"patch {lc.hotspot_id}: landcover codes must be integers 0..{N_LANDCOVER_CLASSES - 1}")
    onehot = (classes[None] == np.arange(N_LANDCOVER_CLASSES)[:, None, None]).astype(np.float32)
    return lc._with(onehot, bands=ONEHOT_BANDS)


def stack_channels(image: RasterPatch, env: RasterPatch | None = None,
                   landcover: RasterPatch | None = None, env_bands: Sequence[str] = ENV_BANDS) -> RasterPatch:
    """Image bands, then environmental bands in manifest order, then the
    10-channel landcover one-hot, all on the image grid."""
    parts = [image.data]
    names = list(image.bands)
    for other in (env, landcover):
        if other is not None and other.hotspot_id != image.hotspot_id:
            raise DataError(f"cannot stack patch of {other.hotspot_id} onto {image.hotspot_id}")
    if env is not None:
        env = resample_nearest(env, image.height, image.width)
        parts.append(np.stack([env.band(b) for b in env_bands]))
        names += list(env_bands)
    if landcover is not None:
        lc = one_hot_landcover(resample_nearest(landcover, image.height, image.width))
        parts.append(lc.data)
        names += list(ONEHOT_BANDS)
    for p in parts:
        if p.shape[1:] != image.data.shape[1:]:
            raise DataError(f"patch {image.hotspot_id}: grid mismatch after resampling")
    dtype = np.result_type(*[p.dtype for p in parts])
    return image._with(np.concatenate([p.astype(dtype) for p in parts]), bands=tuple(names))


def flip_array(data: np.ndarray, horizontal: bool, vertical: bool) -> np.ndarray:
    """Flip the last two axes of ``data`` (rows, columns)."""
    if horizontal:
        data = data[..., ::-1]
    if vertical:
        data = data[..., ::-1, :]
    return data


def draw_flips(rng: np.random.Generator) -> tuple[bool, bool]:
    u = rng.random(2)
    return bool(u[0] < 0.5), bool(u[1] < 0.5)


def augment_flip(patch: RasterPatch, rng: np.random.Generator) -> RasterPatch:
    h, v = draw_flips(rng)
    return patch._with(flip_array(patch.data, h, v).copy())


def env_feature_vector(env: RasterPatch, hotspot=None, env_bands: Sequence[str] = ENV_BANDS) -> FeatureVector:
    """Raw centre-pixel values of the environmental bands."""
    if hotspot is not None and getattr(hotspot, "id", hotspot) != env.hotspot_id:
        raise DataError(f"env patch {env.hotspot_id} does not belong to hotspot {hotspot}")
    r, c = env.height // 2, env.width // 2
    return FeatureVector(env.hotspot_id, np.array([env.band(b)[r, c] for b in env_bands], dtype=np.float64))
