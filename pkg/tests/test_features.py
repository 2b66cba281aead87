import numpy as np
import pytest
from hypothesis import given, strategies as st

from birdsdm.errors import DataError, MissingInputError
from birdsdm.features import (ENV_BANDS, IMAGE_BANDS, LANDCOVER_BAND, NormalizationStats, RasterPatch, augment_flip,
                              center_crop, compute_band_stats, denormalize, env_feature_vector, flip_array,
                              normalize, one_hot_landcover, read_band_manifest, read_patch, resample_nearest,
                              stack_channels, write_band_manifest, write_patch)


def patch(data, bands=None, hid="H"):
    data = np.asarray(data, dtype=np.float64)
    return RasterPatch(hid, bands or tuple(f"b{i}" for i in range(len(data))), data)


def test_center_crop_offsets():
    data = np.arange(2 * 128 * 128).reshape(2, 128, 128)
    out = center_crop(patch(data), 64)
    np.testing.assert_array_equal(out.data, data[:, 32:96, 32:96])
    same = np.arange(64 * 64).reshape(1, 64, 64)
    np.testing.assert_array_equal(center_crop(patch(same), 64).data, same)


def test_center_crop_odd_size_index_oracle():
    data = np.arange(65 * 65).reshape(1, 65, 65)
    out = center_crop(patch(data), 64)
    want = np.array([[data[0, r, c] for c in range(64)] for r in range(64)])
    np.testing.assert_array_equal(out.data[0], want)
    with pytest.raises(DataError):
        center_crop(patch(data), 66)


def test_band_stats_simple():
    s = compute_band_stats([patch([[[0.0, 2.0]]])])
    assert s.mean[0] == 1.0 and s.std[0] == 1.0


def test_band_stats_match_two_pass(rng):
    patches = [patch(rng.normal(i, 1 + i, (3, 5, 4)), hid=f"H{i}") for i in range(10)]
    s = compute_band_stats(patches)
    pix = np.concatenate([p.data.reshape(3, -1) for p in patches], axis=1)
    mean = pix.sum(axis=1) / pix.shape[1]
    std = np.sqrt(((pix - mean[:, None]) ** 2).sum(axis=1) / pix.shape[1])
    np.testing.assert_allclose(s.mean, mean, rtol=1e-12)
    np.testing.assert_allclose(s.std, std, rtol=1e-12)


def test_band_stats_ignore_non_train(rng):
    patches = [patch(rng.random((2, 3, 3)), hid=f"H{i}") for i in range(4)]
    split_of = {"H0": "train", "H1": "train", "H2": "val", "H3": "test"}
    a = compute_band_stats(patches, split_of)
    b = compute_band_stats(patches + [patch(rng.random((2, 3, 3)) * 100, hid="H9")], {**split_of, "H9": "test"})
    np.testing.assert_array_equal(a.mean, b.mean)
    np.testing.assert_array_equal(a.std, b.std)


def test_normalize_examples(rng):
    stats = NormalizationStats(("b0",), np.array([100.0]), np.array([50.0]))
    assert normalize(patch([[[150.0]]]), stats).data[0, 0, 0] == 1.0
    p = patch(rng.normal(3, 2, (1, 4, 4)))
    np.testing.assert_allclose(normalize(denormalize(p, stats), stats).data, p.data, atol=1e-6)


def test_constant_band_is_centered_only():
    p = patch(np.full((1, 3, 3), 7.0))
    stats = compute_band_stats([p])
    assert stats.std[0] == 0.0
    np.testing.assert_array_equal(normalize(p, stats).data, 0.0)


def test_post_normalization_mean_is_zero(rng):
    patches = [patch(rng.normal(50, 10, (4, 6, 6)), hid=f"H{i}") for i in range(8)]
    stats = compute_band_stats(patches)
    again = compute_band_stats([normalize(p, stats) for p in patches])
    np.testing.assert_allclose(again.mean, 0.0, atol=1e-3)
    np.testing.assert_allclose(again.std, 1.0, atol=1e-3)


def env_patch(rng, size=4, hid="H"):
    return RasterPatch(hid, ENV_BANDS, rng.normal(size=(len(ENV_BANDS), size, size)))


def test_channel_counts(rng):
    img = RasterPatch("H", IMAGE_BANDS, rng.random((4, 8, 8)))
    lc = RasterPatch("H", (LANDCOVER_BAND,), rng.integers(0, 10, (1, 2, 2)).astype(float))
    assert stack_channels(img).data.shape[0] == 4
    assert stack_channels(img, env_patch(rng)).data.shape[0] == 31
    full = stack_channels(img, env_patch(rng), lc)
    assert full.data.shape == (41, 8, 8)


def test_landcover_one_hot():
    lc = RasterPatch("H", (LANDCOVER_BAND,), np.array([[[3.0, 0.0]]]))
    oh = one_hot_landcover(lc).data
    assert oh[3, 0, 0] == 1 and oh[:, 0, 0].sum() == 1
    assert oh[0, 0, 1] == 1
    with pytest.raises(DataError):
        one_hot_landcover(RasterPatch("H", (LANDCOVER_BAND,), np.array([[[10.0]]])))


def test_resample_nearest_blocks():
    p = patch(np.array([[[1.0, 2.0], [3.0, 4.0]]]))
    out = resample_nearest(p, 4, 4).data[0]
    np.testing.assert_array_equal(out, [[1, 1, 2, 2], [1, 1, 2, 2], [3, 3, 4, 4], [3, 3, 4, 4]])
    assert resample_nearest(p, 4, 4).resolution_m == 5.0


def test_flips(rng):
    x = rng.random((2, 5, 6))
    np.testing.assert_array_equal(flip_array(flip_array(x, True, True), True, True), x)
    h = flip_array(x, True, False)
    for r in range(5):
        for c in range(6):
            assert h[:, r, 5 - c].tolist() == x[:, r, c].tolist()
    p = patch(x)
    a = augment_flip(p, np.random.default_rng(9)).data
    b = augment_flip(p, np.random.default_rng(9)).data
    np.testing.assert_array_equal(a, b)


@given(st.booleans(), st.booleans())
def test_flip_involution(h, v):
    x = np.arange(2 * 3 * 4).reshape(2, 3, 4)
    np.testing.assert_array_equal(flip_array(flip_array(x, h, v), h, v), x)


def test_env_feature_vector(rng):
    const = RasterPatch("H", ENV_BANDS, np.full((len(ENV_BANDS), 3, 3), 7.0))
    fv = env_feature_vector(const)
    assert fv.values.shape == (27,) and np.all(fv.values == 7.0)
    for h, w in [(5, 5), (4, 6), (7, 2)]:
        data = rng.normal(size=(len(ENV_BANDS), h, w))
        got = env_feature_vector(RasterPatch("H", ENV_BANDS, data)).values
        np.testing.assert_array_equal(got, data[:, h // 2, w // 2])


def test_patch_round_trip(tmp_path, rng):
    p = RasterPatch("H7", IMAGE_BANDS, rng.random((4, 5, 3)).astype(np.float32), 10.0)
    write_patch(tmp_path / "p.sdmp", p)
    back = read_patch(tmp_path / "p.sdmp")
    assert back.bands == p.bands and back.hotspot_id == "H7" and back.resolution_m == 10.0
    np.testing.assert_array_equal(back.data, p.data)
    with pytest.raises(MissingInputError):
        read_patch(tmp_path / "nope.sdmp")
    raw = (tmp_path / "p.sdmp").read_bytes()
    (tmp_path / "cut.sdmp").write_bytes(raw[:-1])
    with pytest.raises(DataError):
        read_patch(tmp_path / "cut.sdmp")


def test_band_manifest_and_stats_json(tmp_path):
    write_band_manifest(tmp_path / "bands.json")
    m = read_band_manifest(tmp_path / "bands.json")
    assert m["image"] == IMAGE_BANDS and m["env"] == ENV_BANDS
    s = NormalizationStats(("a", "b"), np.array([0.1, 2.0]), np.array([1.0 / 3, 0.0]))
    back = NormalizationStats.from_json(s.to_json())
    np.testing.assert_array_equal(back.mean, s.mean)
    np.testing.assert_array_equal(back.std, s.std)


def test_stack_rejects_foreign_patch(rng):
    img = RasterPatch("H1", IMAGE_BANDS, rng.random((4, 4, 4)))
    with pytest.raises(DataError):
        stack_channels(img, env_patch(rng, hid="H2"))
