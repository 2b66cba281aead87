from collections import Counter

import numpy as np
import pytest
from hypothesis import given, strategies as st

from birdsdm.checklists import Checklist, Hotspot, RangeMap
from birdsdm.errors import DataError
from birdsdm.masking import (SoftMaskFactors, apply_soft_mask, compute_soft_mask_factors, hard_mask, read_factors,
                             write_factors)

H = [Hotspot("H1", 0, 0, "R1"), Hotspot("H2", 0, 0, "R2")]


def test_hard_mask_examples():
    p = np.full((2, 2), 0.3)
    maps = [RangeMap(0, frozenset({"R1"}), True), RangeMap(1)]
    out = hard_mask(p, H, maps)
    np.testing.assert_array_equal(out, [[0.3, 0.3], [0.0, 0.3]])
    np.testing.assert_array_equal(hard_mask(out, H, maps), out)


@given(st.integers(0, 2**31))
def test_hard_mask_idempotent_and_never_increases(seed):
    r = np.random.default_rng(seed)
    hs = [Hotspot(f"H{i}", 0, 0, f"R{r.integers(3)}") for i in range(6)]
    maps = [RangeMap(s, frozenset(f"R{j}" for j in range(3) if r.random() < 0.5), True) if r.random() < 0.6
            else RangeMap(s) for s in range(5)]
    p = r.random((6, 5))
    once = hard_mask(p, hs, maps)
    np.testing.assert_array_equal(hard_mask(once, hs, maps), once)
    assert np.all(once <= p)


def lists_for(hid, n, k, s=0):
    return [Checklist(hid, frozenset({s}) if i < k else frozenset()) for i in range(n)]


def test_factor_formula():
    hs = [Hotspot("A", 0, 0, "R"), Hotspot("B", 0, 0, "Q")]
    lists = lists_for("A", 10, 4) + lists_for("B", 90, 6)
    f = compute_soft_mask_factors(lists, hs, 1)
    assert f.row("R", 1)[0] == pytest.approx(4.0, abs=1e-15)
    assert f.global_count == 100


def test_equal_prevalence_is_neutral():
    hs = [Hotspot("A", 0, 0, "R"), Hotspot("B", 0, 0, "Q")]
    f = compute_soft_mask_factors(lists_for("A", 10, 3) + lists_for("B", 20, 6), hs, 1)
    np.testing.assert_array_equal(f.factors, 1.0)


def tally_oracle(lists, region_of, n_species, regions):
    per_region = Counter(region_of[c.hotspot_id] for c in lists)
    out = np.ones((len(regions), n_species))
    for i, R in enumerate(regions):
        for s in range(n_species):
            glob = sum(s in c.species_reported for c in lists) / len(lists)
            if glob == 0:
                out[i, s] = 0.0
            elif per_region[R]:
                reg = sum(s in c.species_reported for c in lists if region_of[c.hotspot_id] == R) / per_region[R]
                out[i, s] = reg / glob
    return out


@given(st.integers(0, 2**31))
def test_factors_match_tally_oracle(seed):
    r = np.random.default_rng(seed)
    hs = [Hotspot(f"H{i}", 0, 0, f"R{r.integers(4)}") for i in range(8)]
    lists = [Checklist(f"H{r.integers(8)}", frozenset(np.flatnonzero(r.random(5) < 0.3).tolist())) for _ in range(60)]
    regions = sorted({h.region_id for h in hs} | {"Rx"})
    f = compute_soft_mask_factors(lists, hs, 5, regions)
    oracle = tally_oracle(lists, {h.id: h.region_id for h in hs}, 5, regions)
    np.testing.assert_allclose(f.factors, oracle, rtol=1e-15, atol=0)


def test_apply_soft_mask_examples():
    f = SoftMaskFactors(("R1", "R2"), np.array([[2.0, 1.0], [0.0, 1.0]]), np.array([1, 1]), 2)
    out = apply_soft_mask(np.array([[0.6, 0.3], [0.9, 0.3]]), f, H)
    np.testing.assert_array_equal(out, [[1.0, 0.3], [0.0, 0.3]])
    unknown = [Hotspot("H3", 0, 0, "R9")]
    np.testing.assert_array_equal(apply_soft_mask([[0.2, 0.4]], f, unknown), [[0.2, 0.4]])


@given(st.integers(0, 2**31))
def test_soft_mask_bounded(seed):
    r = np.random.default_rng(seed)
    f = SoftMaskFactors(("R1", "R2"), r.uniform(0, 5, (2, 3)), np.array([1, 1]), 2)
    out = apply_soft_mask(r.random((2, 3)), f, H)
    assert out.min() >= 0 and out.max() <= 1


def test_factors_file_round_trip(tmp_path):
    f = SoftMaskFactors(("R1", "R2"), np.array([[1 / 3, 4.0], [0.0, 1.0]]), np.array([3, 4]), 7)
    write_factors(tmp_path / "f.csv", f, ["a", "b"])
    back = read_factors(tmp_path / "f.csv", ["a", "b"])
    assert back.regions == f.regions
    np.testing.assert_array_equal(back.factors, f.factors)


def test_empty_training_set():
    with pytest.raises(DataError):
        compute_soft_mask_factors([], H, 2)
