import filecmp

import numpy as np
import pytest

from birdsdm.checklists import compute_encounter_rates
from birdsdm.errors import DataError
from birdsdm.synthetic import Archetype, SyntheticWorldSpec, generate_synthetic_world, generate_world


def test_archetype_affinities_show_up_in_rates():
    arch = [Archetype([0.1, 0.1, 0.1, 0.1], [0.9, 0.1]), Archetype([0.4, 0.4, 0.4, 0.4], [0.2, 0.8])]
    w = generate_world(SyntheticWorldSpec(n_hotspots=80, n_species=2, min_checklists=20, max_checklists=30,
                                          archetypes=arch, range_fraction=0.0, seed=2))
    t = compute_encounter_rates(w.checklists, w.hotspots, w.species)
    g0, g1 = t.rates[w.archetype_of == 0], t.rates[w.archetype_of == 1]
    for s in range(2):
        a, b = g0[:, s], g1[:, s]
        se = np.sqrt(a.var(ddof=1) / len(a) + b.var(ddof=1) / len(b))
        assert abs(a.mean() - b.mean()) > 5 * se
    assert g0[:, 0].mean() == pytest.approx(0.9, abs=0.05)


def test_same_seed_byte_identical(tmp_path):
    spec = SyntheticWorldSpec(n_hotspots=20, n_species=5, seed=9)
    a = generate_synthetic_world(spec, tmp_path / "a")
    b = generate_synthetic_world(spec, tmp_path / "b")
    for key in ("checklists", "species", "rangemaps", "world"):
        assert filecmp.cmp(a[key], b[key], shallow=False)
    cmp = filecmp.dircmp(a["patches"], b["patches"])
    assert not cmp.diff_files and not cmp.left_only and not cmp.right_only
    for name in cmp.common_files:
        assert filecmp.cmp(a["patches"] / name, b["patches"] / name, shallow=False)


def test_invalid_specs():
    with pytest.raises(DataError):
        SyntheticWorldSpec(n_hotspots=0)
    with pytest.raises(DataError):
        SyntheticWorldSpec(n_species=2, archetypes=[Archetype([0.1] * 4, [0.5, 1.5])])


def test_vagrants_only_when_allowed():
    w = generate_world(SyntheticWorldSpec(n_hotspots=60, n_species=10, range_fraction=1.0, seed=1))
    region = {h.id: h.region_id for h in w.hotspots}
    for c in w.checklists:
        for s in c.species_reported:
            m = w.range_maps[s]
            assert not m.available or region[c.hotspot_id] in m.allowed_regions
