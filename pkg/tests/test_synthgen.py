import filecmp
from dataclasses import replace

import numpy as np
import pytest

from conftest import SMALL_CITY
from oracles import local_minima
from tdaccess.network import LATTICE_HI, LATTICE_LO, SpeedProfile
from tdaccess.pipeline import run_pipeline
from tdaccess.synthgen import Dip, SynthSpec, generate, generate_tables, write_scenario


def test_zero_depth_city_is_free_flow():
    spec = SynthSpec(rings=3, radials=6, morning=Dip(0.0, 480, 60), afternoon=Dip(0.0, 1050, 90))
    tables = generate_tables(spec)
    assert all(np.all(v == 1.0) for v in tables.profiles.values())


@pytest.mark.parametrize(
    "kwargs",
    [dict(rings=0), dict(radials=2), dict(ring_spacing_km=0.0), dict(asymmetry=1.5), dict(downtown=(1000.0, 0.0))],
)
def test_degenerate_spec_rejected(kwargs):
    with pytest.raises(ValueError):
        SynthSpec(**kwargs)


@pytest.mark.parametrize("depth,width", [(1.0, 60.0), (-0.1, 60.0), (0.5, 0.0)])
def test_dip_validation(depth, width):
    with pytest.raises(ValueError):
        Dip(depth, 480.0, width)


def test_dip_half_width_is_half_depth():
    d = Dip(0.4, 480.0, 60.0)
    assert d.shape(np.array([480.0]))[0] == 1.0
    assert d.shape(np.array([540.0]))[0] == pytest.approx(0.5)
    assert d.shape(np.array([0.0]))[0] == 0.0


def test_profiles_are_valid_before_repair():
    tables = generate_tables(SynthSpec())
    for pid, values in tables.profiles.items():
        SpeedProfile(pid, values)


@pytest.mark.slow
def test_default_city_repairs_at_most_one_percent(tmp_path):
    net = generate(SynthSpec(), tmp_path).network
    changed = sum(r.points_changed for r in net.repair_report)
    assert changed <= 0.01 * len(net.links) * (LATTICE_HI - LATTICE_LO + 1)


def test_generation_is_bit_identical(tmp_path):
    a = write_scenario(generate_tables(SMALL_CITY), tmp_path / "a")
    b = write_scenario(generate_tables(SMALL_CITY), tmp_path / "b")
    names = sorted(p.name for p in a.parent.iterdir())
    match, mismatch, errors = filecmp.cmpfiles(a.parent, b.parent, names, shallow=False)
    assert not mismatch and not errors and len(match) == 7


def test_seed_changes_population_only():
    a = generate_tables(SynthSpec(rings=3, radials=6, seed=0))
    b = generate_tables(SynthSpec(rings=3, radials=6, seed=1))
    assert a.links == b.links and a.nodes == b.nodes
    assert a.population != b.population


def test_generated_scenario_loads(small_city):
    net = small_city.network
    spec = SMALL_CITY
    assert len(net.nodes) == 1 + spec.rings * spec.radials
    # each radial segment is two oneway links, each ring segment one two-way row
    assert len(net.links) == spec.rings * spec.radials * 4
    assert small_city.downtown == spec.downtown
    assert small_city.study_zones


def test_outer_links_congest_more_than_inner():
    tables = generate_tables(SynthSpec())
    assert tables.profiles["in30"].min() < tables.profiles["in1"].min()
    # inbound dips in the morning, outbound in the afternoon
    t = np.arange(270, 1281, 5)
    assert t[np.argmin(tables.profiles["in10"])] < 720 < t[np.argmin(tables.profiles["out10"])]


def test_small_city_has_two_minima(small_run):
    windows = ((300.0, 720.0), (720.0, 1320.0))
    minima = local_minima(small_run.global_profile.relative, small_run.departures, windows)
    assert len(minima) == 2
    assert 300 <= minima[0] < 720 <= minima[1] < 1320


def test_doubling_population_doubles_accessibility(tmp_path):
    spec = SynthSpec(rings=3, radials=6, ring_spacing_km=2.0)
    base = run_pipeline(generate(spec, tmp_path / "one"), workers=1)
    doubled = run_pipeline(generate(replace(spec, core_population=2 * spec.core_population), tmp_path / "two"))
    np.testing.assert_allclose(doubled.series, 2 * base.series, rtol=1e-12)
    np.testing.assert_allclose(doubled.global_profile.relative, base.global_profile.relative, rtol=1e-12)
