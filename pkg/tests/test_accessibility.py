import math
from decimal import Decimal

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tdaccess.accessibility import (
    AccessibilitySeries,
    DecayParams,
    ZoneMetrics,
    accessibility_from_costs,
    cumulative_population_curve,
    decay,
    detect_peaks,
    global_metrics,
    global_profile,
    peak_gap,
    relative,
    zone_accessibility,
    zone_metrics,
    zone_summary,
)
from tdaccess.routing import CostTensor, departure_schedule
from tdaccess.zoning import Zone, build_grid

DEPS = departure_schedule()
costs_st = st.one_of(st.floats(0.0, 300.0), st.just(math.inf))


def hhmm(h, m=0):
    return 60 * h + m


def profile_with(median=None, mean=None, maximum=None):
    """96 values with the requested maximum and either mean or median.

    One value is the maximum, 49 sit at the median level and the remaining 46 at
    the level that yields the requested mean.
    """
    if mean is not None and median is not None:
        x = (96 * mean - maximum - 49 * median) / 46
        assert median < x < maximum
        v = np.r_[maximum, np.full(49, median), np.full(46, x)]
    elif mean is not None:
        x = (96 * mean - maximum) / 95
        v = np.r_[maximum, np.full(95, x)]
    else:
        # sorted, positions 47 and 48 hold the median
        v = np.r_[maximum, np.full(46, median * 1.05), [median, median], np.full(47, median * 0.9)]
    return v


# -- decay -------------------------------------------------------------------------


def test_decay_spot_values():
    assert decay(0.0) == 1.0
    # exp(-0.975) = 0.3771924 when evaluated in 30-digit decimal arithmetic
    assert decay(15.0, DecayParams(0.065)) == pytest.approx(float(Decimal("-0.975").exp()), abs=1e-12)
    assert decay(math.inf) == 0.0


def test_decay_rejects_negative_cost_and_beta():
    with pytest.raises(ValueError):
        decay(-1.0)
    with pytest.raises(ValueError):
        DecayParams(0.0)
    with pytest.raises(ValueError):
        accessibility_from_costs(np.array([-1.0]), np.array([1.0]))


@given(st.floats(0.0, 200.0), st.floats(0.0, 200.0))
def test_decay_multiplicative_and_decreasing(a, b):
    assert decay(a + b) == pytest.approx(decay(a) * decay(b), rel=1e-12, abs=1e-300)
    if a < b:
        assert decay(a) >= decay(b)
        # strictly smaller once the gap survives rounding
        if b - a > 1e-9 * max(1.0, b):
            assert decay(a) > decay(b) or decay(b) == 0.0


# -- zone accessibility --------------------------------------------------------------


def test_single_zone_self_term():
    assert accessibility_from_costs(np.array([0.0]), np.array([100.0])) == 100.0


def test_two_zone_example():
    a = accessibility_from_costs(np.array([0.0, 10.0]), np.array([100.0, 200.0]))
    assert a == pytest.approx(float(100 + 200 * Decimal("-0.65").exp()), abs=1e-10)
    assert round(float(a), 4) == 204.4092


def test_zone_accessibility_reads_tensor():
    costs = np.array([[[0.0, 0.0], [10.0, math.inf]], [[10.0, 10.0], [0.0, 0.0]]])
    tensor = CostTensor(costs, ("a", "b"), ("a", "b"), np.array([0.0, 15.0]))
    assert zone_accessibility(0, 0, tensor, [100, 200]) == pytest.approx(204.4092, abs=5e-5)
    assert zone_accessibility(0, 1, tensor, [100, 200]) == 100.0
    vec = accessibility_from_costs(costs[0], np.array([100.0, 200.0]))
    assert vec[0] == pytest.approx(zone_accessibility(0, 0, tensor, [100, 200]), rel=1e-15)


@given(arrays(np.float64, 6, elements=costs_st), arrays(np.float64, 6, elements=st.floats(0.0, 1e5)))
def test_accessibility_bounds(costs, pops):
    costs[0] = 0.0
    a = float(accessibility_from_costs(costs, pops))
    assert 0.0 <= a <= pops.sum() * (1 + 1e-12)
    # a populated destination with a cost large enough to survive rounding
    if np.any((pops[1:] > 0) & (costs[1:] > 1e-9)):
        assert a < pops.sum()


@given(
    arrays(np.float64, 6, elements=costs_st),
    arrays(np.float64, 6, elements=st.floats(0.0, 50.0)),
    arrays(np.float64, 6, elements=st.floats(0.0, 1e5)),
)
def test_accessibility_monotone_in_costs(costs, extra, pops):
    assert accessibility_from_costs(costs + extra, pops) <= accessibility_from_costs(costs, pops)


# -- global profile ----------------------------------------------------------------


def test_global_profile_examples():
    assert global_profile([[10.0], [20.0]], [1, 3]).values[0] == 17.5
    assert global_profile([[10.0, 4.0], [20.0, 8.0]], [1, 1]).values.tolist() == [15.0, 6.0]
    series = np.linspace(1, 2, 96)
    np.testing.assert_array_equal(global_profile([series], [7.0]).values, series)
    wrapped = [AccessibilitySeries("a", np.array([10.0])), AccessibilitySeries("b", np.array([20.0]))]
    assert global_profile(wrapped, [1, 3]).values[0] == 17.5


def test_global_profile_rejects_zero_weight():
    with pytest.raises(ValueError):
        global_profile([[1.0]], [0.0])
    with pytest.raises(ValueError):
        global_profile([[1.0], [2.0]], [1.0])


@given(
    arrays(np.float64, (5, 8), elements=st.floats(0.0, 1e6)),
    arrays(np.float64, 5, elements=st.floats(0.0, 1e4)),
)
def test_global_profile_is_convex_combination(series, weights):
    assume(weights.sum() > 1e-3)
    g = global_profile(series, weights).values
    assert np.all(g >= series.min(axis=0) * (1 - 1e-12) - 1e-9)
    assert np.all(g <= series.max(axis=0) * (1 + 1e-12) + 1e-9)


# -- global metrics ---------------------------------------------------------------------


def test_london_mean_share():
    v = profile_with(mean=1_438_593.62, maximum=1_673_785.74)
    g = global_metrics(v, DEPS)
    assert g.mean == pytest.approx(1_438_593.62, rel=1e-12)
    assert round(g.pct_mean_of_max, 2) == 85.95


def test_paris_median_share():
    v = profile_with(median=1_994_151.89, maximum=2_405_382.98)
    g = global_metrics(v, DEPS)
    assert g.median == pytest.approx(1_994_151.89, rel=1e-12)
    assert round(g.pct_median_of_max, 2) == 82.90


def test_constant_profile_reports_full_share_and_no_peaks():
    g = global_metrics(np.full(96, 5.0), DEPS)
    assert g.pct_mean_of_max == 100.0 and g.pct_median_of_max == 100.0
    assert g.morning_peak is None and g.afternoon_peak is None


def test_median_uses_middle_pair():
    v = np.r_[np.full(48, 1.0), np.full(48, 3.0)]
    assert global_metrics(v, DEPS).median == 2.0


# -- peaks ----------------------------------------------------------------------------


def dip_series(*centres, depth=0.3, width=60.0):
    v = np.ones(96)
    for c in centres:
        v -= depth * np.exp(-0.5 * ((DEPS - c) / width) ** 2)
    return v


def test_unique_minimum_found():
    v = np.ones(96)
    v[DEPS == hhmm(8)] = 0.7
    assert detect_peaks(v, DEPS)[0] == hhmm(8)


def test_tie_goes_to_earliest():
    v = np.ones(96)
    v[DEPS == hhmm(17)] = 0.7
    v[DEPS == hhmm(17, 15)] = 0.7
    assert detect_peaks(v, DEPS)[1] == hhmm(17)


def test_two_dip_series():
    assert detect_peaks(dip_series(hhmm(8), hhmm(17)), DEPS) == (hhmm(8), hhmm(17))


def test_peaks_respect_configured_windows():
    v = dip_series(hhmm(8), hhmm(17))
    assert detect_peaks(v, DEPS, ((hhmm(9), hhmm(12)), (hhmm(12), hhmm(16)))) == (hhmm(9), hhmm(15, 45))


# -- peak gap --------------------------------------------------------------------------


def test_peak_gap_examples():
    assert peak_gap(0.8, 0.7) == pytest.approx(1 / 3, abs=1e-12)
    assert round(peak_gap(0.7, 0.8), 4) == 0.3333
    assert peak_gap(0.6, 0.6) == 0.0
    assert peak_gap(1.0, 0.5) == 1.0
    assert peak_gap(1.0, 1.0) == 0.0


def test_peak_gap_rejects_bad_ratio():
    with pytest.raises(ValueError):
        peak_gap(0.0, 0.5)


ratio = st.floats(0.01, 1.0)


@given(ratio, ratio)
def test_peak_gap_range_and_zero_iff_equal(a, b):
    g = peak_gap(a, b)
    assert 0.0 <= g <= 1.0
    assert (g == 0.0) == (a == b)
    assert g == peak_gap(b, a)


# -- zone metrics ------------------------------------------------------------------------


def test_freeflow_zone_metrics():
    m = zone_metrics(AccessibilitySeries("z", np.full(96, 42.0)), DEPS, 42.0)
    assert m.morning_ratio == m.afternoon_ratio == 1.0
    assert m.peak_gap == 0.0
    assert m.worst_instant is None and not m.worst_is_morning
    assert m.morning_peak_instant is None and m.afternoon_peak_instant is None


def test_worst_morning_zone():
    v = np.full(96, 100.0)
    v[DEPS == hhmm(8)] = 65.0
    v[DEPS == hhmm(17)] = 80.0
    m = zone_metrics(AccessibilitySeries("z", v), DEPS, 100.0, cluster_label="P1")
    assert m.worst_instant == hhmm(8) and m.worst_is_morning
    assert m.morning_ratio == 0.65 and m.afternoon_ratio == 0.8
    assert m.peak_gap == pytest.approx(0.15 / 0.35)
    assert (m.morning_peak_instant, m.afternoon_peak_instant) == (hhmm(8), hhmm(17))
    assert m.cluster_label == "P1"


def test_zone_summary_shares():
    def metric(ff, worst):
        return ZoneMetrics("z", ff, None, None, 1.0, 1.0, worst, worst is not None and worst < 720, 0.0)

    s = zone_summary([metric(100.0, 480.0), metric(90.0, 1020.0), metric(50.0, 495.0), metric(10.0, None)])
    assert s.max_cell_freeflow == 100.0
    assert s.pct_cells_above_80pct_of_max == 50.0
    assert s.pct_worst_morning == pytest.approx(200 / 3)
    assert s.pct_worst_afternoon == pytest.approx(100 / 3)


@given(arrays(np.float64, 96, elements=st.floats(1.0, 1e6)))
def test_relative_profile_max_is_one(values):
    r = relative(values)
    assert r.max() == 1.0 and np.all(r > 0)


# -- cumulative population curve -----------------------------------------------------------


def test_curve_single_zone_at_downtown():
    z = Zone("z", 0, 0, 1000.0, 1000.0, 100)
    rows = cumulative_population_curve([z], (1000.0, 1000.0))
    assert rows[0].cumulative_population == 100
    assert rows[0].net_density == 25.0


def test_curve_two_rings_by_hand():
    # downtown on a grid corner: 4 centroids at 1.41 km, 8 at 3.16 km, 4 at 4.24 km
    raster = []
    for i in range(-2, 2):
        for j in range(-2, 2):
            r = max(abs(i + 0.5), abs(j + 0.5))
            raster.append((2000 * i, 2000 * j, 10 if r < 1 else 1))
    zones = build_grid((-4000, -4000, 4000, 4000), raster)
    rows = cumulative_population_curve(zones, (0.0, 0.0), 2.0)
    assert [r.radius_km for r in rows] == [2.0, 4.0, 6.0]
    assert [r.ring_population for r in rows] == [40.0, 8.0, 4.0]
    assert [r.cumulative_population for r in rows] == [40.0, 48.0, 52.0]
    assert [r.populated_cells for r in rows] == [4, 8, 4]
    assert rows[0].net_density == pytest.approx(40 / 16)


def test_curve_uniform_density_grows_with_area():
    raster = [(x, y, 1) for x in range(-40_000, 40_000, 1000) for y in range(-40_000, 40_000, 1000)]
    zones = build_grid(None, raster)
    rows = cumulative_population_curve(zones, (0.0, 0.0), 2.0)
    for r in rows:
        if 10.0 <= r.radius_km <= 36.0:
            assert r.cumulative_population == pytest.approx(math.pi * r.radius_km**2, rel=0.06)
            assert r.net_density == 1.0


def test_curve_rejects_bad_width():
    with pytest.raises(ValueError):
        cumulative_population_curve([], (0.0, 0.0), 0.0)
    assert cumulative_population_curve([], (0.0, 0.0)) == []
