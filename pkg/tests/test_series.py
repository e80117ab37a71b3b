from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gridbenefit import io as gio
from gridbenefit.series import (
    CountrySeries,
    MismatchSeries,
    SynthConfig,
    aggregate,
    detrend,
    mean_residual_by_mix,
    mismatch,
    mix_grid,
    optimal_mix,
    quantiles,
    residual_excess,
    synth_generate,
)

from oracles import sorted_index_quantile

positive = arrays(np.float64, st.integers(2, 48), elements=st.floats(0.1, 100.0))


def _series_from(load, wind, solar, node="X"):
    return CountrySeries(node, np.asarray(load, float), np.asarray(wind, float), np.asarray(solar, float))


def test_mismatch_examples():
    const = _series_from(np.full(5, 10.0), np.full(5, 3.0), np.full(5, 1.0))
    np.testing.assert_allclose(mismatch(const, 1.0, 1.0).delta, 0.0, atol=1e-12)
    np.testing.assert_allclose(mismatch(const, 1.5, 1.0).delta, 5.0)
    toy = _series_from([1.0, 1.0], [2.0, 0.0], [1.0, 1.0])
    np.testing.assert_allclose(mismatch(toy, 1.0, 1.0).delta, [1.0, -1.0])
    with pytest.raises(ValueError):
        mismatch(toy, 1.0, 1.2)


def test_country_series_validation():
    with pytest.raises(ValueError):
        _series_from([1.0, 1.0], [0.0, 0.0], [1.0, 1.0])  # zero-mean wind
    with pytest.raises(ValueError):
        _series_from([1.0, 0.0], [1.0, 1.0], [1.0, 1.0])
    with pytest.raises(ValueError):
        _series_from([1.0, 1.0], [1.0], [1.0, 1.0])
    with pytest.raises(ValueError):
        _series_from([1.0, 1.0], [1.0, -1.0], [1.0, 1.0])


def test_residual_excess_examples():
    r, e = residual_excess(MismatchSeries("X", [1.0, -1.0]))
    np.testing.assert_array_equal(r, [0.0, 1.0])
    np.testing.assert_array_equal(e, [1.0, 0.0])
    r, e = residual_excess(MismatchSeries("X", np.zeros(3)))
    assert not r.any() and not e.any()


@settings(max_examples=50, deadline=None)
@given(st.data())
def test_mismatch_properties(data):
    load = data.draw(positive)
    n = load.size
    wind = data.draw(arrays(np.float64, n, elements=st.floats(0.0, 5.0)).filter(lambda a: a.mean() > 1e-3))
    solar = data.draw(arrays(np.float64, n, elements=st.floats(0.0, 5.0)).filter(lambda a: a.mean() > 1e-3))
    a = data.draw(st.floats(0.0, 1.0))
    cs = _series_from(load, wind, solar)
    d = mismatch(cs, 1.0, a).delta
    # normalisation makes the mean mismatch vanish at gamma = 1
    assert abs(d.mean()) <= 1e-9 * load.mean()
    r, e = residual_excess(MismatchSeries("X", d))
    assert np.all(r * e == 0)
    assert r.mean() - e.mean() == pytest.approx(-d.mean(), abs=1e-9 * load.mean())
    # affine in the wind share
    d1, d0 = mismatch(cs, 1.0, 1.0).delta, mismatch(cs, 1.0, 0.0).delta
    np.testing.assert_allclose(d, a * d1 + (1 - a) * d0, atol=1e-9 * load.max())


def test_mix_grid_values():
    g = mix_grid(0.01)
    assert g.size == 101 and g[0] == 0.0 and g[-1] == 1.0
    assert g[82] == 0.82
    with pytest.raises(ValueError):
        mix_grid(0.3)


def test_optimal_mix_perfect_wind():
    rng = np.random.default_rng(3)
    load = 10 + rng.random(200)
    res = optimal_mix(_series_from(load, 2.0 * load, rng.random(200) + 0.01))
    assert res.alpha_star == 1.0
    assert res.residual_mean == pytest.approx(0.0, abs=1e-12)


def test_optimal_mix_perfect_solar():
    rng = np.random.default_rng(4)
    load = 10 + rng.random(200)
    res = optimal_mix(_series_from(load, rng.random(200) + 0.01, 3.0 * load))
    assert res.alpha_star == 0.0


def test_optimal_mix_degenerate_ties_go_low():
    load = np.linspace(5, 6, 50)
    res = optimal_mix(_series_from(load, load, load))
    assert (res.alpha_star, res.band_low, res.band_high) == (0.0, 0.0, 1.0)


def test_optimal_mix_matches_brute_force_rescan():
    cfg = gio.default_synth_config(seed=42)
    for cs in synth_generate(cfg, 8760)[:5]:
        res = optimal_mix(cs)
        best_a, best_v = None, np.inf
        for k in range(101):
            a = k / 100
            delta = a * mismatch(cs, 1.0, 1.0).delta + (1 - a) * mismatch(cs, 1.0, 0.0).delta
            v = float(np.mean(np.where(delta < 0, -delta, 0.0)))
            if v < best_v:
                best_a, best_v = a, v
        assert res.alpha_star == best_a
        assert res.residual_mean == pytest.approx(best_v, rel=1e-12)
        assert res.band_low <= res.alpha_star <= res.band_high
        values = mean_residual_by_mix(cs, 1.0, mix_grid())
        assert np.all(res.residual_mean <= values)


def test_aggregate_equals_sum_of_countries():
    cfg = gio.default_synth_config(seed=5)
    series = synth_generate(cfg, 500)
    eu = aggregate(series)
    for a in (0.0, 0.35, 1.0):
        summed = np.sum([mismatch(cs, 1.0, a).delta for cs in series], axis=0)
        np.testing.assert_allclose(mismatch(eu, 1.0, a).delta, summed, rtol=1e-10, atol=1e-8)


def test_detrend_examples():
    load = np.arange(1.0, 11.0)
    np.testing.assert_array_equal(detrend(load, [10]), load)
    two = np.concatenate([np.full(4, 100.0), np.full(4, 102.0)])
    out = detrend(two, [4, 4])
    np.testing.assert_allclose(out[:4], 102.0)
    with pytest.raises(ValueError):
        detrend(two, [8, 0])
    with pytest.raises(ValueError):
        detrend(two, [3, 4])


def test_detrend_removes_constructed_drift():
    rng = np.random.default_rng(11)
    years = [8760, 8784] * 4
    shape = 1 + 0.2 * rng.random(sum(years))
    drift = np.concatenate([np.full(n, 1.02**y) for y, n in enumerate(years)])
    out = detrend(50 * shape * drift, years)
    edges = np.cumsum([0] + years)
    means = [out[a:b].mean() for a, b in zip(edges[:-1], edges[1:])]
    np.testing.assert_allclose(means, means[-1], rtol=1e-9)


def test_quantile_examples():
    s = np.arange(1, 101)
    assert quantiles(s, [0.5])[0] == 50.5
    assert quantiles(s, [0.0, 1.0]).tolist() == [1.0, 100.0]
    with pytest.raises(ValueError):
        quantiles([], [0.5])
    with pytest.raises(ValueError):
        quantiles(s, [1.2])


@settings(max_examples=80, deadline=None)
@given(
    st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=80),
    st.lists(st.floats(0, 1), min_size=1, max_size=5),
    st.randoms(use_true_random=False),
)
def test_quantiles_match_sort_and_index_oracle(values, qs, rnd):
    got = quantiles(values, qs)
    for g, q in zip(got, qs):
        assert g == pytest.approx(sorted_index_quantile(values, q), rel=1e-12, abs=1e-9)
    shuffled = list(values)
    rnd.shuffle(shuffled)
    np.testing.assert_array_equal(quantiles(shuffled, qs), got)
    srt = np.sort(qs)
    assert np.all(np.diff(quantiles(values, srt)) >= 0)


def test_synth_deterministic_and_valid(europe):
    cfg = gio.default_synth_config(seed=1, topo=europe)
    a = synth_generate(cfg, 8760)
    b = synth_generate(cfg, 8760)
    assert len(a) == 27
    for x, y in zip(a, b):
        assert x.node == y.node
        for field in ("load", "wind_raw", "solar_raw"):
            np.testing.assert_array_equal(getattr(x, field), getattr(y, field))
        night = (np.arange(8760) % 24 < cfg.sunrise) | (np.arange(8760) % 24 >= cfg.sunset)
        assert not x.solar_raw[night].any()
        assert np.all(x.load > 0)
    other = synth_generate(gio.default_synth_config(seed=2, topo=europe), 48)
    assert not np.array_equal(other[0].wind_raw, a[0].wind_raw[:48])


def test_synth_without_noise_is_periodic():
    cfg = SynthConfig(
        seed=3, nodes=("A", "B"), mean_loads=(10.0, 20.0), neighbours=(("A", "B"),),
        load_noise=0.0, wind_noise=0.0, solar_noise=0.0,
        load_seasonal=0.0, wind_seasonal=0.0, solar_seasonal=0.0,
    )
    for cs in synth_generate(cfg, 24 * 20):
        day = cs.load[:24]
        np.testing.assert_allclose(cs.load.reshape(20, 24), np.tile(day, (20, 1)))
        np.testing.assert_allclose(cs.solar_raw.reshape(20, 24), np.tile(cs.solar_raw[:24], (20, 1)))
        np.testing.assert_allclose(cs.wind_raw, cs.wind_raw[0])


@pytest.mark.parametrize(
    "kw",
    [{"wind_noise": -0.1}, {"load_seasonal": 0.6, "load_diurnal": 0.5}, {"persistence": 1.0}, {"sunrise": 20, "sunset": 6}],
)
def test_synth_config_rejects_bad_values(kw):
    with pytest.raises(ValueError):
        SynthConfig(nodes=("A",), mean_loads=(1.0,), **kw)


def test_synth_needs_a_day():
    with pytest.raises(ValueError):
        synth_generate(SynthConfig(nodes=("A",), mean_loads=(1.0,)), 10)
