import math

import numpy as np
import pytest

from uavnav import radio
from uavnav.antenna import UlaConfig
from uavnav.envgeo import Airspace, BuildingMap, sector_layout, vec3
from uavnav.radio import (
    FadingModel,
    LinkState,
    RadioParams,
    associate_sector,
    build_top_map,
    draw_power_gain,
    eod,
    link_states,
    pathloss_db,
    save_top_map,
    sinr,
    top_estimate,
)

ULA = UlaConfig(8, 0.075, 2e9, 100.0, 65.0, 65.0)


def _link(sector_id, pathloss, gain=0.0, los=True, distance=100.0):
    return LinkState(sector_id=sector_id, gain_db=gain, pathloss_db=pathloss,
                     los=los, distance=distance)


# --- Pathloss ---------------------------------------------------------------


def test_pathloss_spot_values():
    # Frozen from independent evaluation of the two dB formulas at f_c = 2 GHz.
    assert pathloss_db(1000.0, 100.0, 2.0, los=True) == pytest.approx(
        100.02059991327963, abs=1e-9
    )
    assert pathloss_db(1000.0, 100.0, 2.0, los=False) == pytest.approx(
        116.96237209932829, abs=1e-9
    )
    assert pathloss_db(1.0, 100.0, 2.0, los=True) == pytest.approx(
        34.020599913279625, abs=1e-9
    )


def test_pathloss_matches_formula_reevaluation():
    rng = np.random.default_rng(0)
    for _ in range(100):
        d = rng.uniform(1.0, 2000.0)
        z = rng.uniform(1.0, 150.0)
        f = rng.uniform(0.5, 6.0)
        los_expect = 28.0 + 22.0 * math.log10(d) + 20.0 * math.log10(f)
        nlos_expect = (
            -17.5
            + (46.0 - 7.0 * math.log10(z)) * math.log10(d)
            + 20.0 * math.log10(40.0 * math.pi * f / 3.0)
        )
        assert pathloss_db(d, z, f, True) == pytest.approx(los_expect, abs=1e-4)
        assert pathloss_db(d, z, f, False) == pytest.approx(nlos_expect, abs=1e-4)


def test_pathloss_rejects_bad_domain():
    with pytest.raises(ValueError):
        pathloss_db(0.0, 100.0, 2.0, True)
    with pytest.raises(ValueError):
        pathloss_db(100.0, 0.0, 2.0, False)


# --- Link states and association ---------------------------------------------


def test_link_states_one_per_sector_sorted():
    positions = [vec3(250, 250, 25), vec3(750, 250, 25), vec3(250, 750, 25), vec3(750, 750, 25)]
    sectors = sector_layout(positions, 30.0, ULA)
    bmap = BuildingMap(buildings=[], seed=0)
    states = link_states(vec3(500, 500, 100), sectors, bmap)
    assert len(states) == 12
    assert [s.sector_id for s in states] == list(range(1, 13))
    assert all(s.los for s in states)


def test_associate_sector_rules():
    assert associate_sector([_link(3, 100.0)]) == 3
    assert associate_sector([_link(1, 110.0), _link(2, 100.0)]) == 2
    assert associate_sector([_link(5, 100.0), _link(2, 100.0)]) == 2
    with pytest.raises(ValueError):
        associate_sector([])


def test_associate_invariant_under_common_offset():
    rng = np.random.default_rng(1)
    for _ in range(50):
        states = [_link(i + 1, rng.uniform(80, 130)) for i in range(6)]
        base = associate_sector(states)
        offset = rng.uniform(-40, 40)
        shifted = [_link(s.sector_id, s.pathloss_db + offset) for s in states]
        assert associate_sector(shifted) == base


# --- Fading -------------------------------------------------------------------


def test_power_gain_unit_mean():
    rng = np.random.default_rng(2)
    draws = draw_power_gain(1.0, rng, size=1_000_000)
    assert 0.995 < draws.mean() < 1.005


def test_power_gain_variance_shrinks_with_shape():
    rng = np.random.default_rng(3)
    draws = draw_power_gain(10.0, rng, size=1_000_000)
    assert abs(draws.var() - 0.1) < 0.01


def test_power_gain_m1_is_exponential():
    # Nakagami-1 power gain is Exp(1): check the CDF at a few quantiles.
    rng = np.random.default_rng(4)
    draws = draw_power_gain(1.0, rng, size=500_000)
    for q in (0.5, 1.0, 2.0):
        assert np.mean(draws < q) == pytest.approx(1 - math.exp(-q), abs=5e-3)


def test_power_gain_rejects_small_shape():
    with pytest.raises(ValueError):
        draw_power_gain(0.2, np.random.default_rng(0))


# --- SINR ----------------------------------------------------------------------


def _params(tx=0.0, noise=0.0, gamma_th=0.0, L=100):
    return RadioParams(tx_power_dbm=tx, noise_dbm=noise, gamma_th_db=gamma_th,
                       num_measurements=L)


def test_sinr_single_sector_matches_snr():
    # Mean rx power equals the noise floor -> SINR exactly 1 at |h|^2 = 1.
    params = _params(tx=0.0, noise=-60.0)
    states = [_link(1, pathloss=60.0)]
    assert sinr(states, 1, np.array([1.0]), params) == pytest.approx(1.0)


def test_sinr_interference_dominated():
    params = _params(tx=0.0, noise=-100.0)
    states = [_link(1, pathloss=50.0), _link(2, pathloss=70.0)]
    # Interference sits 30 dB above noise, so SINR ~ S/I within 0.1%.
    val = sinr(states, 1, np.array([1.0, 1.0]), params)
    s = 10 ** ((0.0 - 50.0) / 10)
    i = 10 ** ((0.0 - 70.0) / 10)
    assert val == pytest.approx(s / i, rel=1e-3)


def test_sinr_scale_invariance_without_noise():
    params = _params(tx=0.0, noise=-200.0)
    states = [_link(1, pathloss=50.0), _link(2, pathloss=55.0), _link(3, pathloss=60.0)]
    gains = np.array([0.7, 1.3, 0.4])
    a = sinr(states, 1, gains, params)
    b = sinr(states, 1, 2.0 * gains, params)
    assert b == pytest.approx(a, rel=1e-9)


def test_sinr_requires_known_sector():
    with pytest.raises(ValueError):
        sinr([_link(1, 100.0)], 9, np.array([1.0]), _params())


# --- TOP / EOD ------------------------------------------------------------------


def test_top_zero_at_huge_margin():
    params = _params(tx=0.0, noise=-60.0, gamma_th=0.0, L=1000)
    fading = FadingModel(m_los=3.0, m_nlos=1.0)
    states = [_link(1, pathloss=0.0)]  # 60 dB above the noise floor
    rng = np.random.default_rng(5)
    assert top_estimate(states, 1, params, fading, rng) == 0.0


def test_top_zero_when_threshold_vanishes():
    params = RadioParams(0.0, -10.0, -300.0, 1000)
    fading = FadingModel(1.0, 1.0)
    rng = np.random.default_rng(6)
    assert top_estimate([_link(1, 30.0)], 1, params, fading, rng) == 0.0


def _rayleigh_top_closed_form(snr_db, gamma_th_db):
    return 1.0 - math.exp(-(10 ** (gamma_th_db / 10)) / (10 ** (snr_db / 10)))


def test_top_matches_rayleigh_closed_form():
    fading = FadingModel(m_los=1.0, m_nlos=1.0)
    L = 100_000
    rng = np.random.default_rng(7)
    for snr_db in (9.6, 1.6, -3.6):  # TOP near 0.1 / 0.5 / 0.9
        params = _params(tx=0.0, noise=-100.0 - snr_db, L=L)
        states = [_link(1, pathloss=100.0)]
        est = top_estimate(states, 1, params, fading, rng)
        p = _rayleigh_top_closed_form(snr_db, 0.0)
        assert abs(est - p) <= 3.0 * math.sqrt(p * (1 - p) / L)


def test_top_monotone_in_serving_power():
    # Shared seed across the five sweep points: identical fading draws, so
    # raising the serving power (interferers fixed) cannot raise the
    # outage fraction.
    fading = FadingModel(m_los=3.0, m_nlos=1.0)
    params = RadioParams(0.0, -90.0, 0.0, 100_000)
    interferers = [_link(2, pathloss=100.0), _link(3, pathloss=105.0)]
    tops = []
    for boost_db in (0.0, 2.5, 5.0, 7.5, 10.0):
        states = [_link(1, pathloss=95.0 - boost_db)] + interferers
        rng = np.random.default_rng(42)
        tops.append(top_estimate(states, 1, params, fading, rng))
    assert all(a >= b for a, b in zip(tops, tops[1:]))


def test_eod_values():
    assert eod([], 0.5) == 0.0
    assert eod([0.0] * 7, 0.5) == 0.0
    assert eod([1.0] * 10, 0.5) == pytest.approx(5.0)
    assert eod([0.2, 0.4], 0.5) == pytest.approx(0.3)
    with pytest.raises(ValueError):
        eod([1.2], 0.5)


def test_eod_additive_over_concatenation():
    rng = np.random.default_rng(8)
    a = rng.uniform(0, 1, 13)
    b = rng.uniform(0, 1, 29)
    assert eod(np.concatenate([a, b]), 0.5) == pytest.approx(eod(a, 0.5) + eod(b, 0.5))


# --- TOP map --------------------------------------------------------------------


@pytest.fixture(scope="module")
def small_world():
    airspace = Airspace(vec3(0, 0, 0), vec3(200, 200, 100))
    sectors = sector_layout([vec3(100, 100, 25)], 30.0, ULA)
    bmap = BuildingMap(buildings=[], seed=0)
    params = RadioParams(20.0, -90.0, 0.0, 50)
    fading = FadingModel(3.0, 1.0)
    return airspace, sectors, bmap, params, fading


def test_top_map_grid_and_range(small_world):
    airspace, sectors, bmap, params, fading = small_world
    tmap = build_top_map(bmap, sectors, params, fading, airspace, 50.0, 100.0, seed=3)
    assert tmap.values.shape == (4, 4)
    assert float(tmap.values.min()) >= 0.0 and float(tmap.values.max()) <= 1.0


def test_top_map_deterministic(small_world):
    airspace, sectors, bmap, params, fading = small_world
    a = build_top_map(bmap, sectors, params, fading, airspace, 100.0, 100.0, seed=9)
    b = build_top_map(bmap, sectors, params, fading, airspace, 100.0, 100.0, seed=9)
    assert np.array_equal(a.values, b.values)


def test_top_map_rejects_nondividing_resolution(small_world):
    airspace, sectors, bmap, params, fading = small_world
    with pytest.raises(ValueError):
        build_top_map(bmap, sectors, params, fading, airspace, 30.0, 100.0, seed=0)


def test_top_map_exports(tmp_path, small_world):
    airspace, sectors, bmap, params, fading = small_world
    tmap = build_top_map(bmap, sectors, params, fading, airspace, 100.0, 100.0, seed=1)
    csv_p, meta_p, pgm_p = tmp_path / "t.csv", tmp_path / "t.meta", tmp_path / "t.pgm"
    save_top_map(tmap, csv_p, meta_p, pgm_p)
    grid = np.loadtxt(csv_p, delimiter=",")
    assert grid.shape == (2, 2)
    assert np.allclose(grid, tmap.values, atol=1e-6)
    meta = meta_p.read_text()
    assert "resolution_m=100.0" in meta and "seed=1" in meta
    raw = pgm_p.read_bytes()
    assert raw.startswith(b"P5\n2 2\n255\n")
    assert len(raw) == len(b"P5\n2 2\n255\n") + 4
