import numpy as np
import pytest

from mdiqkd.channel import model_observables, sample_tallies
from mdiqkd.core import ChannelParams
from mdiqkd.decoy import build_scan_rectangle
from mdiqkd.pipeline import evaluate
from mdiqkd.scan import binary_entropy_array, key_rate_at, rate_formula, scan_minimum
from mdiqkd.stats import SecurityBudget

# enough data for a positive key at 120 km with the stock operating point
KEY_CHANNEL = ChannelParams(distance_km=120.0, n_total=1e11)


def _parts(profile, channel, eps=1e-10, exact=False):
    obs = model_observables(profile, channel)
    tallies = sample_tallies(obs, profile, channel)
    rect = build_scan_rectangle(tallies, profile, SecurityBudget(eps), exact=exact)
    return tallies, rect


def test_rate_formula_examples(profile_120):
    p1 = profile_120.pn("mu", 1)
    # no errors anywhere: leakage vanishes
    r = rate_formula(1e-3, 0.0, 1e-4, 0.0, profile_120, 1.16)
    assert float(r) == pytest.approx(profile_120.p_mu**2 * p1**2 * 1e-3, rel=1e-15)
    assert float(rate_formula(1e-3, 0.5, 1e-4, 0.01, profile_120, 1.16)) == 0.0
    assert float(rate_formula(0.0, 0.1, 1e-4, 0.0, profile_120, 1.16)) == 0.0


def test_binary_entropy_array_edges():
    np.testing.assert_array_equal(binary_entropy_array([0.0, 1.0, 0.5]), [0.0, 0.0, 1.0])


def test_minimum_below_every_grid_point(profile_120):
    tallies, rect = _parts(profile_120, KEY_CHANNEL)
    res = scan_minimum(rect, tallies, profile_120, keep_surface=True)
    assert res.r_per_pulse > 0
    assert np.all(res.r_per_pulse <= res.surface["r"])
    assert res.r_per_pulse <= profile_120.p_mu**2 * profile_120.pn("mu", 1) ** 2
    assert res.r_bps == res.r_per_pulse * 5e7
    assert rect.contains(*res.argmin)


def test_coarser_grid_is_not_lower(profile_120):
    tallies, rect = _parts(profile_120, KEY_CHANNEL)
    coarse = scan_minimum(rect, tallies, profile_120, grid=(2, 2), refine=False)
    fine = scan_minimum(rect, tallies, profile_120, grid=(16, 16), refine=False)
    assert coarse.r_per_pulse >= fine.r_per_pulse


def test_grid_convergence_with_positive_rate(profile_120):
    tallies, rect = _parts(profile_120, KEY_CHANNEL)
    r16 = scan_minimum(rect, tallies, profile_120, grid=(16, 16)).r_per_pulse
    r64 = scan_minimum(rect, tallies, profile_120, grid=(64, 64)).r_per_pulse
    assert r16 > 0
    assert abs(r16 - r64) / r64 < 0.02


def test_larger_rectangle_gives_lower_rate(profile_120):
    tallies, tight = _parts(profile_120, KEY_CHANNEL, eps=1e-10)
    _, loose = _parts(profile_120, KEY_CHANNEL, eps=1e-14)
    assert loose.h_low <= tight.h_low and loose.h_high >= tight.h_high
    r_tight = scan_minimum(tight, tallies, profile_120, refine=False).r_per_pulse
    r_loose = scan_minimum(loose, tallies, profile_120, refine=False).r_per_pulse
    assert r_loose <= r_tight


def test_degenerate_rectangle_single_evaluation(profile_120, channel_120):
    tallies, rect = _parts(profile_120, channel_120, exact=True)
    res = scan_minimum(rect, tallies, profile_120, keep_surface=True)
    assert res.surface["r"].size == 1
    assert res.r_per_pulse == float(key_rate_at(rect.h_low, rect.m_low, rect, tallies, profile_120))
    assert res.composed_failure == 0.0


def test_batched_rate_matches_scalar(profile_120):
    tallies, rect = _parts(profile_120, KEY_CHANNEL)
    hs = np.linspace(rect.h_low, rect.h_high, 4)
    ms = np.linspace(rect.m_low, rect.m_high, 3)
    H, M = np.meshgrid(hs, ms, indexing="ij")
    batch = key_rate_at(H, M, rect, tallies, profile_120)
    for idx in np.ndindex(H.shape):
        assert float(key_rate_at(H[idx], M[idx], rect, tallies, profile_120)) == pytest.approx(batch[idx], rel=1e-12, abs=1e-300)


def test_margin_tracks_rate(profile_120, channel_120):
    pos = evaluate(profile_120, KEY_CHANNEL).result
    assert pos.margin == pytest.approx(pos.r_per_pulse / profile_120.p_mu**2, rel=1e-9)
    zero = evaluate(profile_120, channel_120).result
    assert zero.r_per_pulse == 0.0 and zero.margin < 0
    assert zero.status == "no key"


def test_grid_validation(profile_120, channel_120):
    tallies, rect = _parts(profile_120, channel_120)
    with pytest.raises(ValueError):
        scan_minimum(rect, tallies, profile_120, grid=(1, 16))


def test_surface_csv(profile_120):
    tallies, rect = _parts(profile_120, KEY_CHANNEL)
    res = scan_minimum(rect, tallies, profile_120, grid=(3, 3), refine=False)
    lines = res.surface_csv().splitlines()
    assert lines[0] == "h,m,r_per_pulse" and len(lines) == 10


def test_composed_failure(profile_120, channel_120):
    res = evaluate(profile_120, channel_120).result
    assert res.composed_failure == pytest.approx(9e-10)
