import math

import numpy as np
import pytest
from scipy import stats as sps

from jrepack import DomainError, EmptyInput, InsufficientData, parse_jpeg
from jrepack import stats
from jrepack.zigzag import ZIGZAG


@pytest.fixture(scope="module")
def cameraman(corpus):
    return parse_jpeg(corpus["cameraman"])


# ---------------------------------------------------------------------------
# Correlations


def test_self_correlation_is_one():
    rng = np.random.default_rng(0)
    zz = rng.laplace(0, 3, (500, 64))
    rep = stats.bucket_correlations(zz, pairs=[(4, 4), (0, 1)], n_boot=10)
    assert rep.value(4, 4) == pytest.approx(1.0)


def test_all_pairs_reported(medium_jpeg):
    rep = stats.bucket_correlations(parse_jpeg(medium_jpeg), n_boot=5)
    assert len(rep.pairs) == 64 * 63 // 2
    r = rep.r[~np.isnan(rep.r)]
    assert np.all((-1 <= r) & (r <= 1))
    assert rep.to_csv().count("\n") == 2016 + 1


def test_independent_buckets_are_uncorrelated():
    rng = np.random.default_rng(1)
    n = 2000
    rep = stats.bucket_correlations(rng.laplace(0, 2, (n, 64)), n_boot=2)
    inside = np.abs(rep.r) < 3 / math.sqrt(n)
    assert inside.mean() >= 0.99


def test_constant_bucket_is_undefined_not_zero():
    rng = np.random.default_rng(2)
    zz = rng.laplace(0, 2, (100, 64))
    zz[:, 7] = 3.0
    rep = stats.bucket_correlations(zz, n_boot=3)
    assert math.isnan(rep.value(7, 9)) and math.isnan(rep.value(2, 7))
    assert not math.isnan(rep.value(2, 9))
    assert "nan" in rep.to_csv()


def test_correlations_need_two_blocks():
    with pytest.raises(InsufficientData):
        stats.bucket_correlations(np.zeros((1, 64)))


def test_bootstrap_is_seeded(medium_jpeg):
    img = parse_jpeg(medium_jpeg)
    a = stats.bucket_correlations(img, n_boot=20, seed=3, pairs=[(0, 1), (1, 2)]).to_csv()
    b = stats.bucket_correlations(img, n_boot=20, seed=3, pairs=[(0, 1), (1, 2)]).to_csv()
    assert a == b


def test_grouping_by_distance():
    rng = np.random.default_rng(4)
    rep = stats.bucket_correlations(rng.normal(size=(300, 64)), n_boot=2)
    groups = rep.by_distance()
    assert sorted(groups) == list(range(1, 64))
    assert groups[1][2] == 63 and groups[63][2] == 1
    dc = rep.by_distance(dc_only=True)
    assert all(count == 1 for _, _, count in dc.values())


def test_cameraman_correlation_pattern(cameraman):
    rep = stats.bucket_correlations(cameraman, n_boot=2, dc_deltas=True)
    r = np.abs(rep.r)
    non_dc = np.array([i != 0 for i, _ in rep.pairs])
    assert np.nanmax(r[non_dc]) < 0.3
    dc_row = [abs(rep.value(0, j)) for j in range(1, 64)]
    assert max(dc_row) == max(abs(rep.value(0, 1)), abs(rep.value(0, 2)))
    assert max(dc_row) >= np.nanmax(r[non_dc])


# ---------------------------------------------------------------------------
# Per-position spread


def test_zero_component_hits_floor():
    m = stats.position_std_map(np.zeros((10, 64)))
    assert np.all(m == stats.LOG_STD_FLOOR)


def test_recovers_known_stds():
    rng = np.random.default_rng(5)
    n = 40_000
    true = np.exp(rng.uniform(-1, 3, 64))  # in zigzag order
    zz = rng.normal(0, 1, (n, 64)) * true
    m = stats.position_std_map(zz)
    for k in range(64):
        u, v = divmod(int(ZIGZAG[k]), 8)
        assert abs(math.exp(m[u, v]) / true[k] - 1) < 2 / math.sqrt(n)


def test_std_map_csv_layout():
    rng = np.random.default_rng(6)
    text = stats.std_map_to_csv(stats.position_std_map(rng.normal(size=(50, 64))))
    lines = text.splitlines()
    assert lines[0] == "u,v,zigzag,log_std" and len(lines) == 65
    assert lines[2].startswith("0,1,1,") and lines[9].startswith("1,0,2,")


def test_std_map_needs_two_blocks():
    with pytest.raises(InsufficientData):
        stats.position_std_map(np.zeros((1, 64)))


def test_cameraman_std_decays(cameraman):
    m = stats.position_std_map(cameraman)
    assert m[0, 0] == m.max()
    assert stats.std_trend(m) < 0


# ---------------------------------------------------------------------------
# Distribution overlay


def test_overlay_of_laplace_samples():
    rng = np.random.default_rng(7)
    rep = stats.distribution_overlay(rng.laplace(0, 3, 100_000))
    assert rep.sigma == pytest.approx(3, rel=0.02)
    assert rep.ks_distance < 0.02
    area = (rep.empirical * (rep.values[1] - rep.values[0])).sum()
    assert area == pytest.approx(1.0, abs=0.01)


def test_overlay_of_integer_laplace_is_straight_in_semilog():
    rng = np.random.default_rng(8)
    x = np.round(rng.laplace(0, 4, 50_000)).astype(int)
    rep = stats.distribution_overlay(x)
    assert rep.semilog_r2 >= 0.99
    assert rep.counts.sum() == x.size


def test_overlay_needs_values():
    with pytest.raises(EmptyInput):
        stats.distribution_overlay([])


def test_delta_dc_has_heavy_tails(cameraman):
    dc = cameraman.components[0].zigzag()[:, 0]
    rep = stats.distribution_overlay(dc, deltas=True)
    assert rep.tail_mass > rep.model_tail_mass


def test_first_ac_bucket_semilog_fit(cameraman):
    rep = stats.distribution_overlay(cameraman.components[0].zigzag()[:, 1])
    assert rep.semilog_r2 >= 0.9


# ---------------------------------------------------------------------------
# Zero fractions


def test_zero_fraction_examples():
    zz = np.ones((20, 64))
    zz[:, 3] = 0
    zf = stats.zero_fractions(zz)
    assert zf.shape == (1, 64)
    assert zf[0, 3] == 1.0 and zf[0, 4] == 0.0


def test_zero_fractions_grow_with_frequency(cameraman):
    zf = stats.zero_fractions(cameraman)[0]
    assert sps.spearmanr(np.arange(64), zf).statistic > 0.8


def test_zero_fraction_csv(medium_jpeg):
    img = parse_jpeg(medium_jpeg)
    text = stats.zero_fractions_to_csv(stats.zero_fractions(img))
    assert text.count("\n") == 1 + 3 * 64


# ---------------------------------------------------------------------------
# Smoothed-scale process


def _exact_by_summation(alpha, beta, s, k):
    # sigma_k = beta * sum_j alpha**(k-1-j) |Z_j| with E|Z| = s, Var|Z| = s**2.
    mean = sum(beta * alpha ** (k - 1 - j) * s for j in range(k))
    var = sum((beta * alpha ** (k - 1 - j)) ** 2 * s * s for j in range(k))
    return mean, var


@pytest.mark.parametrize("alpha,beta,s", [(0.5, 1.0, 1.0), (0.9, 0.3, 2.0), (0.0, 2.0, 0.5)])
def test_exact_moments_match_summation(alpha, beta, s):
    for k in (1, 2, 5, 20, 100):
        m, v = stats.exact_moments(alpha, beta, s, k)
        em, ev = _exact_by_summation(alpha, beta, s, k)
        assert m == pytest.approx(em, rel=1e-12)
        assert v == pytest.approx(ev, rel=1e-12)


def test_alpha_zero_collapses():
    rep = stats.simulate_sigma_process(0.0, 2.0, 1.5, k_max=20, trials=20_000, seed=1)
    for row in rep.rows:
        assert row["exact_mean"] == pytest.approx(3.0)
        assert abs(row["z_mean"]) < 4


def test_example_alpha_half_k20():
    rep = stats.simulate_sigma_process(0.5, 1.0, 1.0, k_max=20, trials=20_000, seed=2)
    row = rep.row(20)
    assert row["exact_mean"] == pytest.approx(2 * (1 - 0.5**20))
    assert abs(row["emp_mean"] - row["exact_mean"]) <= 3 * row["se_mean"]


def test_printed_formulas_reported():
    rep = stats.simulate_sigma_process(0.5, 1.0, 1.0, k_max=5, trials=10_000, seed=3)
    row = rep.row(5)
    assert row["printed_mean"] == pytest.approx((1 + 0.5**4) / 2 * 5)
    assert row["printed_var"] == pytest.approx((1 + 0.5**8) / 2 * 5)
    assert "printed_mean" in rep.to_csv().splitlines()[0]


def test_process_is_seeded():
    a = stats.simulate_sigma_process(0.7, trials=10_000, seed=9, k_max=5).to_csv()
    b = stats.simulate_sigma_process(0.7, trials=10_000, seed=9, k_max=5).to_csv()
    assert a == b


@pytest.mark.parametrize(
    "kw",
    [
        dict(alpha=1.0),
        dict(alpha=-1.2),
        dict(alpha=0.5, beta=0.0),
        dict(alpha=0.5, s=-1.0),
        dict(alpha=0.5, trials=999),
    ],
)
def test_process_domain(kw):
    with pytest.raises(DomainError):
        stats.simulate_sigma_process(**kw)
