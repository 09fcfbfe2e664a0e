import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from jrepack import ConfigError, DomainError
from jrepack.tables import (
    A_MAX,
    A_MIN,
    ALPHABET_SIZE,
    LaplaceTableSet,
    TableConfig,
    _cumulative_for,
    build_tables,
    discrete_mean_abs,
    laplace_cdf,
    level_for_magnitude,
    quantize_sigma,
    symbol_prob,
    table_entropy,
)

sigmas = st.floats(0.01, 500.0, allow_nan=False)


def test_cdf_examples():
    assert laplace_cdf(0.0, 3.0) == 0.5
    assert laplace_cdf(1.0, 1.0) == pytest.approx(0.81606, abs=1e-5)
    assert laplace_cdf(-1.0, 1.0) == pytest.approx(0.5 * math.exp(-1))


@given(st.floats(-50, 50), sigmas)
def test_cdf_symmetry(x, sigma):
    assert laplace_cdf(x, sigma) + laplace_cdf(-x, sigma) == pytest.approx(1.0, abs=1e-12)


@given(st.floats(-50, 50), st.floats(0, 10), sigmas)
def test_cdf_monotone(x, dx, sigma):
    assert laplace_cdf(x, sigma) <= laplace_cdf(x + dx, sigma)


@pytest.mark.parametrize("bad", [0.0, -1.0, float("nan")])
def test_domain_errors(bad):
    with pytest.raises(DomainError):
        laplace_cdf(0.0, bad)
    with pytest.raises(DomainError):
        symbol_prob(0, bad)
    with pytest.raises(DomainError):
        discrete_mean_abs(bad)


def test_symbol_prob_examples():
    assert symbol_prob(0, 1.0) == pytest.approx(0.393469, abs=1e-6)
    # Cross-check against the CDF difference.
    for x in (-3, 0, 2, 7):
        expected = laplace_cdf(x + 0.5, 1.7) - laplace_cdf(x - 0.5, 1.7)
        assert symbol_prob(x, 1.7) == pytest.approx(expected, rel=1e-12)


@given(st.integers(0, 2048), sigmas)
def test_symbol_prob_symmetric_and_peaked(x, sigma):
    assert symbol_prob(x, sigma) == symbol_prob(-x, sigma)
    assert symbol_prob(x, sigma) <= symbol_prob(0, sigma)


@pytest.mark.parametrize("sigma", [0.05, 1.0, 10.0, 64.0])
def test_alphabet_mass_deficit_is_tail_mass(sigma):
    total = math.fsum(symbol_prob(x, sigma) for x in range(A_MIN, A_MAX + 1))
    # Exactly the two tails beyond the alphabet edges.
    tail = 0.5 * math.exp(-(A_MAX + 0.5) / sigma) + 0.5 * math.exp(-(-A_MIN + 0.5) / sigma)
    assert total <= 1.0 + 1e-12
    assert 1.0 - total == pytest.approx(tail, abs=1e-12)
    assert 1.0 - total < 1e-6


def test_discrete_mean_abs_matches_direct_sum():
    for sigma in (0.1, 0.7, 3.0, 40.0):
        direct = math.fsum(abs(x) * symbol_prob(x, sigma) for x in range(-4000, 4001))
        assert discrete_mean_abs(sigma) == pytest.approx(direct, rel=1e-9)


def test_default_grid(tables):
    lv = tables.sigma_levels
    assert len(lv) == 64
    assert lv[0] == pytest.approx(0.05) and lv[-1] == pytest.approx(256.0)
    ratios = lv[1:] / lv[:-1]
    assert np.allclose(ratios, ratios[0])
    assert tables.total == 2**32


def test_every_table_sums_to_total_with_floor(tables):
    for level in range(tables.n_levels):
        cum = np.array(tables.cumulative[level], dtype=np.int64)
        assert cum[0] == 0 and cum[-1] == tables.total
        freq = np.diff(cum)
        assert len(freq) == ALPHABET_SIZE
        assert freq.min() >= 1


def test_zero_frequency_matches_model(tables):
    for level, sigma in enumerate(tables.sigma_levels):
        f0 = tables.frequencies(level)[-A_MIN]
        assert abs(f0 / tables.total - symbol_prob(0, float(sigma))) <= 2 / tables.total


def test_unit_sigma_zero_frequency():
    t = build_tables(TableConfig(sigma_levels=(0.5, 1.0, 2.0)))
    f0 = t.frequencies(1)[-A_MIN] / t.total
    assert abs(f0 - 0.393469) <= 2 / t.total + 1e-6


@pytest.mark.parametrize("sigma", [0.05, 0.9, 17.0, 256.0])
def test_tables_symmetric_before_floor(tables, sigma):
    raw = np.diff(_cumulative_for(sigma, tables.total, 0))
    # Symbols -2046..2046; the two end symbols also absorb the tails.
    inner = raw[2:-1]
    assert np.array_equal(inner, inner[::-1])


def test_floor_only_moves_units_between_tail_and_body(tables):
    # Where the model mass of every symbol exceeds one unit nothing changes.
    sigma = float(tables.sigma_levels[-1])
    raw = np.diff(_cumulative_for(sigma, tables.total, 0))
    if raw.min() >= 1:
        assert np.array_equal(raw, tables.frequencies(tables.n_levels - 1))


def test_build_is_deterministic():
    a = build_tables(TableConfig(n_levels=8))
    build_tables.cache_clear()
    b = build_tables(TableConfig(n_levels=8))
    assert a.to_bytes() == b.to_bytes()


def test_blob_round_trip(tables):
    blob = tables.to_bytes()
    back = LaplaceTableSet.from_bytes(blob)
    assert back == tables
    assert back.to_bytes() == blob
    assert back.magnitude_thresholds == tables.magnitude_thresholds


def test_blob_checksum_detects_damage(tables):
    blob = bytearray(tables.to_bytes())
    blob[100] ^= 1
    with pytest.raises(ConfigError):
        LaplaceTableSet.from_bytes(bytes(blob))
    with pytest.raises(ConfigError):
        LaplaceTableSet.from_bytes(b"nope")


@pytest.mark.parametrize(
    "config",
    [
        TableConfig(total_bits=12),
        TableConfig(prob_floor=0),
        TableConfig(total_bits=13, prob_floor=2),
        TableConfig(sigma_levels=(1.0, 0.5)),
        TableConfig(sigma_levels=(-1.0, 2.0)),
    ],
)
def test_bad_configs(config):
    with pytest.raises(ConfigError):
        build_tables(config)


def test_quantize_examples(tables):
    assert quantize_sigma(1e-9, tables) == 0
    assert quantize_sigma(1e9, tables) == tables.n_levels - 1
    for j in (0, 5, 33, 63):
        assert quantize_sigma(float(tables.sigma_levels[j]), tables) == j


@given(sigmas, sigmas)
def test_quantize_monotone(tables, s1, s2):
    lo, hi = sorted((s1, s2))
    assert quantize_sigma(lo, tables) <= quantize_sigma(hi, tables)


@given(sigmas)
def test_quantize_picks_nearest_in_log_space(tables, s):
    j = quantize_sigma(s, tables)
    d = np.abs(np.log(tables.sigma_levels) - math.log(s))
    assert d[j] <= d.min() + 1e-12


@given(st.floats(0.0, 1000.0), st.floats(0.0, 1000.0))
def test_magnitude_level_monotone(tables, m1, m2):
    lo, hi = sorted((m1, m2))
    assert level_for_magnitude(lo, tables) <= level_for_magnitude(hi, tables)


def test_magnitude_level_matches_discrete_mean(tables):
    for j in (3, 20, 40, 60):
        m = discrete_mean_abs(float(tables.sigma_levels[j]))
        assert level_for_magnitude(m, tables) == j


def test_cross_entropy_near_source_entropy(tables):
    # i.i.d. discretised Laplace at an off-grid scale, coded with the nearest level.
    rng = np.random.default_rng(3)
    sigma_true = 3.1
    x = np.round(rng.laplace(0, sigma_true, 100_000)).astype(int)
    x = np.clip(x, A_MIN, A_MAX)
    level = quantize_sigma(sigma_true, tables)
    freq = tables.frequencies(level)
    bits = -np.log2(freq[x - A_MIN] / tables.total).mean()
    p = np.array([symbol_prob(v, sigma_true) for v in range(-200, 201)])
    source = -(p * np.log2(p)).sum()
    sigma_q = float(tables.sigma_levels[level])
    q = np.array([symbol_prob(v, sigma_q) for v in range(-200, 201)])
    penalty = (p * np.log2(p / q)).sum()
    assert bits <= (source + penalty) * 1.02
    assert table_entropy(tables, level) == pytest.approx(
        -(q * np.log2(q)).sum(), rel=1e-4
    )
