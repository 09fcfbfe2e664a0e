"""Statistics of quantized DCT coefficients and of the smoothed-scale process.

Every report is a small dataclass with a ``to_csv()`` method.  Randomness
(bootstrap, simulation) only comes from an explicit seed, so equal inputs
give byte-identical CSV.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from .buckets import delta_dc
from .errors import DomainError, EmptyInput, InsufficientData
from .jpeg import QuantizedImage
from .zigzag import INVERSE_ZIGZAG

# Reported in place of log(0) for positions whose coefficients never vary.
LOG_STD_FLOOR = -30.0


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    return "nan" if math.isnan(x) else format(x, ".10g")


def _csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) if not isinstance(v, str) else v for v in row])
    return buf.getvalue()


def _component_zigzag(img, component):
    if isinstance(img, QuantizedImage):
        zz = img.components[component].zigzag()
    else:
        zz = np.asarray(img).reshape(-1, 64)
    return zz.astype(np.float64)


# ---------------------------------------------------------------------------
# Correlations between positions


@dataclass
class CorrelationReport:
    """Pearson r for pairs of zigzag positions ``(i, j)``, ``i < j``.

    ``r`` is NaN where one of the two series is constant.
    """

    pairs: list
    r: np.ndarray
    n: int
    stderr: np.ndarray

    def value(self, i, j):
        i, j = min(i, j), max(i, j)
        return float(self.r[self.pairs.index((i, j))])

    def by_distance(self, dc_only=False):
        """Mean and standard deviation of ``r`` grouped by zigzag distance ``j - i``.

        Returns ``{distance: (mean_r, std_r, count)}`` skipping undefined pairs.
        """
        groups = {}
        for (i, j), r in zip(self.pairs, self.r):
            if math.isnan(r) or (dc_only and i != 0):
                continue
            groups.setdefault(j - i, []).append(r)
        return {
            d: (float(np.mean(v)), float(np.std(v)), len(v)) for d, v in sorted(groups.items())
        }

    def to_csv(self):
        rows = [
            (i, j, j - i, r, self.n, se)
            for (i, j), r, se in zip(self.pairs, self.r, self.stderr)
        ]
        return _csv(["pos_i", "pos_j", "distance", "r", "n", "stderr"], rows)


def _corr_matrix(x):
    x = x - x.mean(axis=0)
    ss = np.sqrt((x * x).sum(axis=0))
    with np.errstate(invalid="ignore", divide="ignore"):
        c = (x.T @ x) / np.outer(ss, ss)
    c[:, ss == 0] = np.nan
    c[ss == 0, :] = np.nan
    return np.clip(c, -1.0, 1.0)


def bucket_correlations(img, component=0, n_boot=200, seed=0, pairs=None, dc_deltas=False):
    """Correlation of every pair of zigzag positions across the blocks of a component.

    ``img`` is a :class:`QuantizedImage` or an ``(n_blocks, 64)`` array in
    zigzag order.  With ``dc_deltas`` position 0 holds the raster-order DC
    differences, i.e. the DC bucket as it is entropy coded.  Standard errors
    come from ``n_boot`` bootstrap resamples of the blocks.  Raises
    :class:`InsufficientData` below two blocks.
    """
    zz = _component_zigzag(img, component)
    if dc_deltas:
        zz[:, 0] = delta_dc(zz[:, 0].astype(np.int64))
    n = zz.shape[0]
    if n < 2:
        raise InsufficientData("need at least two blocks")
    if pairs is None:
        pairs = [(i, j) for i in range(64) for j in range(i + 1, 64)]
    else:
        pairs = [(min(i, j), max(i, j)) for i, j in pairs]
    ii = np.array([p[0] for p in pairs])
    jj = np.array([p[1] for p in pairs])
    r = _corr_matrix(zz)[ii, jj]
    rng = np.random.default_rng(seed)
    boots = np.empty((n_boot, len(pairs)))
    for b in range(n_boot):
        sample = zz[rng.integers(0, n, n)]
        boots[b] = _corr_matrix(sample)[ii, jj]
    with warnings.catch_warnings():
        # Undefined pairs give all-NaN columns; their error stays NaN.
        warnings.simplefilter("ignore", RuntimeWarning)
        se = np.nanstd(boots, axis=0, ddof=1) if n_boot > 1 else np.full(len(pairs), np.nan)
    se[np.isnan(r)] = np.nan
    return CorrelationReport(pairs, r, n, se)


# ---------------------------------------------------------------------------
# Per-position spread


def position_std_map(img, component=0):
    """Natural-log standard deviation of each of the 64 positions, as an 8x8 array.

    Row ``u``, column ``v`` is frequency ``(u, v)`` of the block.  Positions
    that never vary get :data:`LOG_STD_FLOOR`.
    """
    zz = _component_zigzag(img, component)
    if zz.shape[0] < 2:
        raise InsufficientData("need at least two blocks")
    std = zz.std(axis=0)
    with np.errstate(divide="ignore"):
        logs = np.where(std > 0, np.log(np.where(std > 0, std, 1.0)), LOG_STD_FLOOR)
    natural = logs[INVERSE_ZIGZAG]
    return natural.reshape(8, 8)


def std_map_to_csv(log_map):
    rows = [(u, v, int(INVERSE_ZIGZAG[u * 8 + v]), log_map[u, v]) for u in range(8) for v in range(8)]
    return _csv(["u", "v", "zigzag", "log_std"], rows)


def std_trend(log_map):
    """Spearman rank correlation of log-std against zigzag index (negative = decaying)."""
    by_zigzag = np.asarray(log_map).reshape(64)[np.argsort(INVERSE_ZIGZAG)]
    rho = sps.spearmanr(np.arange(64), by_zigzag).statistic
    return float(rho)


# ---------------------------------------------------------------------------
# Zero fractions


def zero_fractions(img):
    """Fraction of zero coefficients per zigzag position, shape ``(components, 64)``."""
    if isinstance(img, QuantizedImage):
        return np.array([(g.zigzag() == 0).mean(axis=0) for g in img.components])
    zz = np.asarray(img).reshape(-1, 64)
    return (zz == 0).mean(axis=0)[None, :]


def zero_fractions_to_csv(fractions):
    rows = [(c, k, f) for c, row in enumerate(fractions) for k, f in enumerate(row)]
    return _csv(["component", "zigzag", "zero_fraction"], rows)


# ---------------------------------------------------------------------------
# Histogram against the fitted Laplace law


@dataclass
class OverlayReport:
    sigma: float
    values: np.ndarray
    counts: np.ndarray
    empirical: np.ndarray
    model: np.ndarray
    ks_distance: float
    tail_mass: float
    model_tail_mass: float
    semilog_r2: float

    def to_csv(self):
        rows = zip(self.values, self.counts, self.empirical, self.model)
        return _csv(["value", "count", "empirical_pmf", "laplace_density"], rows)


def _ks_distance(x, sigma):
    x = np.sort(x)
    n = len(x)
    f = np.where(x < 0, 0.5 * np.exp(x / sigma), 1.0 - 0.5 * np.exp(-x / sigma))
    hi = np.arange(1, n + 1) / n
    lo = np.arange(0, n) / n
    return float(max(np.max(hi - f), np.max(f - lo)))


def semilog_r2(abs_values, min_count=5):
    """R^2 of a straight-line fit of log frequency of ``|x|`` against ``|x|``.

    Uses the contiguous run of magnitudes 0, 1, 2, ... that each occur at
    least ``min_count`` times.
    """
    a = np.abs(np.asarray(abs_values)).astype(np.int64)
    counts = np.bincount(a)
    stop = 0
    while stop < len(counts) and counts[stop] >= min_count:
        stop += 1
    if stop < 3:
        return float("nan")
    xs = np.arange(stop)
    ys = np.log(counts[:stop])
    fit = sps.linregress(xs, ys)
    return float(fit.rvalue**2)


def distribution_overlay(values, deltas=False, sigma_min=0.05):
    """Empirical distribution of a bucket next to the Laplace law at the MLE scale.

    With ``deltas`` the first differences (ΔDC) are analysed instead.
    Integer data get a per-value histogram; real data a 201-bin histogram
    over ``[-10 sigma, 10 sigma]``.  Raises :class:`EmptyInput`.
    """
    x = np.asarray(values.values if hasattr(values, "values") else values)
    if x.size == 0:
        raise EmptyInput("no values to analyse")
    if deltas:
        x = delta_dc(x.astype(np.int64))
    x = x.astype(np.float64) if not np.issubdtype(x.dtype, np.integer) else x
    sigma = max(float(np.abs(x).mean()), sigma_min)
    n = x.size
    if np.issubdtype(x.dtype, np.integer):
        v, c = np.unique(x, return_counts=True)
        centers = v.astype(np.float64)
        emp = c / n
        width = 1.0
    else:
        edges = np.linspace(-10 * sigma, 10 * sigma, 202)
        c, _ = np.histogram(x, edges)
        centers = 0.5 * (edges[:-1] + edges[1:])
        width = edges[1] - edges[0]
        emp = c / (n * width)
        v = centers
    model = np.exp(-np.abs(centers) / sigma) / (2 * sigma)
    tail = float(np.mean(np.abs(x) > 5 * sigma))
    return OverlayReport(
        sigma=sigma,
        values=v,
        counts=c,
        empirical=emp,
        model=model,
        ks_distance=_ks_distance(x.astype(np.float64), sigma),
        tail_mass=tail,
        model_tail_mass=math.exp(-5.0),
        semilog_r2=semilog_r2(x) if np.issubdtype(x.dtype, np.integer) else float("nan"),
    )


# ---------------------------------------------------------------------------
# Monte-Carlo check of the smoothed-scale process


def exact_moments(alpha, beta, s, k):
    """Mean and variance of ``sigma_k = beta * sum_{j<k} alpha**(k-1-j) |Z_j|``.

    ``Z_j`` i.i.d. Laplace with scale ``s``: ``E|Z| = s``, ``Var|Z| = s**2``.
    """
    if alpha == 1:
        geo, geo2 = k, k
    else:
        geo = (1 - alpha**k) / (1 - alpha)
        geo2 = (1 - alpha ** (2 * k)) / (1 - alpha**2)
    return beta * s * geo, beta**2 * s**2 * geo2


def printed_moments(alpha, beta, s, k):
    """The closed forms printed with the recursion, reproduced for comparison only."""
    mean = beta * s * (1 + alpha ** (k - 1)) / 2 * k
    var = (beta * s) ** 2 * (1 + alpha ** (2 * k - 2)) / 2 * k
    return mean, var


@dataclass
class ProcessMomentsReport:
    alpha: float
    beta: float
    scale: float
    trials: int
    seed: int
    rows: list = field(default_factory=list)

    COLUMNS = (
        "k", "emp_mean", "se_mean", "exact_mean", "printed_mean",
        "emp_var", "se_var", "exact_var", "printed_var", "z_mean", "z_var",
    )

    def row(self, k):
        for r in self.rows:
            if r["k"] == k:
                return r
        raise KeyError(k)

    def to_csv(self):
        return _csv(self.COLUMNS, ([r[c] for c in self.COLUMNS] for r in self.rows))


def simulate_sigma_process(alpha, beta=1.0, s=1.0, k_max=100, trials=100_000, seed=0, ks=None):
    """Simulate ``sigma_k = alpha * sigma_{k-1} + beta * |Z_{k-1}|`` from ``sigma_0 = 0``.

    ``Z`` is Laplace with scale ``s``.  Reports, for every ``k`` in ``ks``
    (default ``{1, 2, 5, 20, 100}`` up to ``k_max``), the empirical mean and
    variance with their standard errors, the exact moments and the printed
    closed forms, plus z-scores of the empirical values against the exact ones.
    """
    if not abs(alpha) < 1:
        raise DomainError("|alpha| must be below 1")
    if not beta > 0 or not s > 0:
        raise DomainError("beta and s must be positive")
    if trials < 10_000:
        raise DomainError("at least 10**4 trials are required")
    if ks is None:
        ks = [k for k in (1, 2, 5, 20, 100) if k <= k_max]
    ks = sorted(set(int(k) for k in ks))
    if not ks or ks[0] < 1 or ks[-1] > k_max:
        raise DomainError("requested steps must lie in [1, k_max]")
    rng = np.random.default_rng(seed)
    sigma = np.zeros(trials)
    report = ProcessMomentsReport(alpha, beta, s, trials, seed)
    wanted = set(ks)
    for k in range(1, ks[-1] + 1):
        sigma = alpha * sigma + beta * np.abs(rng.laplace(0.0, s, trials))
        if k not in wanted:
            continue
        m = float(sigma.mean())
        c = sigma - m
        var = float((c * c).sum() / (trials - 1))
        m4 = float((c**4).mean())
        se_m = math.sqrt(var / trials)
        se_v = math.sqrt(max(m4 - var * var, 0.0) / trials)
        em, ev = exact_moments(alpha, beta, s, k)
        pm, pv = printed_moments(alpha, beta, s, k)
        report.rows.append({
            "k": k, "emp_mean": m, "se_mean": se_m, "exact_mean": em, "printed_mean": pm,
            "emp_var": var, "se_var": se_v, "exact_var": ev, "printed_var": pv,
            "z_mean": (m - em) / se_m if se_m else 0.0,
            "z_var": (var - ev) / se_v if se_v else 0.0,
        })
    return report
