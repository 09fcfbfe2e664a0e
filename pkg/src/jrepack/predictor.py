"""Adaptive estimation of the Laplace scale of every coefficient.

Each bucket is treated as a 2-D field over the block grid.  The scale for
block ``i`` is obtained by running one step of exponential smoothing along
three directions (from the west, north and north-west neighbours) and
blending the three estimates with weights ``(A, A, B)``.  Optionally a second
estimate driven by a correlated, already coded bucket is averaged in.

The blended estimate is then scaled by a block activity factor: buckets are
coded in zigzag order, so when bucket ``k`` of block ``i`` is coded the lower
frequencies of the same block are known.  If they came out larger than their
own estimates, the block is busier than its neighbourhood suggests and the
estimate is raised, and vice versa.  Two ratios are used, one over all coded
AC buckets of the block and one over the two adjacent lower frequencies
``(u-1, v)`` and ``(u, v-1)``::

    factor = ((sum|x| + c) / (sum est + c)) ** activity
           * ((|x_up| + |x_left| + c) / (est_up + est_left + c)) ** local_activity

Only already coded blocks are read, so the decoder reproduces every estimate
exactly.
"""

from __future__ import annotations

import math
import struct
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .buckets import N_BUCKETS, neighbor_indices
from .errors import ConfigError, EmptyInput, MissingPartnerMap
from .zigzag import INVERSE_ZIGZAG, ZIGZAG

SCALE = "scale"
VARIANCE = "variance"

_FIXED_FRAC_BITS = 24
_FIXED_FIELDS = (
    "alpha", "a", "gamma", "sigma_init", "sigma_min",
    "activity", "local_activity", "activity_offset",
)
FIXED_SIZE = 4 * len(_FIXED_FIELDS)


def _lower_neighbours(k):
    r, c = divmod(int(ZIGZAG[k]), 8)
    out = []
    for rr, cc in ((r - 1, c), (r, c - 1)):
        if rr >= 0 and cc >= 0 and (rr, cc) != (0, 0):
            out.append(int(INVERSE_ZIGZAG[rr * 8 + cc]))
    return tuple(out)


# Zigzag indices of the AC frequencies directly above and left of each position.
LOWER_NEIGHBOURS = tuple(_lower_neighbours(k) for k in range(N_BUCKETS))


@dataclass(frozen=True)
class PredictorParams:
    """Smoothing and blending weights.

    Parameters
    ----------
    alpha : float
        Smoothing weight of the newest magnitude, in (0, 1).
    a, b : float
        Blend weights of the horizontal/vertical and of the diagonal
        estimate.  Must satisfy ``2a + b == 1`` and ``b < a``.
    gamma : float
        Smoothing weight of the cross-bucket chain, in (0, 1).
    sigma_init : float
        Scale used where no neighbour exists (top-left block).
    sigma_min : float
        Floor applied to every estimate.
    mode : {"scale", "variance"}
        Smooth the scale directly, or smooth squared values and take the
        square root.
    cross_bucket : bool
        Average in the estimate driven by the partner bucket.
    activity, local_activity : float
        Exponents of the block-wide and adjacent-frequency activity ratios,
        in [0, 1].  Zero disables the respective term.
    activity_offset : float
        Regularising constant ``c`` of both ratios.
    """

    alpha: float = 0.25
    a: float = 0.4
    b: float = 0.2
    gamma: float = 0.9
    sigma_init: float = 1.0
    sigma_min: float = 0.05
    mode: str = SCALE
    cross_bucket: bool = False
    activity: float = 0.5
    local_activity: float = 0.4
    activity_offset: float = 1.0

    def __post_init__(self):
        for name in ("alpha", "a", "b", "gamma"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ConfigError(f"{name} must lie in (0, 1), got {v}")
        if abs(2 * self.a + self.b - 1) > 1e-6:
            raise ConfigError("blend weights must satisfy 2a + b = 1")
        if not self.b < self.a:
            raise ConfigError("diagonal weight b must be smaller than a")
        if not self.sigma_min > 0 or not self.sigma_init > 0:
            raise ConfigError("sigma_init and sigma_min must be positive")
        if self.sigma_init < self.sigma_min:
            raise ConfigError("sigma_init must not be below sigma_min")
        if self.sigma_init >= 256 or self.sigma_min >= 256:
            raise ConfigError("sigma_init and sigma_min must be below 256")
        if self.mode not in (SCALE, VARIANCE):
            raise ConfigError(f"unknown smoothing mode {self.mode!r}")
        for name in ("activity", "local_activity"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        if not 0 < self.activity_offset < 256:
            raise ConfigError("activity_offset must lie in (0, 256)")

    def get_params(self):
        return asdict(self)

    def set_params(self, **changes):
        return replace(self, **changes)

    def to_fixed(self) -> bytes:
        """Pack the real-valued fields as little-endian unsigned Q8.24."""
        vals = [round(getattr(self, f) * (1 << _FIXED_FRAC_BITS)) for f in _FIXED_FIELDS]
        return struct.pack(f"<{len(vals)}I", *vals)

    @classmethod
    def from_fixed(cls, blob, mode=SCALE, cross_bucket=False):
        vals = struct.unpack(f"<{len(_FIXED_FIELDS)}I", blob)
        kw = {f: v / (1 << _FIXED_FRAC_BITS) for f, v in zip(_FIXED_FIELDS, vals)}
        kw["b"] = 1.0 - 2.0 * kw["a"]
        return cls(mode=mode, cross_bucket=cross_bucket, **kw)

    def quantized(self):
        """The parameters exactly as a decoder will read them back."""
        return self.from_fixed(self.to_fixed(), self.mode, self.cross_bucket)

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


def smooth_update(sigma_prev, coeff_abs, alpha, sigma_min=0.05):
    """One step of exponential smoothing of the scale."""
    return max((1.0 - alpha) * sigma_prev + alpha * coeff_abs, sigma_min)


def smooth_update_variance(var_prev, coeff_sq, alpha, var_min=0.05**2):
    """One step of exponential smoothing of the variance; ``sqrt`` gives the scale."""
    return max((1.0 - alpha) * var_prev + alpha * coeff_sq, var_min)


def blend_directions(horizontal, vertical, diagonal, a, b):
    """Weighted blend ``a*h + a*v + b*d`` over the directions that exist.

    Missing directions are passed as ``None``; the weights of the present ones
    are renormalised to sum to one.  Returns ``None`` if none is present.
    """
    num = 0.0
    den = 0.0
    for value, w in ((horizontal, a), (vertical, a), (diagonal, b)):
        if value is not None:
            num += w * value
            den += w
    return num / den if den else None


def mle_sigma(samples, sigma_min=0.05):
    """Maximum-likelihood Laplace scale (zero mean): the mean absolute value."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size == 0:
        raise EmptyInput("mle_sigma needs at least one sample")
    return max(float(np.abs(x).mean()), sigma_min)


def laplace_log_likelihood(samples, sigma):
    x = np.abs(np.asarray(samples, dtype=np.float64))
    return float(-x.size * math.log(2 * sigma) - x.sum() / sigma)


def partner_map(bucket_values):
    """Pick, for every bucket ``k >= 1``, the earlier bucket most correlated with it.

    Correlation is Pearson's r between absolute values over all blocks.
    Only buckets ``m < k`` are candidates so the decoder has them already.
    Constant buckets never qualify; when nothing qualifies ``k - 1`` is used.
    Entry 0 is 0 and unused.
    """
    mags = np.abs(np.asarray(bucket_values, dtype=np.float64))
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.corrcoef(mags) if mags.shape[1] > 1 else np.full((len(mags),) * 2, np.nan)
    r = np.atleast_2d(r)
    partners = [0]
    for k in range(1, len(mags)):
        row = r[k, :k]
        if np.all(np.isnan(row)):
            partners.append(k - 1)
        else:
            partners.append(int(np.nanargmax(row)))
    return partners


class SigmaState:
    """Per-component prediction state.

    ``stored[k][i]`` is the blended directional estimate for bucket ``k`` at
    block ``i`` (the smoothed series value) and ``mags[k][i]`` the magnitude
    that was coded there.  In variance mode both hold squared quantities.
    The activity factor and the cross-bucket term act on top of the stored
    series and are not fed back into it.

    Buckets must be visited in order: :meth:`begin_bucket`, then
    :meth:`estimate`/:meth:`update` for every block in raster order, then
    :meth:`end_bucket`.  Buckets coded without the predictor go through
    :meth:`record_bucket` and :meth:`end_bucket` instead.
    """

    def __init__(self, blocks_wide, blocks_high, params: PredictorParams, partners=None):
        if params.cross_bucket and partners is None:
            raise MissingPartnerMap("cross-bucket prediction needs a partner map")
        self.blocks_wide = blocks_wide
        self.blocks_high = blocks_high
        self.params = params
        self.partners = partners
        n = blocks_wide * blocks_high
        self.n_blocks = n
        self.stored = [[0.0] * n for _ in range(N_BUCKETS)]
        self.mags = [[0.0] * n for _ in range(N_BUCKETS)]
        self._variance = params.mode == VARIANCE
        self._floor = params.sigma_min**2 if self._variance else params.sigma_min
        self._init = params.sigma_init**2 if self._variance else params.sigma_init
        self._sum_mag = np.zeros(n)
        self._sum_est = np.zeros(n)
        self._factor = None

    def directional(self, k, i):
        """Blended directional estimate in the stored domain (scale or variance)."""
        p = self.params
        st = self.stored[k]
        mg = self.mags[k]
        alpha = p.alpha
        beta = 1.0 - alpha
        floor = self._floor
        col = i % self.blocks_wide
        num = 0.0
        den = 0.0
        if col:
            v = beta * st[i - 1] + alpha * mg[i - 1]
            num += p.a * (v if v > floor else floor)
            den += p.a
        if i >= self.blocks_wide:
            j = i - self.blocks_wide
            v = beta * st[j] + alpha * mg[j]
            num += p.a * (v if v > floor else floor)
            den += p.a
            if col:
                v = beta * st[j - 1] + alpha * mg[j - 1]
                num += p.b * (v if v > floor else floor)
                den += p.b
        return num / den if den else self._init

    def cross(self, k, i):
        """Cross-bucket estimate in the stored domain."""
        if i == 0:
            return self._init
        g = self.params.gamma
        m = self.partners[k]
        v = g * self.stored[k][i - 1] + (1.0 - g) * self.mags[m][i - 1]
        return v if v > self._floor else self._floor

    def activity_factors(self, k):
        """Activity factor of every block for bucket ``k`` (``None`` when disabled)."""
        p = self.params
        c = p.activity_offset
        f = None
        if p.activity and k >= 2:
            f = ((self._sum_mag + c) / (self._sum_est + c)) ** p.activity
        lower = LOWER_NEIGHBOURS[k]
        if p.local_activity and lower:
            num = np.sum([self.mags[j] for j in lower], axis=0) + c
            den = np.sum([self.stored[j] for j in lower], axis=0) + c
            g = (num / den) ** p.local_activity
            f = g if f is None else f * g
        return f

    def begin_bucket(self, k):
        f = self.activity_factors(k)
        self._factor = None if f is None else f.tolist()

    def end_bucket(self, k):
        self._factor = None
        if k >= 1 and self.params.activity:
            self._sum_mag += self.mags[k]
            self._sum_est += self.stored[k]

    def estimate(self, k, i):
        """Return ``(stored-domain directional estimate, scale used for coding)``."""
        d = self.directional(k, i)
        est = d
        if self.params.cross_bucket and k:
            est = 0.5 * (est + self.cross(k, i))
        if self._factor is not None:
            est *= self._factor[i]
        if est < self._floor:
            est = self._floor
        return d, (math.sqrt(est) if self._variance else est)

    def predict(self, k, i):
        """Scale used to code coefficient ``i`` of bucket ``k``."""
        return self.estimate(k, i)[1]

    def update(self, k, i, value, directional):
        """Record the coded ``value`` and the directional estimate made for it."""
        self.stored[k][i] = directional
        self.mags[k][i] = float(value * value) if self._variance else float(abs(value))

    def record_bucket(self, k, values):
        """Record a bucket coded without the predictor (RLRG).

        The directional series is still run over it so that later buckets
        see the same state on both sides.
        """
        if self._variance:
            self.mags[k] = [float(v * v) for v in values]
        else:
            self.mags[k] = [float(abs(v)) for v in values]
        st = self.stored[k]
        directional = self.directional
        for i in range(self.n_blocks):
            st[i] = directional(k, i)


def activity_factor(block_index, k, state: SigmaState, params: PredictorParams = None):
    """Activity factor of one block, computed directly from the state."""
    params = params or state.params
    c = params.activity_offset
    f = 1.0
    if params.activity and k >= 2:
        num = sum(state.mags[j][block_index] for j in range(1, k)) + c
        den = sum(state.stored[j][block_index] for j in range(1, k)) + c
        f *= (num / den) ** params.activity
    lower = LOWER_NEIGHBOURS[k]
    if params.local_activity and lower:
        num = sum(state.mags[j][block_index] for j in lower) + c
        den = sum(state.stored[j][block_index] for j in lower) + c
        f *= (num / den) ** params.local_activity
    return f


def predict_sigma(block_index, k, state: SigmaState, params: PredictorParams = None):
    """Scale for coefficient ``(k, block_index)`` from already coded data.

    Reference form of :meth:`SigmaState.predict`, written in terms of
    :func:`smooth_update` and :func:`blend_directions`.
    """
    params = params or state.params
    variance = params.mode == VARIANCE
    floor = params.sigma_min**2 if variance else params.sigma_min
    step = smooth_update_variance if variance else smooth_update
    left, above, above_left = neighbor_indices(block_index, state.blocks_wide)
    est = [
        None if j is None else step(state.stored[k][j], state.mags[k][j], params.alpha, floor)
        for j in (left, above, above_left)
    ]
    value = blend_directions(*est, params.a, params.b)
    if value is None:
        value = params.sigma_init**2 if variance else params.sigma_init
    if params.cross_bucket and k:
        cross = predict_sigma_cross_bucket(block_index, k, state.partners[k], state, params)
        value = 0.5 * (value + (cross**2 if variance else cross))
    value *= activity_factor(block_index, k, state, params)
    value = max(value, floor)
    return math.sqrt(value) if variance else value


def predict_sigma_cross_bucket(block_index, k, partner, state: SigmaState, params=None):
    """``gamma * sigma[k][i-1] + (1 - gamma) * |x[partner][i-1]|``, as a scale."""
    params = params or state.params
    if partner is None:
        raise MissingPartnerMap(f"no partner bucket for bucket {k}")
    if partner == k:
        raise ValueError("a bucket cannot be its own partner")
    variance = params.mode == VARIANCE
    if block_index == 0:
        return params.sigma_init
    i = block_index - 1
    g = params.gamma
    v = g * state.stored[k][i] + (1.0 - g) * state.mags[partner][i]
    floor = params.sigma_min**2 if variance else params.sigma_min
    v = max(v, floor)
    return math.sqrt(v) if variance else v
