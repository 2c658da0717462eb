"""Monte Carlo oracle: PPP snapshots of the network around a typical user.

Shares nothing with the analytic engine except the model definitions.

Sampling.  Thinning the BS process by interferer gain class gives four
independent PPPs of densities ``lam b_k``.  Each is generated outward from
the user as cumulative unit-exponential arrivals ``S_j`` mapped to
``r_j = sqrt(S_j / (pi lam b_k))``, which is the same law as a Poisson count
with uniform positions in a disc but produces points in distance order.
The nearest first arrival across classes is the serving BS; it is never
truncated by the window, so no realization is degenerate.  Interferers are
kept up to ``window_radius``.  Classes with zero gain contribute nothing, so
only their first arrival is drawn.

Because points come in distance order from fixed counters, enlarging the
window only appends points to every trial, and changing the threshold
reuses the same SINR samples.

Random streams per trial: stream 0 draw 0 gives the serving fade; stream
``1 + k`` draw ``j`` gives the ``j``-th arrival gap and fade of class ``k``.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import math
import warnings

import numpy as np

from . import _accel
from ._accel import njit
from .model import path_loss
from .rng import uniform_pair, uniform_pairs_numpy

MAX_EXPECTED_POINTS = 5e7
_CHUNK = 4096


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo run settings.

    window_radius
        Interferer truncation radius in meters; ``None`` picks
        :func:`default_window_radius` for the parameters at hand.
    min_guard_multiplier
        The window must exceed this many nearest-neighbor scales
        ``(lam pi)**-1/2``.
    fading_rate
        Rate of the exponential interferer fades; ``None`` uses ``mu``.
    min_interferers
        The default window holds at least this many positive-gain
        interferers on average, so noise-free runs rarely see an empty
        window.
    """

    trials: int = 100_000
    seed: int = 0
    window_radius: float = None
    min_guard_multiplier: float = 5.0
    fading_rate: float = None
    workers: int = 1
    truncation_tol: float = 1e-3
    min_interferers: float = 50.0

    def __post_init__(self):
        if int(self.trials) != self.trials or self.trials < 1:
            raise ValueError("trials must be a positive integer")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.window_radius is not None and not self.window_radius > 0:
            raise ValueError("window_radius must be positive")
        if not self.min_guard_multiplier >= 1:
            raise ValueError("min_guard_multiplier must be at least 1")
        if self.fading_rate is not None and not self.fading_rate > 0:
            raise ValueError("fading_rate must be positive")
        if int(self.workers) != self.workers or self.workers < 1:
            raise ValueError("workers must be a positive integer")
        if not self.min_interferers >= 0:
            raise ValueError("min_interferers must be nonnegative")


@dataclass(frozen=True)
class SinrSample:
    sinr: float
    serving_distance: float
    n_interferers: int


@dataclass(frozen=True)
class Estimate:
    mean: float
    std_error: float
    trials: int
    seed: int
    excluded: int = 0


def _radial_moment(model, lo, hi):
    # int_lo^hi v L(v) dv, closed form per segment
    def seg(coef, beta, a, b):
        if b <= a:
            return 0.0
        if beta == 2:
            return coef * math.log(b / a)
        if math.isinf(b):
            return coef * a ** (2 - beta) / (beta - 2)
        return coef * (b ** (2 - beta) - a ** (2 - beta)) / (2 - beta)

    total = seg(model.alpha0, model.beta1, lo, min(hi, model.d0))
    total += seg(model.far_coefficient, model.beta2, max(lo, model.d0), hi)
    return total


def truncated_fraction(model, density, radius):
    """Share of mean interference beyond ``radius``.

    Interference is measured from ``0.5 / sqrt(density)``, a typical
    serving distance, because with ``beta1 >= 2`` the mean from 0 is infinite.
    """
    inner = min(radius, 0.5 / math.sqrt(density))
    return _radial_moment(model, radius, math.inf) / _radial_moment(model, inner, math.inf)


def default_window_radius(params, tol=1e-3, guard=5.0, min_interferers=50.0):
    """Smallest radius with at least ``20 d0``, ``guard`` nearest-neighbor
    scales, ``min_interferers`` expected positive-gain interferers and at
    most ``tol`` of the mean interference cut off."""
    m = params.model
    lam = params.density
    r = max(20.0 * m.d0, guard / math.sqrt(lam * math.pi))
    lam_i = _simulated_density(params)
    if lam_i > 0:
        r = max(r, math.sqrt(min_interferers / (math.pi * lam_i)))
    if truncated_fraction(m, lam, r) <= tol:
        return r
    lo, hi = r, 2.0 * r
    while truncated_fraction(m, lam, hi) > tol:
        lo, hi = hi, 2.0 * hi
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if truncated_fraction(m, lam, mid) > tol:
            lo = mid
        else:
            hi = mid
    return hi


def _simulated_density(params):
    # zero-gain classes are never enumerated by the kernels
    return params.density * math.fsum(b for a, b in zip(params.gains.gains, params.gains.probs) if a > 0)


def resolve_window(params, config):
    """Window radius for ``params``; checks the guard and truncation criteria."""
    r = config.window_radius
    if r is None:
        r = default_window_radius(params, config.truncation_tol, config.min_guard_multiplier,
                                  config.min_interferers)
    lam = params.density
    if r < config.min_guard_multiplier / math.sqrt(lam * math.pi):
        raise ValueError(f"window {r:g} m is under {config.min_guard_multiplier:g} nearest-neighbor scales")
    frac = truncated_fraction(params.model, lam, r)
    if frac > config.truncation_tol:
        raise ValueError(f"window {r:g} m cuts off {frac:.3g} of the mean interference "
                         f"(limit {config.truncation_tol:g})")
    points = _simulated_density(params) * math.pi * r * r
    if points > MAX_EXPECTED_POINTS:
        raise ValueError(f"window {r:g} m holds {points:.3g} interfering BSs per trial on average")
    return r


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------

@njit
def _pow_neg_half(r2, beta):
    # r2 ** (-beta / 2) with cheap paths for the usual integer exponents
    if beta == 0.0:
        return 1.0
    if beta == 2.0:
        return 1.0 / r2
    if beta == 4.0:
        inv = 1.0 / r2
        return inv * inv
    if beta == 3.0:
        inv = 1.0 / r2
        return inv / np.sqrt(r2)
    if beta == 1.0:
        return 1.0 / np.sqrt(r2)
    return r2 ** (-0.5 * beta)


@njit
def _loss_sq(r2, alpha0, beta1, far_coef, beta2, d0sq):
    # path loss as a function of squared distance
    if r2 < d0sq:
        return alpha0 * _pow_neg_half(r2, beta1)
    return far_coef * _pow_neg_half(r2, beta2)


@njit(nogil=True)
def _run_trials_nb(seed, first, count, dens, gains, radius, alpha0, beta1, far_coef, beta2, d0,
                   mu, mu_g, sigma2, aligned, sig_out, int_out, r0_out, counts_out):
    d0sq = d0 * d0
    rsq = radius * radius
    s0 = np.empty(4)
    g0 = np.empty(4)
    for i in range(count):
        t = first + np.uint64(i)
        # first arrivals and the serving BS
        best = np.inf
        serving = -1
        for k in range(4):
            if dens[k] > 0:
                u1, u2 = uniform_pair(seed, t, 1 + k, 0)
                s0[k] = -np.log(u1)
                g0[k] = -np.log(u2) / mu_g
                r2 = s0[k] / (np.pi * dens[k])
                if r2 < best:
                    best = r2
                    serving = k
        interference = 0.0
        for k in range(4):
            counts_out[i, k] = -1
            if dens[k] <= 0 or gains[k] <= 0:
                continue
            n = 0
            s = s0[k]
            g = g0[k]
            j = 0
            scale = 1.0 / (np.pi * dens[k])
            acc = 0.0
            while True:
                r2 = s * scale
                if r2 > rsq:
                    break
                if not (k == serving and j == 0):
                    acc += g * _loss_sq(r2, alpha0, beta1, far_coef, beta2, d0sq)
                    n += 1
                j += 1
                u1, u2 = uniform_pair(seed, t, 1 + k, j)
                s += -np.log(u1)
                g = -np.log(u2) / mu_g
            interference += gains[k] * acc
            counts_out[i, k] = n
        u1, u2 = uniform_pair(seed, t, 0, 0)
        h = -np.log(u1) / mu
        sig_out[i] = aligned * h * _loss_sq(best, alpha0, beta1, far_coef, beta2, d0sq)
        int_out[i] = interference
        r0_out[i] = np.sqrt(best)


def _run_trials_numpy(seed, first, count, dens, gains, radius, model, mu, mu_g, aligned, block=64):
    trials = np.arange(first, first + count, dtype=np.uint64)
    s0 = np.full((count, 4), np.inf)
    g0 = np.zeros((count, 4))
    r_first = np.full((count, 4), np.inf)
    for k in range(4):
        if dens[k] > 0:
            u1, u2 = uniform_pairs_numpy(seed, trials, 1 + k, 0)
            s0[:, k] = -np.log(u1)
            g0[:, k] = -np.log(u2) / mu_g
            r_first[:, k] = np.sqrt(s0[:, k] / (np.pi * dens[k]))
    serving = np.argmin(r_first, axis=1)
    r0 = r_first[np.arange(count), serving]
    interference = np.zeros(count)
    counts = np.full((count, 4), -1, dtype=np.int64)
    for k in range(4):
        if dens[k] <= 0 or gains[k] <= 0:
            continue
        scale = 1.0 / (np.pi * dens[k])
        n = np.zeros(count, dtype=np.int64)
        acc = np.zeros(count)
        # arrival 0
        r = np.sqrt(s0[:, k] * scale)
        inside = (r <= radius) & (serving != k)
        acc += np.where(inside, g0[:, k] * path_loss(np.where(inside, r, 1.0), model), 0.0)
        n += inside
        alive = np.nonzero(r <= radius)[0]
        s_last = s0[:, k].copy()
        j0 = 1
        while alive.size:
            draws = np.arange(j0, j0 + block, dtype=np.uint64)
            u1, u2 = uniform_pairs_numpy(seed, trials[alive][:, None], 1 + k, draws[None, :])
            s = s_last[alive][:, None] + np.cumsum(-np.log(u1), axis=1)
            g = -np.log(u2) / mu_g
            r = np.sqrt(s * scale)
            inside = r <= radius
            contrib = np.where(inside, g * path_loss(np.where(inside, r, 1.0), model), 0.0)
            # add in draw order so sums match the loop kernel
            part = acc[alive]
            for c in range(block):
                part = part + contrib[:, c]
            acc[alive] = part
            n[alive] += inside.sum(axis=1)
            s_last[alive] = s[:, -1]
            alive = alive[inside[:, -1]]
            j0 += block
        interference += gains[k] * acc
        counts[:, k] = n
    u1, _ = uniform_pairs_numpy(seed, trials, 0, 0)
    h = -np.log(u1) / mu
    signal = aligned * h * path_loss(r0, model)
    return signal, interference, r0, counts


@dataclass
class SimResult:
    """Per-trial outputs of :func:`simulate`, in trial order."""

    signal: np.ndarray
    interference: np.ndarray
    serving_distance: np.ndarray
    class_counts: np.ndarray
    sigma2: float
    density: float
    seed: int
    window_radius: float
    sinr: np.ndarray = field(init=False)

    def __post_init__(self):
        denom = self.sigma2 + self.interference
        with np.errstate(divide="ignore", invalid="ignore"):
            self.sinr = np.where(denom > 0, self.signal / np.where(denom > 0, denom, 1.0), np.inf)

    @property
    def trials(self):
        return self.sinr.size

    @property
    def n_interferers(self):
        """Interferers with positive gain inside the window."""
        return np.where(self.class_counts > 0, self.class_counts, 0).sum(axis=1)

    def coverage(self, threshold):
        hits = (self.sinr > threshold).astype(float)
        return _estimate(hits, self.seed)

    def ase(self, threshold):
        """Constrained ASE in bits/s/Hz/m^2; infinite-SINR trials are excluded."""
        finite = np.isfinite(self.sinr)
        excluded = int(self.trials - finite.sum())
        if excluded > 1e-3 * self.trials:
            warnings.warn(f"{excluded} of {self.trials} trials had no noise and no interference "
                          "and were left out of the ASE", RuntimeWarning, stacklevel=2)
        s = self.sinr[finite]
        vals = self.density * np.where(s >= threshold, np.log2(1.0 + s), 0.0)
        est = _estimate(vals, self.seed)
        return Estimate(est.mean, est.std_error, est.trials, est.seed, excluded)


def _estimate(values, seed):
    n = values.size
    if n == 0:
        return Estimate(math.nan, math.nan, 0, int(seed))
    mean = math.fsum(values) / n
    if n > 1:
        var = math.fsum((values - mean) ** 2) / (n - 1)
        se = math.sqrt(var / n)
    else:
        se = 0.0
    return Estimate(mean, se, n, int(seed))


def _interferer_rate(params, config):
    return params.mu if config.fading_rate is None else config.fading_rate


def _run_block(params, config, radius, first, count):
    gains, probs = params.gains.as_arrays()
    dens = params.density * probs
    m = params.model
    mu_g = _interferer_rate(params, config)
    seed = int(config.seed)
    if _accel.backend() == "numba":
        sig = np.empty(count)
        inter = np.empty(count)
        r0 = np.empty(count)
        counts = np.empty((count, 4), dtype=np.int64)
        _run_trials_nb(np.uint64(seed), np.uint64(first), count, dens, gains, radius, m.alpha0,
                       m.beta1, m.far_coefficient, m.beta2, m.d0, params.mu, mu_g,
                       params.sigma2, params.beams.aligned_gain, sig, inter, r0, counts)
        return sig, inter, r0, counts
    return _run_trials_numpy(seed, first, count, dens, gains, radius, m, params.mu, mu_g,
                             params.beams.aligned_gain)


def simulate(params, config, first_trial=0):
    """Run ``config.trials`` independent snapshots; returns :class:`SimResult`.

    Trials are cut into fixed chunks dispatched to ``config.workers``
    threads; outputs are stored per trial, so results do not depend on the
    worker count.
    """
    radius = resolve_window(params, config)
    n = int(config.trials)
    starts = list(range(0, n, _CHUNK))
    jobs = [(first_trial + s, min(_CHUNK, n - s)) for s in starts]
    if config.workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=int(config.workers)) as pool:
            parts = list(pool.map(lambda j: _run_block(params, config, radius, *j), jobs))
    else:
        parts = [_run_block(params, config, radius, *j) for j in jobs]
    sig, inter, r0, counts = (np.concatenate([p[i] for p in parts]) for i in range(4))
    return SimResult(sig, inter, r0, counts, params.sigma2, params.density, int(config.seed), radius)


def sample_snapshot(params, config, trial_index):
    """One realization, fully determined by ``(config.seed, trial_index)``."""
    radius = resolve_window(params, config)
    sig, inter, r0, counts = _run_block(params, config, radius, int(trial_index), 1)
    res = SimResult(sig, inter, r0, counts, params.sigma2, params.density, int(config.seed), radius)
    return SinrSample(float(res.sinr[0]), float(r0[0]), int(res.n_interferers[0]))


def estimate_coverage(params, config, thresholds=None):
    """Coverage estimate at ``params.threshold``, or a list of estimates for ``thresholds``.

    A threshold grid reuses one set of snapshots (common random numbers).
    """
    res = simulate(params, config)
    if thresholds is None:
        return res.coverage(params.threshold)
    return [res.coverage(t) for t in np.atleast_1d(thresholds)]


def estimate_ase(params, config):
    """Constrained ASE estimate in bits/s/Hz/m^2 at ``params.threshold``."""
    return simulate(params, config).ase(params.threshold)
