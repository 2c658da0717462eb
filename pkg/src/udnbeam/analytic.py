"""Coverage probability and constrained ASE by numerical evaluation.

The serving BS is the nearest one, so its distance ``r0`` has density
``2 pi lam r0 exp(-lam pi r0**2)``.  Conditioning on ``r0`` and on the
exponential serving fade gives

    P[SINR > T | r0] = exp(-x sigma2) * L_I(x),    x = mu T / (N_B N_U L(r0)),

where ``L_I`` is the Laplace transform of the interference from BSs beyond
``r0``.  Each gain class ``k`` is an independent PPP of density
``lam b_k``, so ``log L_I`` is a sum of four radial integrals.  Outer
integrals run over ``s = lam pi r0**2``, which turns the distance law into
``exp(-s) ds`` and makes the quadrature scale-free in the density.

Laplace transforms here are normalized so that ``L_I(0) = 1``; the
``exp(-lam pi r0**2)`` void probability of the nearest-neighbor law is kept
in the distance density instead.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import DomainError, PreconditionError
from .special import (DEFAULT_SPEC, one_minus_exp_integral, powerlaw_kernel, quad,
                      quad_batch, rho)

LOG2E = 1.0 / math.log(2.0)
_T_MAX = 700.0


@dataclass(frozen=True)
class FadingSpec:
    """Interferer power fading: exponential with a rate, or a custom density.

    Build with :meth:`exponential` or :meth:`custom`.
    """

    kind: str
    rate: float = 1.0
    pdf: object = None
    scale: float = 1.0

    @classmethod
    def exponential(cls, rate):
        if not rate > 0:
            raise DomainError("exponential fading rate must be positive")
        return cls("exponential", rate=float(rate))

    @classmethod
    def custom(cls, pdf, scale=1.0, spec=DEFAULT_SPEC, norm_tol=1e-6):
        """Fading with a vectorized density ``pdf(g)`` supported on ``[0, inf)``.

        ``scale`` is a typical magnitude of ``g`` used to map the
        semi-infinite g-integral.  The density must integrate to 1 within
        ``norm_tol``.
        """
        total = quad(lambda g: np.asarray(pdf(g), dtype=float), 0.0, np.inf, spec, scale=scale).value
        if abs(total - 1.0) > norm_tol:
            raise DomainError(f"fading density integrates to {total!r}, not 1")
        return cls("custom", pdf=pdf, scale=float(scale))


@dataclass(frozen=True)
class CoverageResult:
    value: float
    est_abs_error: float

    def __float__(self):
        return self.value


@dataclass(frozen=True)
class AseResult:
    """Constrained ASE in bits/s/Hz per square meter."""

    value: float
    est_abs_error: float

    def __float__(self):
        return self.value


def _default_fading(params, fading):
    return FadingSpec.exponential(params.mu) if fading is None else fading


# ---------------------------------------------------------------------------
# Interference exponents
# ---------------------------------------------------------------------------

def _near_term_exponential(c, beta1, r0, d0):
    # int_{r0}^{d0} v dv / (1 + v**beta1 / c), vectorized over c and r0
    c = np.asarray(c, dtype=float)
    r0 = np.asarray(r0, dtype=float)
    lo = r0 * r0
    hi = d0 * d0
    if beta1 == 0:
        return 0.5 * np.maximum(hi - lo, 0.0) * c / (1.0 + c)
    with np.errstate(divide="ignore", over="ignore"):
        kappa = np.where(c > 0, 1.0 / c, np.inf)
    return 0.5 * powerlaw_kernel(beta1 / 2.0, kappa, lo, np.maximum(hi, lo))


def _far_term_exponential(c, beta2, start):
    # int_{start}^inf v dv / (1 + v**beta2 / c)
    c = np.asarray(c, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        kappa = np.where(c > 0, 1.0 / c, np.inf)
    return 0.5 * powerlaw_kernel(beta2 / 2.0, kappa, np.asarray(start, dtype=float) ** 2, np.inf)


def _near_term_custom(strength, beta1, r0, d0):
    # int_{r0}^{d0} (1 - exp(-strength v**-beta1)) v dv for arrays of strength
    strength = np.asarray(strength, dtype=float)
    if r0 >= d0:
        return np.zeros(strength.shape)
    if beta1 == 0:
        return 0.5 * (d0 * d0 - r0 * r0) * -np.expm1(-strength)
    out = np.zeros(strength.shape)
    pos = strength > 0
    if not np.any(pos):
        return out
    s = -2.0 / beta1
    c = strength[pos]
    lo = c * d0 ** (-beta1)
    hi = c * r0 ** (-beta1)
    out[pos] = c ** (2.0 / beta1) / beta1 * one_minus_exp_integral(s, lo, hi)
    return out


def _far_term_custom(strength, beta2, start):
    # int_{start}^inf (1 - exp(-strength v**-beta2)) v dv
    strength = np.asarray(strength, dtype=float)
    out = np.zeros(strength.shape)
    pos = strength > 0
    if not np.any(pos):
        return out
    s = -2.0 / beta2
    c = strength[pos]
    out[pos] = c ** (2.0 / beta2) / beta2 * one_minus_exp_integral(s, 0.0, c * start ** (-beta2))
    return out


def _interference_exponent(x, params, fading, r0, spec):
    """``-log L_I(x)`` and its error for arrays ``x``, ``r0`` (same shape)."""
    x = np.asarray(x, dtype=float)
    r0 = np.asarray(r0, dtype=float)
    m = params.model
    lam = params.density
    total = np.zeros(np.broadcast(x, r0).shape)
    err = np.zeros(total.shape)
    near = r0 < m.d0
    start = np.maximum(r0, m.d0)
    for a_k, b_k in zip(params.gains.gains, params.gains.probs):
        if b_k == 0 or a_k == 0:
            continue
        if fading.kind == "exponential":
            c_near = x * a_k * m.alpha0 / fading.rate
            c_far = x * a_k * m.far_coefficient / fading.rate
            term = _far_term_exponential(c_far, m.beta2, start)
            if np.any(near):
                term = term + np.where(
                    near, _near_term_exponential(np.where(near, c_near, 0.0), m.beta1,
                                                 np.minimum(r0, m.d0), m.d0), 0.0)
            total += 2.0 * math.pi * lam * b_k * term
        else:
            for idx in np.ndindex(total.shape):
                xi = float(x[idx]) if x.ndim else float(x)
                ri = float(r0[idx]) if r0.ndim else float(r0)

                def g_integrand(g, xi=xi, ri=ri):
                    g = np.asarray(g, dtype=float)
                    strength_near = xi * g * a_k * m.alpha0
                    strength_far = xi * g * a_k * m.far_coefficient
                    val = _far_term_custom(strength_far, m.beta2, max(ri, m.d0))
                    if ri < m.d0:
                        val = val + _near_term_custom(strength_near, m.beta1, ri, m.d0)
                    return val * np.asarray(fading.pdf(g), dtype=float)

                res = quad(g_integrand, 0.0, np.inf, spec, scale=fading.scale)
                weight = 2.0 * math.pi * lam * b_k
                total[idx] += weight * res.value
                err[idx] += weight * res.abs_error
    return total, err


def _laplace(x, params, fading, r0, spec):
    if np.any(np.asarray(x) < 0):
        raise DomainError("Laplace argument must be nonnegative")
    fading = _default_fading(params, fading)
    expo, _ = _interference_exponent(x, params, fading, r0, spec)
    out = np.where(np.asarray(x) == 0, 1.0, np.exp(-expo))
    return float(out) if out.ndim == 0 else out


def laplace_interference_near(x, params, fading=None, r0=None, spec=DEFAULT_SPEC):
    """``E exp(-x I)`` for interferers beyond a serving BS at ``r0 < d0``.

    Interferers lie both inside the near-field annulus ``[r0, d0)`` and in
    the far field ``[d0, inf)``.  Vectorized over ``x``.
    """
    if r0 is None or not 0 < r0 < params.model.d0:
        raise DomainError("near-field transform needs 0 < r0 < d0")
    return _laplace(x, params, fading, r0, spec)


def laplace_interference_far(x, params, fading=None, r0=None, spec=DEFAULT_SPEC):
    """``E exp(-x I)`` for interferers beyond a serving BS at ``r0 >= d0``."""
    if r0 is None or not r0 >= params.model.d0:
        raise DomainError("far-field transform needs r0 >= d0")
    return _laplace(x, params, fading, r0, spec)


# ---------------------------------------------------------------------------
# Coverage
# ---------------------------------------------------------------------------

def _conditional_coverage(s, threshold, params, fading, spec):
    """``P[SINR > T | lam pi r0**2 = s]`` and its propagated error; arrays."""
    s = np.asarray(s, dtype=float)
    m = params.model
    r0 = np.sqrt(s / (math.pi * params.density))
    # x = mu T / (N_B N_U L(r0)), written so r0 = 0 needs no special case
    with np.errstate(divide="ignore", over="ignore"):
        inv_loss = np.where(r0 < m.d0, r0 ** m.beta1 / m.alpha0, r0 ** m.beta2 / m.far_coefficient)
    x = params.mu * threshold * inv_loss / params.beams.aligned_gain
    expo, err = _interference_exponent(x, params, fading, r0, spec)
    if params.sigma2 > 0:
        expo = expo + x * params.sigma2
    val = np.exp(-expo)
    return val, val * err


def _far_decay_rate(thresholds, params, fading):
    """Per-threshold decay rate of the outer integrand in ``s`` beyond ``nu``.

    For ``r0 >= d0`` the interference exponent is exactly
    ``s * sum_k b_k rho(mu T a_k / (N_B N_U rate), beta2)`` with exponential
    fading; the noise term adds its slope at ``s = nu``.  The rate only sets
    the integration scale, so custom fading reuses the exponential form.
    """
    m = params.model
    rate_g = fading.rate if fading.kind == "exponential" else params.mu
    scale = params.mu / (params.beams.aligned_gain * rate_g)
    total = np.ones(thresholds.shape)
    for a_k, b_k in zip(params.gains.gains, params.gains.probs):
        if a_k > 0 and b_k > 0:
            total += b_k * np.asarray(rho(thresholds * a_k * scale, m.beta2))
    if params.sigma2 > 0:
        nu = params.near_field_intensity
        r0 = m.d0
        x = params.mu * thresholds * r0 ** m.beta2 / (m.far_coefficient * params.beams.aligned_gain)
        total += 0.5 * m.beta2 * x * params.sigma2 / nu
    return total


def _coverage_many(thresholds, params, fading, spec):
    """Unclamped coverage and error bound for an array of thresholds.

    The near part ``s in (0, nu)`` is integrated in ``y = log(nu / s)`` and
    the far part in ``w = (s - nu) c`` with ``c`` from
    :func:`_far_decay_rate`.  At large thresholds the integrand is a narrow
    spike at ``s = 0`` or ``s = nu``; both maps give it unit width.
    """
    thresholds = np.atleast_1d(np.asarray(thresholds, dtype=float))
    nu = params.near_field_intensity
    rate = _far_decay_rate(thresholds, params, fading)

    def near(y, idx):
        s = nu * np.exp(-y)
        val, err = _conditional_coverage(s, thresholds[idx], params, fading, spec)
        w = np.exp(-s) * s
        return val * w, err * w

    def far(w, idx):
        c = rate[idx]
        s = nu + w / c
        val, err = _conditional_coverage(s, thresholds[idx], params, fading, spec)
        wt = np.exp(-s) / c
        return val * wt, err * wt

    n = thresholds.size
    # the exp(-s) weight lives on s = O(1): give the rule break points there
    points = [math.log(nu / p) for p in (1.0, 4.0, 16.0, 48.0) if p < nu]
    nv, ne = quad_batch(near, 0.0, np.inf, n, spec, points=points, scale=4.0, with_error=True)
    fv, fe = quad_batch(far, 0.0, np.inf, n, spec, scale=1.0, with_error=True)
    return nv + fv, ne + fe


def coverage_probability(params, fading=None, spec=DEFAULT_SPEC, threshold=None):
    """Coverage ``P[SINR > T]`` averaged over the nearest-BS distance.

    ``fading`` describes the interferers (default: exponential with rate
    ``params.mu``); the serving link is always exponential with rate
    ``params.mu``.  ``threshold`` overrides ``params.threshold``.

    Clamping to ``[0, 1]`` is added to ``est_abs_error``.
    """
    fading = _default_fading(params, fading)
    t = params.threshold if threshold is None else float(threshold)
    raw, err = (float(v[0]) for v in _coverage_many(t, params, fading, spec))
    value = min(max(raw, 0.0), 1.0)
    return CoverageResult(value, err + abs(raw - value))


def ase(params, fading=None, spec=DEFAULT_SPEC):
    """Constrained ASE ``lam E[log2(1 + SINR) 1{SINR >= T}]`` in bits/s/Hz/m^2.

    Uses ``E[log(1+S) 1{S >= T}] = int_{log(1+T)}^inf P[S > e**t - 1] dt
    + log(1+T) P[S >= T]``.  The inner coverages for all outer nodes of a
    round are integrated together by :func:`quad_batch`.
    """
    fading = _default_fading(params, fading)
    t0 = math.log1p(params.threshold)

    def integrand(t):
        vals = np.zeros(t.shape)
        errs = np.zeros(t.shape)
        # thresholds beyond e**700 are never met
        ok = t < _T_MAX
        if np.any(ok):
            vals[ok], errs[ok] = _coverage_many(np.expm1(t[ok]), params, fading, spec)
        return vals, errs

    tail = quad(integrand, t0, np.inf, spec, scale=4.0, with_error=True)
    pc, pc_err = (float(v[0]) for v in _coverage_many(params.threshold, params, fading, spec))
    lam = params.density
    value = lam * LOG2E * (tail.value + t0 * pc)
    err = lam * LOG2E * (tail.abs_error + t0 * pc_err)
    clamped = max(value, 0.0)
    return AseResult(clamped, err + abs(value - clamped))


# ---------------------------------------------------------------------------
# Interference-limited closed forms
# ---------------------------------------------------------------------------

def _check_interference_limited(params):
    problems = []
    if params.sigma2 != 0:
        problems.append("sigma2 must be 0")
    if params.beams.side_bs != 0 or params.beams.side_ue != 0:
        problems.append("side-lobe gains must be 0")
    if params.model.beta1 != 0:
        problems.append("beta1 must be 0")
    if problems:
        raise PreconditionError("closed form needs " + ", ".join(problems))


def _closed_form_coverage(q, nu, threshold, beta2):
    T = np.asarray(threshold, dtype=float)
    tau = T / (1.0 + T)
    r = np.asarray(rho(T, beta2))
    # log(1 / (1 - q tau)) without cancellation when q = 1 and T is large
    log_inv = np.log1p(T) - np.log1p(T * (1.0 - q))
    first = np.exp(-q * nu * (tau + r) + log_inv)
    second = q * (tau + r) / (1.0 + q * r) * np.exp(-nu * (1.0 + q * r) + log_inv)
    return first - second


def coverage_simplified(params):
    """Closed-form coverage for the interference-limited, main-lobe-only, flat-near-field case.

    Requires ``sigma2 = 0``, zero side lobes and ``beta1 = 0``; interferers
    are taken to fade exponentially with the serving rate.
    """
    _check_interference_limited(params)
    q = params.beams.alignment_probability
    return float(_closed_form_coverage(q, params.near_field_intensity, params.threshold,
                                       params.model.beta2))


def ase_simplified(params, spec=DEFAULT_SPEC):
    """Constrained ASE under the same conditions as :func:`coverage_simplified`.

    Returns :class:`AseResult`; only the outer threshold integral is numeric.
    """
    _check_interference_limited(params)
    q = params.beams.alignment_probability
    nu = params.near_field_intensity
    beta2 = params.model.beta2

    def integrand(t):
        out = np.zeros(t.shape)
        ok = t < _T_MAX
        out[ok] = _closed_form_coverage(q, nu, np.expm1(t[ok]), beta2)
        return out

    t0 = math.log1p(params.threshold)
    tail = quad(integrand, t0, np.inf, spec, scale=4.0)
    pc = float(_closed_form_coverage(q, nu, params.threshold, beta2))
    lam = params.density
    value = lam * LOG2E * (tail.value + t0 * pc)
    return AseResult(max(value, 0.0), lam * LOG2E * tail.abs_error + abs(min(value, 0.0)))
