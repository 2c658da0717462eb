"""Dense-network limits, beam adaptation and near-field sensitivity.

Two places where the literature's constants are ambiguous are exposed as
switches instead of being silently resolved:

* :class:`MuConvention` picks where the fading rate enters the adapted
  dense limit.  ``PAPER`` multiplies the interference term by ``mu`` (so the
  coverage exponent carries ``mu**2``); ``CAMPBELL`` uses the mean
  interferer fade ``1/mu`` that Campbell's theorem gives, which makes the
  coverage limit independent of ``mu``.
* ``tail`` in :func:`dense_coverage_upper_bound` picks ``lam pi d0`` or
  ``lam pi d0**2`` in the far-serving term of the bound.

``FINDINGS.md`` at the repository root records which reading the Monte
Carlo oracle supports.
"""

from dataclasses import dataclass
import enum
import math

import numpy as np

from .analytic import _closed_form_coverage
from .errors import DomainError, InfeasibleAdaptationError, PreconditionError
from .model import BeamPattern, TWO_PI, gamma_moment
from .special import DEFAULT_SPEC, powerlaw_kernel, quad, rho


class MuConvention(str, enum.Enum):
    PAPER = "paper"
    CAMPBELL = "campbell"


class TailConvention(str, enum.Enum):
    PAPER = "paper"
    D0SQ = "d0sq"


def _fading_factor(mu, convention):
    convention = MuConvention(convention)
    return TWO_PI * mu if convention is MuConvention.PAPER else TWO_PI / mu


# ---------------------------------------------------------------------------
# Vanishing coverage bound
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundTerms:
    """Unclamped pieces of the dense coverage bound."""

    near: float
    tail: float

    @property
    def raw(self):
        return self.near + self.tail

    @property
    def value(self):
        return min(max(self.raw, 0.0), 1.0)


def dense_coverage_bound_terms(params, tail=TailConvention.PAPER, spec=DEFAULT_SPEC):
    """Both terms of the dense coverage bound, before clamping.

    near
        ``lam pi int_0^{d0^2} exp(-lam pi q u (1 + int_1^{d0^2/u} T/(T + t**(beta1/2)) dt)) du``
        with ``q`` the beam alignment probability.  It bounds the chance of
        being served inside ``d0`` and beating the aligned near-field
        interferers alone.
    tail
        ``exp(-lam pi d0) / (lam pi d0)``, or with ``tail="d0sq"`` the same
        expression in ``lam pi d0**2``.

    Side lobes, noise and far-field interference only lower coverage, so the
    sum bounds coverage for any of them; exponential interferer fading is
    assumed.
    """
    tail = TailConvention(tail)
    m = params.model
    lam_pi = params.density * math.pi
    nu = lam_pi * m.d0 ** 2
    q = params.beams.alignment_probability
    T = params.threshold
    beta1 = m.beta1

    # in s = lam pi u:  int_0^nu exp(-q s (1 + J(nu / s))) ds
    def integrand(s):
        s = np.asarray(s, dtype=float)
        upper = nu / s
        if beta1 == 0:
            inner = np.maximum(upper - 1.0, 0.0) * T / (T + 1.0)
        else:
            inner = powerlaw_kernel(beta1 / 2.0, 1.0 / T, 1.0, np.maximum(upper, 1.0))
        return np.exp(-q * s * (1.0 + inner))

    points = [p for p in (1.0, 10.0, 100.0, 1000.0) if p < nu]
    near = quad(integrand, 0.0, nu, spec, points=points).value
    x = lam_pi * (m.d0 if tail is TailConvention.PAPER else m.d0 ** 2)
    tail_term = math.exp(-x) / x if x > 0 else math.inf
    return BoundTerms(near, tail_term)


def dense_coverage_upper_bound(params, tail=TailConvention.PAPER, spec=DEFAULT_SPEC):
    """Upper bound on coverage that vanishes with density when ``beta1 <= 2``, clamped to [0, 1]."""
    return dense_coverage_bound_terms(params, tail, spec).value


# ---------------------------------------------------------------------------
# Dense limit of lam * SINR and beam adaptation
# ---------------------------------------------------------------------------

def _require_flat_near_field(params):
    if params.model.beta1 != 0:
        raise PreconditionError("dense limits need beta1 = 0")


def sinr_density_limit(params, h_value, convention=MuConvention.PAPER, fading_factor=None):
    """Limit of ``lam * SINR`` as density grows with a fixed beam pattern.

    ``N_B N_U alpha0 h / (E[G] c gamma)`` with ``gamma`` the plane-integrated
    path gain and ``c = 2 pi mu`` (``PAPER``) or ``2 pi / mu``
    (``CAMPBELL``).  ``fading_factor`` overrides ``c`` directly.
    """
    _require_flat_near_field(params)
    gamma = gamma_moment(params.model)
    c = _fading_factor(params.mu, convention) if fading_factor is None else float(fading_factor)
    eg = sum(a * b for a, b in zip(params.gains.gains, params.gains.probs))
    return params.beams.aligned_gain * params.model.alpha0 * h_value / (eg * c * gamma)


def adapted_expected_gain(K, density):
    """Target normalized mean interferer gain ``K / density``; must not exceed 1."""
    if not K > 0 or not density > 0:
        raise DomainError("K and density must be positive")
    ratio = K / density
    if ratio > 1.0:
        raise InfeasibleAdaptationError(
            f"K/density = {ratio:.6g} > 1: no pattern has more mean gain than omni")
    return ratio


def symmetric_beamwidth(K, density, epsilon):
    """Common BS/UE beamwidth that meets ``E[G]/(N_B N_U) = K/density``.

    ``theta = 2 pi (epsilon sqrt(K/density) - 1) / (epsilon - 1)`` for a
    front-back ratio ``epsilon``; ``epsilon = inf`` (no side lobes) gives
    ``2 pi sqrt(K/density)``.
    """
    if not epsilon > 1:
        raise DomainError("front-back ratio must exceed 1")
    if not K > 0 or not density > 0:
        raise DomainError("K and density must be positive")
    root = math.sqrt(K / density)
    if math.isinf(epsilon):
        theta = TWO_PI * root
    else:
        theta = TWO_PI * (epsilon * root - 1.0) / (epsilon - 1.0)
    if not 0 < theta <= TWO_PI * (1 + 1e-12):
        raise InfeasibleAdaptationError(
            f"beamwidth {theta:.6g} rad outside (0, 2 pi] for K={K:g}, density={density:g}")
    return min(theta, TWO_PI)


@dataclass(frozen=True)
class AdaptationSchedule:
    """Beam adaptation keeping ``E[G]/(N_B N_U) = K / density``.

    Both ends use the same beamwidth and front-back ratio.  ``K`` is in
    BS per square meter like the densities.  Feasible densities are
    ``[K, K epsilon**2)``.
    """

    K: float
    front_back_ratio: float = math.inf

    def __post_init__(self):
        if not self.K > 0:
            raise DomainError("K must be positive")
        if not self.front_back_ratio > 1:
            raise DomainError("front-back ratio must exceed 1")

    @property
    def density_range(self):
        return (self.K, self.K * self.front_back_ratio ** 2)

    def beamwidth(self, density):
        return symmetric_beamwidth(self.K, density, self.front_back_ratio)

    def beams(self, density, main_bs, main_ue):
        """Pattern with the scheduled beamwidth and side lobes ``main / epsilon``."""
        theta = self.beamwidth(density)
        eps = self.front_back_ratio
        side = (lambda g: 0.0) if math.isinf(eps) else (lambda g: g / eps)
        return BeamPattern(main_bs, side(main_bs), theta, main_ue, side(main_ue), theta)

    def apply(self, params):
        """``params`` with its beams replaced by the scheduled pattern at its density."""
        b = params.beams
        return params.with_(beams=self.beams(params.density, b.main_bs, b.main_ue))


@dataclass(frozen=True)
class LogValue:
    """A possibly underflowing positive quantity with its natural log."""

    value: float
    log_value: float


def adapted_coverage_limit(K, params, convention=MuConvention.PAPER):
    """Dense coverage limit under adaptation: ``exp(-2 pi K T gamma / alpha0 * f)``.

    ``f = mu**2`` for ``PAPER`` and ``1`` for ``CAMPBELL``.  The log value is
    exact even when the probability underflows.
    """
    _require_flat_near_field(params)
    if not K > 0:
        raise DomainError("K must be positive")
    gamma = gamma_moment(params.model)
    f = params.mu ** 2 if MuConvention(convention) is MuConvention.PAPER else 1.0
    log_value = -TWO_PI * K * params.threshold * gamma / params.model.alpha0 * f
    return LogValue(math.exp(log_value), log_value)


@dataclass(frozen=True)
class SlopeResult:
    """Per-density ASE slope; ``negative`` flags a log factor below zero."""

    value: float
    log_factor: float
    log_coverage: float
    negative: bool


def adapted_ase_slope(K, params, h_replacement, convention=MuConvention.PAPER):
    """Dense ASE slope under adaptation, with the fading draw replaced by a number.

    ``ln(alpha0 h / (c gamma) - 1) * exp(log coverage limit)`` with
    ``c = 2 pi mu`` or ``2 pi / mu``.  Raises :class:`DomainError` when the
    log argument is not positive.
    """
    limit = adapted_coverage_limit(K, params, convention)
    gamma = gamma_moment(params.model)
    c = _fading_factor(params.mu, convention)
    arg = params.model.alpha0 * h_replacement / (c * gamma) - 1.0
    if not arg > 0:
        raise DomainError(f"log argument {arg:.6g} is not positive")
    log_factor = math.log(arg)
    return SlopeResult(log_factor * limit.value, log_factor, limit.log_value, log_factor < 0)


def adapted_coverage_exact(K, params):
    """Dense coverage under adaptation without the small-threshold approximation.

    With no side lobes the aligned interferers are a PPP of density ``K``
    whatever the BS density, and the serving distance shrinks to 0, so the
    limit is ``exp(-pi K d0**2 (T/(1+T) + rho(T, beta2)))`` for a flat near
    field.  It agrees with :func:`adapted_coverage_limit` (``CAMPBELL``) to
    first order in ``T``.
    """
    _require_flat_near_field(params)
    m = params.model
    T = params.threshold
    return math.exp(-math.pi * K * m.d0 ** 2 * (T / (1.0 + T) + float(rho(T, m.beta2))))


# ---------------------------------------------------------------------------
# Near-field sensitivity of the closed-form coverage
# ---------------------------------------------------------------------------

def coverage_derivative_near_field(q, T, beta2, nu):
    """Derivative of the interference-limited coverage in ``nu = lam pi d0**2``.

    ``q (tau + rho) / (1 - q tau) * (exp(-nu (1 + q rho)) - exp(-q nu (tau + rho)))``
    with ``tau = T/(1+T)`` and ``rho = rho(T, beta2)``; negative for every
    ``q`` in (0, 1].
    """
    if not 0 < q <= 1:
        raise DomainError("q must lie in (0, 1]")
    if not T > 0 or not nu > 0:
        raise DomainError("T and nu must be positive")
    tau = T / (1.0 + T)
    r = float(rho(T, beta2))
    return q * (tau + r) / (1.0 - q * tau) * (math.exp(-nu * (1.0 + q * r)) - math.exp(-q * nu * (tau + r)))


def coverage_closed_form(q, T, beta2, nu):
    """Interference-limited coverage as a function of ``(q, T, beta2, nu)`` directly."""
    return float(_closed_form_coverage(q, nu, T, beta2))
