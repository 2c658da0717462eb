"""System model: dual-slope path loss, sectored beams and interferer gains.

All quantities are SI and linear scale.  Densities are BS per square meter;
use :data:`PER_KM2` to convert (``1000 * PER_KM2`` is 1000 BS/km^2).
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import DivergenceError, DomainError

PER_KM2 = 1e-6
TWO_PI = 2.0 * math.pi


def db_to_linear(db):
    """``10 ** (db / 10)``; accepts scalars or arrays."""
    return np.power(10.0, np.asarray(db, dtype=float) / 10.0) if np.ndim(db) else 10.0 ** (float(db) / 10.0)


def linear_to_db(value):
    """``10 log10(value)``; zero maps to ``-inf``."""
    with np.errstate(divide="ignore"):
        out = 10.0 * np.log10(np.asarray(value, dtype=float))
    return out if np.ndim(out) else float(out)


@dataclass(frozen=True)
class DualSlopeModel:
    """Path loss ``alpha0 r**-beta1`` below ``d0`` and ``alpha0 d0**(beta2-beta1) r**-beta2`` beyond."""

    alpha0: float
    beta1: float
    beta2: float
    d0: float

    def __post_init__(self):
        if not self.alpha0 > 0:
            raise DomainError("alpha0 must be positive")
        if not self.d0 > 0:
            raise DomainError("d0 must be positive")
        if not 0 <= self.beta1 <= self.beta2:
            raise DomainError("need 0 <= beta1 <= beta2")
        if not self.beta2 > 2:
            raise DomainError("far-field exponent beta2 must exceed 2")

    @property
    def far_coefficient(self):
        """``alpha0 d0**(beta2-beta1)``, the far-field law's prefactor."""
        return self.alpha0 * self.d0 ** (self.beta2 - self.beta1)

    def path_loss(self, r):
        return path_loss(r, self)


def path_loss(r, model):
    """Linear path gain at distance ``r`` (meters); vectorized.

    ``r = 0`` is only allowed when ``beta1 = 0``, where it returns ``alpha0``.
    """
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0) or np.any(np.isnan(r_arr)):
        raise DomainError("distance must be nonnegative")
    if model.beta1 > 0 and np.any(r_arr == 0):
        raise DomainError("path loss is infinite at r = 0 when beta1 > 0")
    with np.errstate(divide="ignore"):
        near = model.alpha0 * np.power(r_arr, -model.beta1)
        far = model.far_coefficient * np.power(r_arr, -model.beta2)
    out = np.where(r_arr < model.d0, near, far)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class BeamPattern:
    """Flat-top sectored patterns at the BS and UE.

    Gains are linear; beamwidths are radians in ``(0, 2 pi]``.
    """

    main_bs: float
    side_bs: float
    width_bs: float
    main_ue: float
    side_ue: float
    width_ue: float

    def __post_init__(self):
        for side, main, width, tag in (
            (self.side_bs, self.main_bs, self.width_bs, "bs"),
            (self.side_ue, self.main_ue, self.width_ue, "ue"),
        ):
            if not main > 0:
                raise DomainError(f"main_{tag} must be positive")
            if not 0 <= side <= main:
                raise DomainError(f"need 0 <= side_{tag} <= main_{tag}")
            if not 0 < width <= TWO_PI * (1 + 1e-12):
                raise DomainError(f"width_{tag} must lie in (0, 2 pi]")

    @property
    def alignment_probability(self):
        """Chance that both main lobes point at each other."""
        return self.width_bs * self.width_ue / (TWO_PI * TWO_PI)

    @property
    def aligned_gain(self):
        return self.main_bs * self.main_ue

    def swapped(self):
        """The same pattern with the BS and UE roles exchanged."""
        return BeamPattern(self.main_ue, self.side_ue, self.width_ue,
                           self.main_bs, self.side_bs, self.width_bs)


@dataclass(frozen=True)
class GainDistribution:
    """Four-point law of an interferer's combined antenna gain."""

    gains: tuple
    probs: tuple

    def __post_init__(self):
        g = tuple(float(v) for v in self.gains)
        p = tuple(float(v) for v in self.probs)
        object.__setattr__(self, "gains", g)
        object.__setattr__(self, "probs", p)
        if len(g) != 4 or len(p) != 4:
            raise DomainError("need exactly four mass points")
        if any(v < 0 for v in g):
            raise DomainError("gains must be nonnegative")
        if any(not 0 <= v <= 1 for v in p):
            raise DomainError("probabilities must lie in [0, 1]")
        if abs(math.fsum(p) - 1.0) > 4 * np.finfo(float).eps:
            raise DomainError(f"probabilities sum to {math.fsum(p)!r}, not 1")
        if not (g[0] >= g[1] >= g[3] and g[0] >= g[2] >= g[3]):
            raise DomainError("gains must be ordered aligned >= mixed >= side-side")

    def as_arrays(self):
        return np.array(self.gains), np.array(self.probs)


def gain_distribution(beams):
    """Mass points of ``G_i`` for an interferer with uniformly random beam directions."""
    pb = beams.width_bs / TWO_PI
    pu = beams.width_ue / TWO_PI
    # clip away the 1 + 1e-12 slack allowed on widths
    pb = min(pb, 1.0)
    pu = min(pu, 1.0)
    gains = (
        beams.main_bs * beams.main_ue,
        beams.main_bs * beams.side_ue,
        beams.side_bs * beams.main_ue,
        beams.side_bs * beams.side_ue,
    )
    probs = (pb * pu, pb * (1.0 - pu), (1.0 - pb) * pu, (1.0 - pb) * (1.0 - pu))
    # the products sum to 1 up to rounding; put the residue on the largest mass
    residue = 1.0 - math.fsum(probs)
    probs = list(probs)
    big = int(np.argmax(probs))
    probs[big] += residue
    return GainDistribution(gains, tuple(probs))


def expected_gain(dist):
    """Mean interferer gain ``sum_k a_k b_k``."""
    return math.fsum(a * b for a, b in zip(dist.gains, dist.probs))


def gamma_moment(model):
    """Plane-integrated path gain ``int_0^inf r L(r) dr``.

    Finite only when ``beta1 < 2 < beta2``.
    """
    if model.beta1 >= 2:
        raise DivergenceError("int r L(r) dr diverges at 0 for beta1 >= 2")
    if model.beta2 <= 2:
        raise DivergenceError("int r L(r) dr diverges at infinity for beta2 <= 2")
    d = model.d0 ** (2.0 - model.beta1)
    return model.alpha0 * d * (1.0 / (2.0 - model.beta1) + 1.0 / (model.beta2 - 2.0))


@dataclass(frozen=True)
class NetworkParams:
    """One network operating point.

    density
        BS density per square meter.
    mu
        Rate of the exponential serving-link fading (mean ``1/mu``).
    sigma2
        Noise power normalized by transmit power.
    threshold
        SINR threshold, linear.
    """

    density: float
    mu: float
    sigma2: float
    threshold: float
    model: DualSlopeModel
    beams: BeamPattern
    gains: GainDistribution = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.density > 0:
            raise DomainError("density must be positive")
        if not self.mu > 0:
            raise DomainError("mu must be positive")
        if not self.sigma2 >= 0:
            raise DomainError("sigma2 must be nonnegative")
        if not self.threshold > 0:
            raise DomainError("threshold must be positive")
        object.__setattr__(self, "gains", gain_distribution(self.beams))

    def with_(self, **changes):
        """Copy with fields replaced; ``beta1=...`` style model fields are allowed too."""
        model_keys = {"alpha0", "beta1", "beta2", "d0"}
        beam_keys = {"main_bs", "side_bs", "width_bs", "main_ue", "side_ue", "width_ue"}
        mk = {k: changes.pop(k) for k in list(changes) if k in model_keys}
        bk = {k: changes.pop(k) for k in list(changes) if k in beam_keys}
        model = changes.pop("model", self.model)
        beams = changes.pop("beams", self.beams)
        if mk:
            model = DualSlopeModel(**{**model.__dict__, **mk})
        if bk:
            beams = BeamPattern(**{**beams.__dict__, **bk})
        base = dict(density=self.density, mu=self.mu, sigma2=self.sigma2,
                    threshold=self.threshold, model=model, beams=beams)
        base.update(changes)
        return NetworkParams(**base)

    @property
    def near_field_intensity(self):
        """Mean number of BSs closer than ``d0``: ``density * pi * d0**2``."""
        return self.density * math.pi * self.model.d0 ** 2


def noise_from_snr_at_d0(model, snr_db):
    """Normalized noise that gives ``snr_db`` at distance ``d0`` without beam gains."""
    return model.alpha0 * model.d0 ** (-model.beta1) / db_to_linear(snr_db)


def default_beams():
    """Directional reference pattern: 20/0 dB over 30 degrees at the BS, 10/-10 dB over 90 at the UE."""
    return BeamPattern(main_bs=100.0, side_bs=1.0, width_bs=math.pi / 6,
                       main_ue=10.0, side_ue=0.1, width_ue=math.pi / 2)


def default_params(beta1=2.0, density_per_km2=1000.0):
    """Reference operating point used by the figure presets.

    ``beta2 = 4``, ``d0 = 10 m``, ``alpha0 = 0 dB``, ``mu = 1``, ``T = 7 dB``
    and an SNR of 20 dB at ``d0``.
    """
    model = DualSlopeModel(alpha0=1.0, beta1=float(beta1), beta2=4.0, d0=10.0)
    return NetworkParams(
        density=density_per_km2 * PER_KM2,
        mu=1.0,
        sigma2=noise_from_snr_at_d0(model, 20.0),
        threshold=db_to_linear(7.0),
        model=model,
        beams=default_beams(),
    )
