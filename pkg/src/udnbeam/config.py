"""Run configuration for the command-line tool.

A run is described by one YAML document.  Users give densities in BS/km^2,
distances in meters, gains and thresholds in dB and beamwidths in degrees;
:class:`RunConfig` converts to the SI, linear-scale values used by the
library.  Every key is validated and unknown keys are rejected with the
offending path in the message.

Example::

    scenario: general          # general | corollary | adapted
    sweep:
      var: density_per_km2
      start: 1
      stop: 1.0e6
      num: 25
      scale: log
    params:
      beta1: 2
    sim:
      trials: 10000
      seed: 7
    output:
      csv: sweep.csv
"""

from dataclasses import dataclass, field, replace
import math
from pathlib import Path

import re

import numpy as np
import yaml

from .asymptotics import AdaptationSchedule, MuConvention, TailConvention
from .errors import ConfigError, DomainError
from .model import (PER_KM2, BeamPattern, DualSlopeModel, NetworkParams, db_to_linear,
                    noise_from_snr_at_d0)
from .montecarlo import SimConfig

SCENARIOS = ("general", "corollary", "adapted")

SWEEP_VARS = {
    "density_per_km2": "BS/km^2",
    "alignment_probability": "",
    "threshold_db": "dB",
    "beta1": "",
    "d0_m": "m",
}



class _Loader(yaml.SafeLoader):
    """Safe loader that also reads ``1e4`` and ``1.0e6`` as floats (YAML 1.2)."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
                    |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
                    |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
                    |[-+]?\.(?:inf|Inf|INF)
                    |\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."))

# reference operating point, in user units
DEFAULT_PARAMS = {
    "density_per_km2": 1000.0,
    "alpha0_db": 0.0,
    "beta1": 2.0,
    "beta2": 4.0,
    "d0_m": 10.0,
    "mu": 1.0,
    "threshold_db": 7.0,
    "snr_at_d0_db": 20.0,
    "main_bs_db": 20.0,
    "side_bs_db": 0.0,
    "width_bs_deg": 30.0,
    "main_ue_db": 10.0,
    "side_ue_db": -10.0,
    "width_ue_deg": 90.0,
}

# keys that may be null: no noise, no side lobe
_NULLABLE = {"snr_at_d0_db", "side_bs_db", "side_ue_db"}

DEFAULT_SIM = {"enabled": True, "trials": 100_000, "seed": 0, "window_radius_m": None, "workers": 1}
DEFAULT_ADAPTATION = {"K_per_km2": 1.0, "front_back_ratio_db": None}
DEFAULT_CONVENTIONS = {"mu": "paper", "thm3_tail": "paper"}
DEFAULT_OUTPUT = {"csv": "sweep.csv", "plot": True}
_SWEEP_KEYS = {"var", "values", "start", "stop", "num", "scale"}
_TOP_KEYS = {"scenario", "sweep", "params", "adaptation", "sim", "conventions", "output"}


def _number(value, where, allow_null=False):
    if value is None and allow_null:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _section(raw, name, defaults):
    data = raw.get(name, {})
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{name}: expected a mapping")
    unknown = sorted(set(data) - set(defaults))
    if unknown:
        raise ConfigError(f"{name}.{unknown[0]}: unknown key")
    return {**defaults, **data}


def _side_lobe(db):
    return 0.0 if db is None or db == -math.inf else db_to_linear(db)


@dataclass(frozen=True)
class RunConfig:
    """A validated sweep description.  All fields are in user units."""

    scenario: str = "general"
    sweep_var: str = "density_per_km2"
    grid: tuple = tuple(float(v) for v in np.logspace(0, 6, 13))
    params: dict = field(default_factory=lambda: dict(DEFAULT_PARAMS))
    adaptation: dict = field(default_factory=lambda: dict(DEFAULT_ADAPTATION))
    sim: dict = field(default_factory=lambda: dict(DEFAULT_SIM))
    conventions: dict = field(default_factory=lambda: dict(DEFAULT_CONVENTIONS))
    output: dict = field(default_factory=lambda: dict(DEFAULT_OUTPUT))

    def __post_init__(self):
        self.validate()

    # -- construction -----------------------------------------------------

    @classmethod
    def from_dict(cls, raw):
        if not isinstance(raw, dict):
            raise ConfigError("config: expected a mapping at the top level")
        unknown = sorted(set(raw) - _TOP_KEYS)
        if unknown:
            raise ConfigError(f"{unknown[0]}: unknown key")
        scenario = raw.get("scenario", "general")
        sweep = raw.get("sweep", {}) or {}
        if not isinstance(sweep, dict):
            raise ConfigError("sweep: expected a mapping")
        bad = sorted(set(sweep) - _SWEEP_KEYS)
        if bad:
            raise ConfigError(f"sweep.{bad[0]}: unknown key")
        var = sweep.get("var", "density_per_km2")
        grid = _parse_grid(sweep)
        return cls(
            scenario=scenario,
            sweep_var=var,
            grid=grid,
            params=_section(raw, "params", DEFAULT_PARAMS),
            adaptation=_section(raw, "adaptation", DEFAULT_ADAPTATION),
            sim=_section(raw, "sim", DEFAULT_SIM),
            conventions=_section(raw, "conventions", DEFAULT_CONVENTIONS),
            output=_section(raw, "output", DEFAULT_OUTPUT),
        )

    @classmethod
    def load(cls, path):
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        try:
            raw = yaml.load(text, Loader=_Loader)
        except yaml.YAMLError as exc:
            raise ConfigError(f"config is not valid YAML: {exc}") from None
        return cls.from_dict({} if raw is None else raw)

    def with_overrides(self, trials=None, seed=None, no_mc=False, mu_convention=None,
                       thm3_tail=None, out=None, workers=None):
        """Copy with command-line flags applied on top of file values."""
        sim = dict(self.sim)
        if trials is not None:
            sim["trials"] = trials
        if seed is not None:
            sim["seed"] = seed
        if workers is not None:
            sim["workers"] = workers
        if no_mc:
            sim["enabled"] = False
        conv = dict(self.conventions)
        if mu_convention is not None:
            conv["mu"] = mu_convention
        if thm3_tail is not None:
            conv["thm3_tail"] = thm3_tail
        output = dict(self.output)
        if out is not None:
            output["csv"] = str(out)
        return replace(self, sim=sim, conventions=conv, output=output)

    # -- validation -------------------------------------------------------

    def validate(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario: must be one of {', '.join(SCENARIOS)}, got {self.scenario!r}")
        if self.sweep_var not in SWEEP_VARS:
            raise ConfigError(f"sweep.var: must be one of {', '.join(SWEEP_VARS)}, got {self.sweep_var!r}")
        if not self.grid:
            raise ConfigError("sweep: grid is empty")
        for key, value in self.params.items():
            if key not in DEFAULT_PARAMS:
                raise ConfigError(f"params.{key}: unknown key")
            _number(value, f"params.{key}", allow_null=key in _NULLABLE)
        p = self.params
        for key in ("density_per_km2", "d0_m", "mu", "width_bs_deg", "width_ue_deg"):
            if not p[key] > 0:
                raise ConfigError(f"params.{key}: must be positive")
        for key in ("width_bs_deg", "width_ue_deg"):
            if p[key] > 360:
                raise ConfigError(f"params.{key}: must not exceed 360")
        if not 0 <= p["beta1"] <= p["beta2"]:
            raise ConfigError("params.beta1: need 0 <= beta1 <= beta2")
        if not p["beta2"] > 2:
            raise ConfigError("params.beta2: must exceed 2")
        for side, main in (("side_bs_db", "main_bs_db"), ("side_ue_db", "main_ue_db")):
            if p[side] is not None and p[side] > p[main]:
                raise ConfigError(f"params.{side}: side lobe exceeds the main lobe")
        self._validate_grid()
        self._validate_scenario()
        self._validate_sim()
        for key, enum_type in (("mu", MuConvention), ("thm3_tail", TailConvention)):
            if self.conventions[key] not in {e.value for e in enum_type}:
                choices = ", ".join(e.value for e in enum_type)
                raise ConfigError(f"conventions.{key}: must be one of {choices}")
        if not isinstance(self.output["csv"], str) or not self.output["csv"]:
            raise ConfigError("output.csv: expected a file path")
        if not isinstance(self.output["plot"], bool):
            raise ConfigError("output.plot: expected true or false")

    def _validate_grid(self):
        for v in self.grid:
            if not math.isfinite(v):
                raise ConfigError("sweep: grid values must be finite")
        var = self.sweep_var
        lo = min(self.grid)
        hi = max(self.grid)
        if var in ("density_per_km2", "d0_m") and not lo > 0:
            raise ConfigError(f"sweep: {var} values must be positive")
        if var == "alignment_probability" and not (lo > 0 and hi <= 1):
            raise ConfigError("sweep: alignment_probability values must lie in (0, 1]")
        if var == "beta1" and not (lo >= 0 and hi <= self.params["beta2"]):
            raise ConfigError("sweep: beta1 values must lie in [0, beta2]")

    def _validate_scenario(self):
        p = self.params
        if self.scenario == "corollary":
            if p["snr_at_d0_db"] is not None:
                raise ConfigError("params.snr_at_d0_db: corollary scenario needs null (no noise)")
            for key in ("side_bs_db", "side_ue_db"):
                if _side_lobe(p[key]) != 0:
                    raise ConfigError(f"params.{key}: corollary scenario needs null (no side lobe)")
            if p["beta1"] != 0 or (self.sweep_var == "beta1" and any(v != 0 for v in self.grid)):
                raise ConfigError("params.beta1: corollary scenario needs beta1 = 0")
        if self.scenario == "adapted":
            a = self.adaptation
            if self.sweep_var in ("alignment_probability",):
                raise ConfigError("sweep.var: adapted scenario sets the beamwidth itself")
            k = _number(a["K_per_km2"], "adaptation.K_per_km2")
            if not k > 0:
                raise ConfigError("adaptation.K_per_km2: must be positive")
            fb = _number(a["front_back_ratio_db"], "adaptation.front_back_ratio_db", allow_null=True)
            if fb is not None and not fb > 0:
                raise ConfigError("adaptation.front_back_ratio_db: must be positive")
        elif self.adaptation != DEFAULT_ADAPTATION:
            raise ConfigError("adaptation: only used by the adapted scenario")

    def _validate_sim(self):
        s = self.sim
        if not isinstance(s["enabled"], bool):
            raise ConfigError("sim.enabled: expected true or false")
        for key in ("trials", "seed", "workers"):
            v = s[key]
            if isinstance(v, bool) or not isinstance(v, int):
                raise ConfigError(f"sim.{key}: expected an integer")
        if s["trials"] < 1:
            raise ConfigError("sim.trials: must be positive")
        if not 0 <= s["seed"] < 2 ** 64:
            raise ConfigError("sim.seed: must be an unsigned 64-bit integer")
        if s["workers"] < 1:
            raise ConfigError("sim.workers: must be positive")
        r = _number(s["window_radius_m"], "sim.window_radius_m", allow_null=True)
        if r is not None and not r > 0:
            raise ConfigError("sim.window_radius_m: must be positive")

    # -- conversion -------------------------------------------------------

    def user_params(self, value):
        """User-unit parameter dict at one grid value."""
        p = dict(self.params)
        if self.sweep_var == "alignment_probability":
            width = 360.0 * math.sqrt(value)
            p["width_bs_deg"] = width
            p["width_ue_deg"] = width
        else:
            p[self.sweep_var] = float(value)
        return p

    def network_params(self, value):
        """:class:`NetworkParams` (SI, linear) at one grid value.

        Raises :class:`ConfigError` for an invalid point and
        :class:`InfeasibleAdaptationError` when the beam schedule cannot
        reach the density.
        """
        p = self.user_params(value)
        try:
            model = DualSlopeModel(alpha0=db_to_linear(p["alpha0_db"]), beta1=p["beta1"],
                                   beta2=p["beta2"], d0=p["d0_m"])
            sigma2 = 0.0 if p["snr_at_d0_db"] is None else noise_from_snr_at_d0(model, p["snr_at_d0_db"])
            beams = BeamPattern(
                main_bs=db_to_linear(p["main_bs_db"]), side_bs=_side_lobe(p["side_bs_db"]),
                width_bs=math.radians(p["width_bs_deg"]),
                main_ue=db_to_linear(p["main_ue_db"]), side_ue=_side_lobe(p["side_ue_db"]),
                width_ue=math.radians(p["width_ue_deg"]),
            )
            params = NetworkParams(density=p["density_per_km2"] * PER_KM2, mu=p["mu"], sigma2=sigma2,
                                   threshold=db_to_linear(p["threshold_db"]), model=model, beams=beams)
        except DomainError as exc:
            raise ConfigError(f"params at {self.sweep_var}={value:g}: {exc}") from None
        if self.scenario == "adapted":
            params = self.schedule().apply(params)
        return params

    def schedule(self):
        a = self.adaptation
        fb = a["front_back_ratio_db"]
        return AdaptationSchedule(K=a["K_per_km2"] * PER_KM2,
                                  front_back_ratio=math.inf if fb is None else db_to_linear(fb))

    def sim_config(self):
        s = self.sim
        r = s["window_radius_m"]
        return SimConfig(trials=s["trials"], seed=s["seed"], workers=1,
                         window_radius=None if r is None else float(r))

    def resolved(self):
        """Plain dict of every setting, for provenance comments."""
        return {
            "scenario": self.scenario,
            "sweep": {"var": self.sweep_var, "values": list(self.grid)},
            "params": dict(self.params),
            "adaptation": dict(self.adaptation) if self.scenario == "adapted" else None,
            "sim": dict(self.sim),
            "conventions": dict(self.conventions),
            "output": dict(self.output),
        }


def _parse_grid(sweep):
    if "values" in sweep:
        extra = sorted({"start", "stop", "num", "scale"} & set(sweep))
        if extra:
            raise ConfigError(f"sweep.{extra[0]}: give either values or start/stop/num, not both")
        values = sweep["values"]
        if not isinstance(values, list) or not values:
            raise ConfigError("sweep.values: expected a nonempty list")
        return tuple(_number(v, "sweep.values") for v in values)
    if not {"start", "stop", "num"} <= set(sweep):
        if not sweep:
            return RunConfig.__dataclass_fields__["grid"].default
        missing = sorted({"start", "stop", "num"} - set(sweep))
        raise ConfigError(f"sweep.{missing[0]}: required without values")
    start = _number(sweep["start"], "sweep.start")
    stop = _number(sweep["stop"], "sweep.stop")
    num = sweep["num"]
    if isinstance(num, bool) or not isinstance(num, int) or num < 1:
        raise ConfigError("sweep.num: expected a positive integer")
    scale = sweep.get("scale", "linear")
    if scale == "log":
        if not (start > 0 and stop > 0):
            raise ConfigError("sweep.start: log grids need positive end points")
        grid = np.logspace(math.log10(start), math.log10(stop), num)
    elif scale == "linear":
        grid = np.linspace(start, stop, num)
    else:
        raise ConfigError(f"sweep.scale: must be log or linear, got {scale!r}")
    return tuple(float(v) for v in grid)

