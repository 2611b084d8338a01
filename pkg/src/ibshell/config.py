"""Scenario configuration: ``key = value`` text with per-scenario defaults.

Units follow each scenario: the relaxation runs are dimensionless, the red
blood cell and bleb runs use micrometres, seconds and piconewtons.
"""

from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass, field

__all__ = ["ConfigError", "ScenarioConfig", "default_config", "parse_config", "SCENARIOS"]

SCENARIOS = ("relax", "rbc", "bleb", "converge", "forces", "weights")


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    """All run parameters. ``None`` marks values derived at build time."""

    scenario: str = "relax"
    method: str = "shvd"
    # shape
    shape: str = "ellipsoid"
    a: float = 1.2
    b: float | None = None
    c: float | None = None
    B: float = 0.25
    Vf: float | None = None
    R_rbc: float = 3.91
    # moduli
    Gs: float = 1.0
    A: float = 1.0
    sigma: float = 1.0
    k_bend: float = 0.0
    k_teth: float = 2.45
    k_adh: float = 3.0e4
    k_cortex: float = 87.0
    xi: float = 10.0
    mu: float = 1.0
    # grid and discretization
    L: float = 2.0
    eta: int = 32
    m: int = 64
    n: int = 2025
    dt: float | None = None
    t_end: float = 3.0
    t_equil: float = 3.0
    equil_speed: float = 0.01
    # red blood cell
    cell: bool = True
    cell_x: float = -8.0
    background_force: float = 0.08
    capillary_radius: float = 5.0
    capillary_half_length: float = 8.0
    capillary_spacing: float | None = None
    # bleb
    bleb: bool = True
    bleb_angle: float = 2.0 * math.pi / 25.0
    r_mem: float = 10.0
    r_cortex: float = 9.99
    # numerics and output
    net_force_rtol: float = 1.0e-3
    output_every: int = 1
    snapshot_every: int = 0
    etas: tuple = field(default=(32, 48, 64))
    sizes: tuple = field(default=(2025, 4624, 8281))
    m_values: tuple = field(default=(4, 81, 225))

    @property
    def time_step(self):
        return self.dt if self.dt is not None else 1.0 / (2.0 * self.eta)

    @property
    def steps(self):
        return int(round(self.t_end / self.time_step))

    def to_dict(self):
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in dataclasses.asdict(self).items()}


_DEFAULTS = {
    "relax": dict(),
    "converge": dict(m=64),
    "forces": dict(shape="ellipsoid", a=1.1, m=81, n=529, Gs=1.0, A=1.0, sigma=1.0,
                   sizes=(529, 2025, 4624, 8281)),
    "weights": dict(),
    "rbc": dict(
        shape="rbc", Gs=2.5, A=50.0, sigma=0.0, k_bend=0.1, mu=1.2e-3, L=12.0, eta=32,
        m=225, n=2025, dt=5.0e-5, t_end=0.05, output_every=20,
    ),
    "bleb": dict(
        shape="sphere", Gs=40.0, A=1.0, sigma=40.0, k_bend=0.0, mu=1.0, L=15.0, eta=32,
        m=4761, n=4761, dt=1.0e-4, t_end=2.0, output_every=100,
    ),
}

_TUPLES = ("etas", "sizes", "m_values")
_POSITIVE = {"L", "mu", "t_end", "R_rbc", "r_mem", "r_cortex", "xi", "capillary_radius", "capillary_half_length"}
_NONNEG = {"Gs", "A", "sigma", "k_bend", "k_teth", "k_adh", "k_cortex", "background_force", "B", "t_equil", "equil_speed",
           "net_force_rtol", "snapshot_every"}


def default_config(scenario):
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}")
    cfg = ScenarioConfig(scenario=scenario)
    for k, v in _DEFAULTS[scenario].items():
        setattr(cfg, k, v)
    return cfg


def _convert(key, raw, ftype):
    raw = raw.strip()
    try:
        if key in _TUPLES:
            return tuple(int(x) for x in raw.replace(",", " ").split())
        if ftype in ("bool",):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if ftype == "int":
            return int(raw)
        if ftype == "str":
            return raw
        if raw.lower() == "none":
            return None
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {ftype}") from None


def parse_config(text, scenario=None):
    """Parse ``key = value`` lines (``#`` comments) into a validated config.

    Parameters
    ----------
    text : str
    scenario : str, optional
        Scenario whose defaults apply; a ``scenario`` key in the text must
        agree with it when both are given.
    """
    cp = configparser.ConfigParser(comment_prefixes=("#",), inline_comment_prefixes=("#",),
                                   interpolation=None, delimiters=("=",))
    cp.optionxform = str
    try:
        cp.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    items = dict(cp["run"])
    named = items.pop("scenario", None)
    if named is not None:
        named = named.strip()
        if scenario is not None and named != scenario:
            raise ConfigError(f"scenario: config says {named!r} but {scenario!r} was requested")
        scenario = named
    cfg = default_config(scenario or "relax")
    types = {f.name: f.type for f in dataclasses.fields(ScenarioConfig)}
    for key, raw in items.items():
        if key not in types:
            raise ConfigError(f"{key}: unknown key")
        ftype = types[key].split(" |")[0]
        setattr(cfg, key, _convert(key, raw, ftype))
    validate(cfg)
    return cfg


def validate(cfg):
    for key in _POSITIVE:
        v = getattr(cfg, key)
        if not (v > 0 and math.isfinite(v)):
            raise ConfigError(f"{key}: must be positive, got {v}")
    for key in _NONNEG:
        v = getattr(cfg, key)
        if not (v >= 0 and math.isfinite(v)):
            raise ConfigError(f"{key}: must be nonnegative, got {v}")
    for key in ("dt", "b", "c", "Vf", "capillary_spacing"):
        v = getattr(cfg, key)
        if v is not None and not (v > 0 and math.isfinite(v)):
            raise ConfigError(f"{key}: must be positive, got {v}")
    if cfg.method not in ("shvd", "ldsm"):
        raise ConfigError(f"method: must be shvd or ldsm, got {cfg.method!r}")
    if cfg.eta < 8 or cfg.eta % 2:
        raise ConfigError(f"eta: must be even and >= 8, got {cfg.eta}")
    for key in ("m", "n", "output_every"):
        if getattr(cfg, key) < 1:
            raise ConfigError(f"{key}: must be at least 1")
    if math.isqrt(cfg.m) ** 2 != cfg.m:
        raise ConfigError(f"m: must be a perfect square (N+1)^2, got {cfg.m}")
    if cfg.scenario == "bleb" and cfg.r_cortex >= cfg.r_mem:
        raise ConfigError("r_cortex: must be smaller than r_mem")
    if not (0 < cfg.bleb_angle < math.pi):
        raise ConfigError(f"bleb_angle: must lie in (0, pi), got {cfg.bleb_angle}")
    return cfg
