"""Scenario configuration: dataclass, key-value config files, and overrides.

The config file format is a flat namespace of ``key = value`` lines with
``#`` comments.  ``M`` and ``beta`` accept comma-separated lists and define
the sweep axes; every other key is scalar.  Any key can be overridden from
the command line.
"""

from dataclasses import dataclass, fields, replace

from .detectors import SCHEMES
from .pilots import SUPPORTED_REUSE_FACTORS


def _as_tuple(value) -> tuple:
    if isinstance(value, (list, tuple)):
        return tuple(value)
    return (value,)


@dataclass(frozen=True)
class NetworkConfig:
    """All scenario parameters of one experiment (sweeps allowed on M, beta)."""

    M: tuple = (100,)  # BS antennas; sweep axis
    K: int = 10  # users per cell
    beta: tuple = (4,)  # pilot reuse factor; sweep axis
    S: int = 300  # coherence block length in symbols
    radius_m: float = 500.0  # cell radius
    kappa: float = 3.7  # pathloss exponent
    sigma_sf_sq: float = 5.0  # shadow fading variance, dB^2
    rho_over_sigma2_db: float = 0.0  # per-antenna receive SNR target
    sigma2: float = 1.0  # noise power
    min_dist_frac: float = 0.14  # min user-BS distance / radius
    trials: int = 500  # Monte-Carlo channel realizations per drop
    drops: int = 5  # independent user placements
    seed: int = 1  # master seed
    schemes: tuple = SCHEMES  # detection schemes to simulate
    z_mode: str = "statistical"  # S-MMSE inter-cell term: statistical | zero
    tau_subscript_mode: str = "interferer"  # S-MMSE cross-power weighting

    def __post_init__(self):
        object.__setattr__(self, "M", tuple(int(m) for m in _as_tuple(self.M)))
        object.__setattr__(self, "beta", tuple(int(b) for b in _as_tuple(self.beta)))
        object.__setattr__(self, "schemes", _as_tuple(self.schemes))
        self.validate()

    def validate(self):
        if self.K < 1:
            raise ValueError(f"K must be >= 1, got {self.K}")
        if not self.M or any(m < 1 for m in self.M):
            raise ValueError(f"every M must be >= 1, got {self.M}")
        for b in self.beta:
            if b not in SUPPORTED_REUSE_FACTORS:
                raise ValueError(
                    f"beta={b} unsupported; supported: {SUPPORTED_REUSE_FACTORS}"
                )
            if self.S < b * self.K:
                raise ValueError(
                    f"coherence block S={self.S} shorter than B={b * self.K} pilots"
                )
        for name in ("radius_m", "kappa", "sigma2"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.sigma_sf_sq < 0 or self.min_dist_frac < 0:
            raise ValueError("sigma_sf_sq and min_dist_frac must be nonnegative")
        if self.trials < 1 or self.drops < 1:
            raise ValueError("trials and drops must be >= 1")
        for s in self.schemes:
            if s not in SCHEMES:
                raise ValueError(f"unknown scheme {s!r}; supported: {SCHEMES}")
        if self.z_mode not in ("statistical", "zero"):
            raise ValueError(f"z_mode must be statistical|zero, got {self.z_mode!r}")
        if self.tau_subscript_mode not in ("interferer", "serving"):
            raise ValueError(
                "tau_subscript_mode must be interferer|serving, "
                f"got {self.tau_subscript_mode!r}"
            )

    @property
    def rho(self) -> float:
        """Receive power target from the configured per-antenna SNR."""
        return self.sigma2 * 10.0 ** (self.rho_over_sigma2_db / 10.0)

    def prelog(self, beta: int) -> float:
        return 1.0 - (beta * self.K) / self.S

    def single(self, M: int, beta: int) -> "NetworkConfig":
        """Restrict the sweep to one (M, beta) cell."""
        return replace(self, M=(M,), beta=(beta,))


_LIST_KEYS = {"M", "beta", "schemes"}
_INT_KEYS = {"K", "S", "trials", "drops", "seed"}
_FLOAT_KEYS = {
    "radius_m", "kappa", "sigma_sf_sq", "rho_over_sigma2_db", "sigma2",
    "min_dist_frac",
}
_STR_KEYS = {"z_mode", "tau_subscript_mode"}


def parse_config_value(key: str, raw: str):
    raw = raw.strip()
    if key in _LIST_KEYS:
        parts = [p.strip() for p in raw.split(",") if p.strip()]
        if key == "schemes":
            return tuple(parts)
        return tuple(int(p) for p in parts)
    if key in _INT_KEYS:
        return int(raw)
    if key in _FLOAT_KEYS:
        return float(raw)
    if key in _STR_KEYS:
        return raw
    raise KeyError(f"unknown config key {key!r}")


def load_config_file(path: str) -> dict:
    """Parse ``key = value`` lines into a config mapping."""
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, raw = (s.strip() for s in stripped.split("=", 1))
            values[key] = parse_config_value(key, raw)
    return values


def config_from_mapping(values: dict) -> NetworkConfig:
    known = {f.name for f in fields(NetworkConfig)}
    unknown = set(values) - known
    if unknown:
        raise KeyError(f"unknown config keys: {sorted(unknown)}")
    return NetworkConfig(**values)


def apply_overrides(values: dict, overrides) -> dict:
    """Apply ``key=value`` strings on top of a config mapping."""
    merged = dict(values)
    for item in overrides:
        if "=" not in item:
            raise ValueError(f"override {item!r} is not of the form key=value")
        key, raw = (s.strip() for s in item.split("=", 1))
        merged[key] = parse_config_value(key, raw)
    return merged
