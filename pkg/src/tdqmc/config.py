"""Run configuration: flat key-value text with section headers.

The format is deliberately small: `[section]` headers, `key = value`
lines, blank lines, and full-line comments starting with `#` or `;`.
Every key has a default, so an empty file is a valid configuration;
unknown sections or keys are rejected with the offending line number.
Cross-field validation is delegated to the domain dataclasses the
builders construct.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

from tdqmc.engine import REGIME_TAGS, CorrelationRegime, EngineConfig
from tdqmc.errors import ConfigurationError
from tdqmc.kde import BANDWIDTH_MODES, BandwidthSpec
from tdqmc.numerics import Grid1D
from tdqmc.potentials import ENVELOPES, PulseSpec, SoftCoreParams

__all__ = ["RunConfig", "parse_config", "load_config"]

SOLVERS = ("tdqmc", "exact", "tdhf")


def _to_int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigurationError(f"expected an integer, got {text!r}") from None


def _to_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ConfigurationError(f"expected a number, got {text!r}") from None
    if math.isnan(value):
        raise ConfigurationError("nan is not a valid value")
    return value


def _to_opt_int(text: str) -> Optional[int]:
    if text.lower() == "none":
        return None
    return _to_int(text)


def _to_opt_float(text: str) -> Optional[float]:
    if text.lower() == "none":
        return None
    return _to_float(text)


def _choice(*options: str) -> Callable[[str], str]:
    def convert(text: str) -> str:
        if text not in options:
            raise ConfigurationError(
                f"expected one of {options}, got {text!r}"
            )
        return text

    return convert


# section -> key -> (converter, default); defaults are the production
# protocol (low-frequency pulse, full walker ensemble)
_ENGINE_DEFAULTS = EngineConfig()
_SCHEMA: dict[str, dict[str, tuple[Callable, object]]] = {
    "run": {
        "solver": (_choice(*SOLVERS), "tdqmc"),
        "seed": (_to_int, 0),
        "out": (str, "run_out"),
        "record_every": (_to_int, 5),
        "energy_every": (_to_int, 50),
    },
    "grid": {
        "extent": (_to_float, 50.0),
        "n_points": (_to_int, 1024),
        "exact_n_points": (_to_int, 512),
    },
    "atom": {
        "a": (_to_float, SoftCoreParams().a),
        "b": (_to_float, SoftCoreParams().b),
        "nuclear_charge": (_to_float, SoftCoreParams().nuclear_charge),
    },
    "engine": {
        "m_walkers": (_to_int, _ENGINE_DEFAULTS.m_walkers),
        "dt": (_to_float, _ENGINE_DEFAULTS.dt),
        "n_relax_steps": (_to_int, _ENGINE_DEFAULTS.n_relax_steps),
        "rotation_angle": (_to_float, _ENGINE_DEFAULTS.rotation_angle),
        "sigma0": (_to_float, _ENGINE_DEFAULTS.sigma0),
        "noise_amplitude": (_to_float, _ENGINE_DEFAULTS.noise_amplitude),
        "noise_decay_steps": (_to_opt_int, _ENGINE_DEFAULTS.noise_decay_steps),
        "conditional_block": (_to_int, _ENGINE_DEFAULTS.conditional_block),
        "walker_substeps": (_to_int, _ENGINE_DEFAULTS.walker_substeps),
        "realtime_noise": (_to_float, _ENGINE_DEFAULTS.realtime_noise),
        "v_max": (_to_float, _ENGINE_DEFAULTS.v_max),
    },
    # dynamics bandwidth defaults to the wide global kernel the laser
    # runs use; relaxation defaults to the adaptive kernel, which is
    # where the variational ground state lives
    "regime": {
        "kind": (_choice(*REGIME_TAGS), "effective"),
        "bandwidth_mode": (_choice(*BANDWIDTH_MODES), "global"),
        "bandwidth_sigma": (_to_float, 5.0),
        "bandwidth_refresh_every": (_to_int, BandwidthSpec().refresh_every),
        "relax_bandwidth_mode": (_choice("same", *BANDWIDTH_MODES), "adaptive"),
        "relax_bandwidth_sigma": (_to_opt_float, 0.6),
    },
    "pulse": {
        "omega": (_to_float, 0.136),
        "e0": (_to_float, 0.2),
        "n_cycles": (_to_int, 8),
        "envelope": (_choice(*ENVELOPES), "sin2"),
        "t_start": (_to_float, 0.0),
    },
}


@dataclass(frozen=True)
class RunConfig:
    """Fully-resolved run settings (defaults expanded).

    `values` maps section -> key -> parsed value; the builder methods
    construct the domain objects and surface their validation errors.
    """

    values: dict

    def __getitem__(self, section: str) -> dict:
        return self.values[section]

    @property
    def solver(self) -> str:
        return self.values["run"]["solver"]

    @property
    def seed(self) -> int:
        return self.values["run"]["seed"]

    @property
    def out(self) -> str:
        return self.values["run"]["out"]

    @property
    def record_every(self) -> int:
        return self.values["run"]["record_every"]

    @property
    def energy_every(self) -> int:
        return self.values["run"]["energy_every"]

    def with_overrides(
        self,
        seed: Optional[int] = None,
        solver: Optional[str] = None,
        regime: Optional[str] = None,
        out: Optional[str] = None,
    ) -> "RunConfig":
        """Copy with command-line overrides applied and re-checked."""
        values = {s: dict(kv) for s, kv in self.values.items()}
        if seed is not None:
            values["run"]["seed"] = _SCHEMA["run"]["seed"][0](str(seed))
        if solver is not None:
            values["run"]["solver"] = _SCHEMA["run"]["solver"][0](solver)
        if regime is not None:
            values["regime"]["kind"] = _SCHEMA["regime"]["kind"][0](regime)
        if out is not None:
            values["run"]["out"] = out
        return RunConfig(values)

    def grid(self) -> Grid1D:
        g = self.values["grid"]
        return Grid1D.centered(g["extent"], g["n_points"])

    def exact_grid(self) -> Grid1D:
        g = self.values["grid"]
        return Grid1D.centered(g["extent"], g["exact_n_points"])

    def atom_params(self) -> SoftCoreParams:
        a = self.values["atom"]
        return SoftCoreParams(
            a=a["a"], b=a["b"], nuclear_charge=a["nuclear_charge"]
        )

    def engine_config(self) -> EngineConfig:
        e = self.values["engine"]
        return EngineConfig(
            m_walkers=e["m_walkers"],
            dt=e["dt"],
            n_relax_steps=e["n_relax_steps"],
            rotation_angle=e["rotation_angle"],
            sigma0=e["sigma0"],
            noise_amplitude=e["noise_amplitude"],
            noise_decay_steps=e["noise_decay_steps"],
            conditional_block=e["conditional_block"],
            walker_substeps=e["walker_substeps"],
            realtime_noise=e["realtime_noise"],
            v_max=e["v_max"],
            seed=self.seed,
        )

    def regime(self) -> CorrelationRegime:
        """Correlation regime used for real-time dynamics."""
        r = self.values["regime"]
        if r["kind"] != "effective":
            return CorrelationRegime(r["kind"])
        return CorrelationRegime.effective(
            BandwidthSpec(
                mode=r["bandwidth_mode"],
                sigma=r["bandwidth_sigma"],
                refresh_every=r["bandwidth_refresh_every"],
            )
        )

    def relax_regime(self) -> CorrelationRegime:
        """Correlation regime used for ground-state relaxation.

        relax_bandwidth_mode "same" adopts the dynamics bandwidth
        wholesale; otherwise the relax_* keys define the relaxation
        kernel, with a sigma of none borrowing the dynamics sigma."""
        r = self.values["regime"]
        if r["kind"] != "effective":
            return CorrelationRegime(r["kind"])
        mode = r["relax_bandwidth_mode"]
        if mode == "same":
            return self.regime()
        sigma = r["relax_bandwidth_sigma"]
        if sigma is None:
            sigma = r["bandwidth_sigma"]
        return CorrelationRegime.effective(
            BandwidthSpec(
                mode=mode,
                sigma=sigma,
                refresh_every=r["bandwidth_refresh_every"],
            )
        )

    def pulse(self) -> PulseSpec:
        p = self.values["pulse"]
        return PulseSpec(
            e0=p["e0"],
            omega=p["omega"],
            n_cycles=p["n_cycles"],
            envelope=p["envelope"],
            t_start=p["t_start"],
        )

    def validate(self) -> None:
        """Construct every domain object once, surfacing bad values."""
        for name in ("run", "grid"):
            for key, value in self.values[name].items():
                if isinstance(value, int) and key != "seed" and value < 1:
                    raise ConfigurationError(f"[{name}] {key} must be >= 1")
        self.grid()
        self.exact_grid()
        self.atom_params()
        self.engine_config()
        self.regime()
        self.relax_regime()
        self.pulse()


def _defaults() -> dict:
    return {
        section: {key: default for key, (_, default) in keys.items()}
        for section, keys in _SCHEMA.items()
    }


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse configuration text; every diagnostic carries source:line."""
    values = _defaults()
    seen: set[tuple[str, str]] = set()
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        where = f"{source}:{lineno}"
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigurationError(f"{where}: unterminated section header")
            name = line[1:-1].strip()
            if name not in _SCHEMA:
                raise ConfigurationError(
                    f"{where}: unknown section [{name}]; "
                    f"sections are {sorted(_SCHEMA)}"
                )
            section = name
            continue
        if "=" not in line:
            raise ConfigurationError(
                f"{where}: expected 'key = value' or a [section] header"
            )
        if section is None:
            raise ConfigurationError(
                f"{where}: key outside of any [section]"
            )
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _SCHEMA[section]:
            raise ConfigurationError(
                f"{where}: unknown key {key!r} in [{section}]; "
                f"valid keys are {sorted(_SCHEMA[section])}"
            )
        if (section, key) in seen:
            raise ConfigurationError(
                f"{where}: duplicate key {key!r} in [{section}]"
            )
        seen.add((section, key))
        convert = _SCHEMA[section][key][0]
        try:
            values[section][key] = convert(value)
        except ConfigurationError as exc:
            raise ConfigurationError(f"{where}: {key}: {exc}") from None
    config = RunConfig(values)
    config.validate()
    return config


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, source=str(path))
