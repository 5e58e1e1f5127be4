"""
Run configuration: a sectioned `key = value` text file parsed into pydantic models.

Every section is validated on its own so that errors point at the offending line.
"""

import configparser
import re
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple, Type, TypeVar

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from app.core.exceptions import ConfigError
from app.core.logging import get_logger
from app.quantum.bath import LorentzianBath, Pseudomode, PseudomodeSpec, lorentzian_to_pseudomode
from app.quantum.dynamics import check_density_matrix
from app.quantum.liouvillian import TruncationSpec
from app.quantum.mpemba import DistanceKind

logger = get_logger("cli.run_config")

Model = TypeVar("Model", bound=BaseModel)

_INDEXED = re.compile(r"^(mode|state)\.(\d+)$")


class _Section(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class TimeGrid(_Section):
    t_max: float = Field(..., gt=0.0)
    n_points: int = Field(..., ge=2)

    def times(self) -> np.ndarray:
        """Uniform grid on [0, t_max]."""
        return np.linspace(0.0, self.t_max, self.n_points)


class InitialState(_Section):
    """Coherent amplitude or density-matrix file, with optional generator overrides."""

    xi: Optional[float] = None
    rho_file: Optional[str] = None
    mode: int = Field(1, ge=1)
    alpha: Optional[float] = Field(None, ge=0.0)
    omega: Optional[float] = None
    gamma: Optional[float] = Field(None, gt=0.0)

    @model_validator(mode="after")
    def _one_source(self) -> "InitialState":
        if (self.xi is None) == (self.rho_file is None):
            raise ValueError("give exactly one of xi or rho_file")
        return self

    def overrides(self) -> Dict[str, float]:
        """Generator parameters this state sets for its mode."""
        return {k: v for k, v in (("alpha", self.alpha), ("omega", self.omega), ("gamma", self.gamma))
                if v is not None}


class SweepRange(_Section):
    gamma_min: float = Field(..., gt=0.0)
    gamma_max: float = Field(..., gt=0.0)
    gamma_points: int = Field(..., ge=1)
    alpha_min: float = Field(..., ge=0.0)
    alpha_max: float = Field(..., ge=0.0)
    alpha_points: int = Field(..., ge=1)

    def gammas(self) -> np.ndarray:
        """Grid along gamma."""
        return np.linspace(self.gamma_min, self.gamma_max, self.gamma_points)

    def alphas(self) -> np.ndarray:
        """Grid along alpha."""
        return np.linspace(self.alpha_min, self.alpha_max, self.alpha_points)


class LepScan(_Section):
    parameter: Literal["gamma", "alpha", "omega"] = "gamma"
    mode: int = Field(1, ge=1)
    lower: float
    upper: float

    @model_validator(mode="after")
    def _ordered(self) -> "LepScan":
        if not self.lower < self.upper:
            raise ValueError("lower must be smaller than upper")
        return self


class SpectrumOptions(_Section):
    excitation_cap: int = Field(2, ge=0)
    brute_force: bool = False


class EvolveOptions(_Section):
    method: Literal["analytic", "numeric"] = "analytic"


class OutputOptions(_Section):
    directory: str = "out"
    distance: Optional[DistanceKind] = None
    markovian: bool = False
    lamb_shift: bool = False


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    omega0: float = Field(..., gt=0.0)
    modes: Optional[Tuple[Pseudomode, ...]] = None
    lorentzian: Optional[LorentzianBath] = None
    truncation: Optional[TruncationSpec] = None
    time_grid: Optional[TimeGrid] = None
    states: Tuple[InitialState, ...] = ()
    sweep: Optional[SweepRange] = None
    lep: Optional[LepScan] = None
    spectrum: SpectrumOptions = SpectrumOptions()
    evolve: EvolveOptions = EvolveOptions()
    output: OutputOptions = OutputOptions()

    @model_validator(mode="after")
    def _one_bath(self) -> "RunConfig":
        if (self.modes is None) == (self.lorentzian is None):
            raise ValueError("give exactly one of [mode.N] sections or a [lorentzian] section")
        return self

    def pseudomode_spec(self) -> PseudomodeSpec:
        """Base generator: the explicit modes or the mapped Lorentzian."""
        if self.lorentzian is not None:
            return lorentzian_to_pseudomode(self.lorentzian)
        return PseudomodeSpec(omega0=self.omega0, modes=self.modes)

    def state_spec(self, state: InitialState) -> PseudomodeSpec:
        """Generator for one initial state, base bath plus that state's overrides."""
        overrides = state.overrides()
        spec = self.pseudomode_spec()
        return spec.with_mode(state.mode - 1, **overrides) if overrides else spec

    def to_ini(self) -> str:
        """Serialize back to the text format; parse_config(to_ini()) == self."""
        parser = configparser.ConfigParser(interpolation=None)
        parser["model"] = {"omega0": _fmt(self.omega0)}
        if self.modes is not None:
            for k, mode in enumerate(self.modes, start=1):
                parser[f"mode.{k}"] = {key: _fmt(v) for key, v in mode.model_dump().items()}
        if self.lorentzian is not None:
            parser["lorentzian"] = {"coupling": _fmt(self.lorentzian.coupling),
                                    "width": _fmt(self.lorentzian.width)}
        if self.truncation is not None:
            parser["truncation"] = {"n_sys": str(self.truncation.n_sys),
                                    "n_modes": ", ".join(str(n) for n in self.truncation.n_modes)}
        for name, section in (("time", self.time_grid), ("sweep", self.sweep), ("lep", self.lep)):
            if section is not None:
                parser[name] = _dump(section)
        for k, state in enumerate(self.states, start=1):
            parser[f"state.{k}"] = _dump(state)
        parser["spectrum"] = _dump(self.spectrum)
        parser["evolve"] = _dump(self.evolve)
        parser["output"] = _dump(self.output)

        lines: List[str] = []
        for name in parser.sections():
            lines.append(f"[{name}]")
            lines.extend(f"{key} = {value}" for key, value in parser[name].items())
            lines.append("")
        return "\n".join(lines)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, DistanceKind):
        return value.value
    return str(value)


def _dump(section: BaseModel) -> Dict[str, str]:
    return {key: _fmt(value) for key, value in section.model_dump().items() if value is not None}


def _key_lines(text: str) -> Dict[Tuple[str, Optional[str]], int]:
    """1-based line numbers of section headers and keys."""
    lines: Dict[Tuple[str, Optional[str]], int] = {}
    section = None
    for number, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        header = re.match(r"^\[([^\]]+)\]", stripped)
        if header:
            section = header.group(1).strip()
            lines[(section, None)] = number
        elif section is not None and stripped and stripped[0] not in "#;":
            key = re.split(r"[=:]", stripped, maxsplit=1)[0].strip()
            lines.setdefault((section, key), number)
    return lines


def _validate(model: Type[Model], section: str, values: Dict[str, object], lines) -> Model:
    try:
        return model(**values)
    except ValidationError as exc:
        error = exc.errors()[0]
        key = str(error["loc"][0]) if error["loc"] else None
        line = lines.get((section, key), lines.get((section, None)))
        field = f"{section}.{key}" if key else section
        raise ConfigError(f"[{field}] {error['msg']}", line) from exc


def parse_config(text: str) -> RunConfig:
    """Parse run-file text; every failure is a ConfigError carrying the line when known."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text)
    except configparser.ParsingError as exc:
        errors = getattr(exc, "errors", None)
        line = getattr(exc, "lineno", None) or (errors[0][0] if errors else None)
        raise ConfigError(f"cannot parse: {exc.message.splitlines()[0]}", line) from exc
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0], getattr(exc, "lineno", None)) from exc

    lines = _key_lines(text)
    sections = {name: dict(parser[name]) for name in parser.sections()}

    if "model" not in sections or "omega0" not in sections["model"]:
        raise ConfigError("missing [model] omega0", lines.get(("model", None)))
    try:
        omega0 = float(sections["model"]["omega0"])
    except ValueError as exc:
        raise ConfigError("omega0 must be a number", lines.get(("model", "omega0"))) from exc

    fields: Dict[str, object] = {"omega0": omega0}
    modes: Dict[int, Pseudomode] = {}
    states: Dict[int, InitialState] = {}
    simple = {
        "time": ("time_grid", TimeGrid),
        "sweep": ("sweep", SweepRange),
        "lep": ("lep", LepScan),
        "spectrum": ("spectrum", SpectrumOptions),
        "evolve": ("evolve", EvolveOptions),
        "output": ("output", OutputOptions),
    }

    for name, values in sections.items():
        indexed = _INDEXED.match(name)
        if name == "model":
            continue
        if indexed and indexed.group(1) == "mode":
            modes[int(indexed.group(2))] = _validate(Pseudomode, name, values, lines)
        elif indexed:
            states[int(indexed.group(2))] = _validate(InitialState, name, values, lines)
        elif name == "lorentzian":
            fields["lorentzian"] = _validate(LorentzianBath, name, {**values, "omega0": omega0}, lines)
        elif name == "truncation":
            values = dict(values)
            if "n_modes" in values:
                values["n_modes"] = tuple(part.strip() for part in values["n_modes"].split(","))
            fields["truncation"] = _validate(TruncationSpec, name, values, lines)
        elif name in simple:
            field, model = simple[name]
            fields[field] = _validate(model, name, values, lines)
        else:
            raise ConfigError(f"unknown section [{name}]", lines.get((name, None)))

    if modes:
        if sorted(modes) != list(range(1, len(modes) + 1)):
            raise ConfigError(f"mode sections must be numbered 1..{len(modes)}", lines.get((f"mode.{max(modes)}", None)))
        fields["modes"] = tuple(modes[k] for k in sorted(modes))
    if states:
        fields["states"] = tuple(states[k] for k in sorted(states))

    try:
        config = RunConfig(**fields)
    except ValidationError as exc:
        raise ConfigError(exc.errors()[0]["msg"]) from exc

    truncation = config.truncation
    if truncation is not None and len(truncation.n_modes) != config.pseudomode_spec().n_modes:
        raise ConfigError("truncation lists a cutoff per pseudomode", lines.get(("truncation", "n_modes")))
    for k, state in sorted(states.items()):
        if state.rho_file is not None:
            _check_rho_file(state.rho_file, truncation, lines.get((f"state.{k}", "rho_file")), f"state.{k}")
    return config


def _check_rho_file(path: str, truncation: Optional[TruncationSpec], line: Optional[int], section: str) -> None:
    field = f"[{section}.rho_file]"
    if not Path(path).is_file():
        raise ConfigError(f"{field} file not found: {path}", line)
    try:
        rho = check_density_matrix(np.load(path))
    except (OSError, ValueError) as exc:
        raise ConfigError(f"{field} {exc}", line) from exc
    if truncation is not None and rho.shape[0] != truncation.n_sys:
        raise ConfigError(f"{field} holds a {rho.shape[0]}-level state but n_sys = {truncation.n_sys}", line)


def load_config(path: str) -> RunConfig:
    """Read and parse a run file from disk."""
    config_path = Path(path)
    if not config_path.is_file():
        raise ConfigError(f"config file not found: {path}")
    config = parse_config(config_path.read_text(encoding="utf-8"))
    logger.info(f"Loaded run configuration from {config_path}")
    return config
