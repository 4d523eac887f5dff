"""INI-style run configuration parsing for the command-line front-end.

Flat key = value sections keep configs diff-friendly and reproducible.
String values may be quoted; numbers are plain floats/ints. Spectral
parameters can be absolute (``sigma``, ``mu``) or expressed as offsets
from the computed eigenvalues (``sigma_offset`` from lambda1,
``mu_offset`` from nu), which is how near-pole schedules are written.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .grid_potential import PotentialSpec
from .sources import SourceSpec


class ConfigError(Exception):
    """Unparseable or incomplete run configuration."""

    def __init__(self, message: str, path: str | None = None,
                 lineno: int | None = None):
        location = ""
        if path is not None:
            location = f"{path}: "
            if lineno is not None:
                location = f"{path}:{lineno}: "
        super().__init__(location + message)
        self.path = path
        self.lineno = lineno


def _unquote(value: str) -> str:
    value = value.strip()
    if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
        return value[1:-1]
    return value


class _Section:
    def __init__(self, name: str, raw, path: str):
        self.name = name
        self.raw = raw
        self.path = path

    def has(self, key: str) -> bool:
        return key in self.raw

    def get_str(self, key: str, default=None) -> str:
        if key not in self.raw:
            if default is not None:
                return default
            raise ConfigError(f"missing key '{key}' in section [{self.name}]",
                              self.path)
        return _unquote(self.raw[key])

    def get_float(self, key: str, default=None) -> float:
        if key not in self.raw:
            if default is not None:
                return default
            raise ConfigError(f"missing key '{key}' in section [{self.name}]",
                              self.path)
        text = _unquote(self.raw[key])
        try:
            return float(text)
        except ValueError as exc:
            raise ConfigError(f"key '{key}' in [{self.name}] is not a number: "
                              f"{text!r}", self.path) from exc

    def get_int(self, key: str, default=None) -> int:
        value = self.get_float(key, default)
        return int(value)

    def get_bool(self, key: str, default: bool) -> bool:
        if key not in self.raw:
            return default
        text = _unquote(self.raw[key]).lower()
        if text in ("1", "true", "yes", "on"):
            return True
        if text in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"key '{key}' in [{self.name}] is not a boolean: "
                          f"{text!r}", self.path)


@dataclass(frozen=True)
class GridSection:
    geometry: str
    dim: int
    r_max: float
    n: int


@dataclass(frozen=True)
class ParamSection:
    sigma: float | None = None
    sigma_offset: float | None = None
    mu: float | None = None
    mu_offset: float | None = None
    side: str = "below"
    offset_start: float = 1e-1
    offset_stop: float = 1e-6
    points: int = 6
    estimate_delta: bool = False
    r0: float | None = None


@dataclass(frozen=True)
class OutputSection:
    prefix: str = "run"
    directory: str | None = None
    plots: bool = True
    gnuplot: bool = True
    dump_operator: bool = False


@dataclass(frozen=True)
class ToleranceSection:
    eigen_tol: float = 1e-10
    solve_tol: float = 1e-10


@dataclass(frozen=True)
class RunConfig:
    path: str
    grid: GridSection
    potential: PotentialSpec
    matrix: tuple | None
    source: SourceSpec | None
    source_f1: SourceSpec | None
    source_f2: SourceSpec | None
    sandwich: tuple | None
    parameters: ParamSection
    output: OutputSection
    tolerances: ToleranceSection
    extras: dict = field(default_factory=dict)


def _parse_potential(sec: _Section, prefix: str = "") -> PotentialSpec:
    kind = sec.get_str(prefix + "kind")
    if kind == "power":
        base = PotentialSpec.power(sec.get_float(prefix + "alpha"),
                                   sec.get_float(prefix + "scale", 1.0))
    elif kind == "polynomial":
        text = sec.get_str(prefix + "coeffs")
        coeffs = [float(tok) for tok in text.replace(",", " ").split()]
        base = PotentialSpec.polynomial(coeffs)
    elif kind in ("exp", "exponential"):
        base = PotentialSpec.exponential(sec.get_float(prefix + "rate"),
                                         sec.get_float(prefix + "scale", 1.0))
    elif kind == "tabulated":
        base = PotentialSpec.from_csv(sec.get_str(prefix + "path"))
    elif kind == "perturbed":
        inner = _parse_potential(sec, prefix=prefix + "base_")
        return PotentialSpec.perturbed(
            inner,
            sin_amplitude=sec.get_float(prefix + "sin_amplitude", 0.0),
            sin_freq=sec.get_float(prefix + "sin_freq", 1.0),
            bump_amplitude=sec.get_float(prefix + "bump_amplitude", 0.0),
            bump_center=sec.get_float(prefix + "bump_center", 0.0),
            bump_width=sec.get_float(prefix + "bump_width", 1.0))
    else:
        raise ConfigError(f"unknown potential kind {kind!r} in [{sec.name}]",
                          sec.path)
    return base


def _parse_source(sec: _Section) -> SourceSpec:
    return SourceSpec(
        phi_coeff=sec.get_float("phi_coeff", 0.0),
        bump_amplitude=sec.get_float("bump_amplitude", 0.0),
        bump_center=sec.get_float("bump_center", 0.0),
        bump_width=sec.get_float("bump_width", 1.0),
        tabulated_path=(sec.get_str("tabulated_path")
                        if sec.has("tabulated_path") else None))


REQUIRED_SECTIONS = {
    "eigen": ("grid", "potential"),
    "scalar": ("grid", "potential", "source", "parameters"),
    "system": ("grid", "potential", "matrix", "source_f1", "source_f2",
               "parameters"),
    "sweep": ("grid", "potential", "matrix", "source_f1", "source_f2",
              "parameters"),
    "hypotheses": ("grid", "potential", "classp"),
}


def load_config(path, command: str) -> RunConfig:
    """Parse and validate a run configuration for the given command."""
    path = str(path)
    if command not in REQUIRED_SECTIONS:
        raise ConfigError(f"unknown command {command!r}")
    parser = configparser.ConfigParser(interpolation=None,
                                       inline_comment_prefixes=("#", ";"))
    try:
        read = parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        lineno = getattr(exc, "lineno", None)
        if lineno is None and getattr(exc, "errors", None):
            lineno = exc.errors[0][0]
        raise ConfigError(str(exc).replace("\n", " "), path, lineno) from exc
    if not read:
        raise ConfigError("config file not found or unreadable", path)

    def section(name: str, required: bool) -> _Section | None:
        if not parser.has_section(name):
            if required:
                raise ConfigError(f"missing [{name}] section required by "
                                  f"command '{command}'", path)
            return None
        return _Section(name, parser[name], path)

    required = REQUIRED_SECTIONS[command]
    gsec = section("grid", "grid" in required)
    geometry = gsec.get_str("geometry")
    grid = GridSection(geometry=geometry, dim=gsec.get_int("dim", 1),
                       r_max=gsec.get_float("r_max"), n=gsec.get_int("n"))
    if grid.n < 16:
        raise ConfigError("grid n must be at least 16", path)

    potential = _parse_potential(section("potential", True))

    matrix = None
    if parser.has_section("matrix"):
        msec = _Section("matrix", parser["matrix"], path)
        matrix = tuple(msec.get_float(k) for k in ("a", "b", "c", "d"))
    elif "matrix" in required:
        raise ConfigError(f"missing [matrix] section required by command "
                          f"'{command}'", path)

    source = _parse_source(section("source", True)) \
        if parser.has_section("source") else None
    if source is None and "source" in required:
        raise ConfigError(f"missing [source] section required by command "
                          f"'{command}'", path)
    source_f1 = _parse_source(section("source_f1", True)) \
        if parser.has_section("source_f1") else None
    source_f2 = _parse_source(section("source_f2", True)) \
        if parser.has_section("source_f2") else None
    for name, value in (("source_f1", source_f1), ("source_f2", source_f2)):
        if value is None and name in required:
            raise ConfigError(f"missing [{name}] section required by command "
                              f"'{command}'", path)

    sandwich = None
    if parser.has_section("sandwich"):
        ssec = _Section("sandwich", parser["sandwich"], path)
        sandwich = (_parse_potential(ssec, prefix="q1_"),
                    _parse_potential(ssec, prefix="q2_"))

    r0 = None
    if parser.has_section("classp"):
        r0 = _Section("classp", parser["classp"], path).get_float("r0")
    elif "classp" in required:
        raise ConfigError("missing [classp] section required by command "
                          "'hypotheses'", path)

    psec = section("parameters", "parameters" in required)
    if psec is not None:
        params = ParamSection(
            sigma=psec.get_float("sigma") if psec.has("sigma") else None,
            sigma_offset=(psec.get_float("sigma_offset")
                          if psec.has("sigma_offset") else None),
            mu=psec.get_float("mu") if psec.has("mu") else None,
            mu_offset=(psec.get_float("mu_offset")
                       if psec.has("mu_offset") else None),
            side=psec.get_str("side", "below"),
            offset_start=psec.get_float("offset_start", 1e-1),
            offset_stop=psec.get_float("offset_stop", 1e-6),
            points=psec.get_int("points", 6),
            estimate_delta=psec.get_bool("estimate_delta", False),
            r0=r0)
    else:
        params = ParamSection(r0=r0)
    if params.side not in ("below", "above"):
        raise ConfigError("parameters.side must be 'below' or 'above'", path)
    if params.points < 1:
        raise ConfigError("parameters.points must be positive", path)

    osec = section("output", False)
    if osec is not None:
        output = OutputSection(
            prefix=osec.get_str("prefix", "run"),
            directory=osec.get_str("directory") if osec.has("directory") else None,
            plots=osec.get_bool("plots", True),
            gnuplot=osec.get_bool("gnuplot", True),
            dump_operator=osec.get_bool("dump_operator", False))
    else:
        output = OutputSection()

    tsec = section("tolerances", False)
    if tsec is not None:
        tolerances = ToleranceSection(eigen_tol=tsec.get_float("eigen_tol", 1e-10),
                                      solve_tol=tsec.get_float("solve_tol", 1e-10))
    else:
        tolerances = ToleranceSection()
    if tolerances.eigen_tol <= 0 or tolerances.solve_tol <= 0:
        raise ConfigError("tolerances must be positive", path)

    return RunConfig(path=path, grid=grid, potential=potential, matrix=matrix,
                     source=source, source_f1=source_f1, source_f2=source_f2,
                     sandwich=sandwich, parameters=params, output=output,
                     tolerances=tolerances)
