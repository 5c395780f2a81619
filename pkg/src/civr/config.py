"""Run configuration: INI file with sections, command-line overrides.

Every default below reproduces the published quartic benchmark setup;
``civr propagate`` with no config file runs exactly that.  All values
are given in physical (unscaled) units together with the wavepacket
width b and hbar; scaling happens at the boundary of the numerical
core.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field

from .grids import AxisSpec, PhaseGridSpec
from .hamiltonian import QuarticSpec
from .oracles import SplitOpConfig
from .phase_space import UnitScaling

DEFAULT_CONFIG = """\
[hamiltonian]
Omega = 1.0
lambda = 0.4
b = 1.0
hbar = 1.0

[initial]
q0 = 0.0
p0 = -2.0

[times]
T = 1.0, 2.5, 4.5, 6.5, 8.5

[civr]
mode = smooth
; smoothing width per propagation time (single value broadcasts)
a = 1.5, 1.28, 0.99, 0.69, 0.4
c = 1.0
epsilon = 0.25
q1_min = -3.0
q1_max = 3.0
n_q1 = 30
p1_min = -4.0
p1_max = 4.0
n_p1 = 40

[zf_grid]
q_min = -4.0
q_max = 4.0
n_q = 40
p_min = -6.0
p_max = 6.0
n_p = 60

[x_grid]
x_min = -12.0
x_max = 12.0
n_x = 2048

[oracle]
x_min = -12.0
x_max = 12.0
n_x = 2048
dt = 0.001

[run]
dt = 0.001
workers = 1
renormalize = false
dump_trajectories = false
dump_stride = 10

[report]
figures = true
"""


class ConfigError(ValueError):
    """Invalid configuration; message carries file, line and key."""


@dataclass
class RunConfig:
    """Fully resolved run parameters (physical units)."""

    quartic: QuarticSpec
    q0: float
    p0: float
    times: list
    a_values: list
    c: float
    mode: str
    epsilon: float
    grid1: PhaseGridSpec
    zf_grid: PhaseGridSpec
    x_grid: AxisSpec
    oracle: SplitOpConfig
    oracle_dt: float
    dt: float
    workers: int
    renormalize: bool
    dump_trajectories: bool
    dump_stride: int
    figures: bool
    source_text: str = field(default="", repr=False)

    def as_dict(self) -> dict:
        """All numeric knobs, for the run manifest."""
        s = self.quartic.scaling
        return {
            "hamiltonian": {"Omega": self.quartic.Omega, "lambda": self.quartic.lam,
                            "b": s.b, "hbar": s.hbar},
            "initial": {"q0": self.q0, "p0": self.p0},
            "times": list(self.times),
            "civr": {"mode": self.mode, "a": list(self.a_values), "c": self.c,
                     "epsilon": self.epsilon,
                     "grid1": _grid_dict(self.grid1)},
            "zf_grid": _grid_dict(self.zf_grid),
            "x_grid": {"min": self.x_grid.lo, "max": self.x_grid.hi,
                       "n": self.x_grid.n},
            "oracle": {"x_min": self.oracle.x_min, "x_max": self.oracle.x_max,
                       "n_x": self.oracle.n_x, "dt": self.oracle_dt},
            "run": {"dt": self.dt, "workers": self.workers,
                    "renormalize": self.renormalize,
                    "dump_trajectories": self.dump_trajectories,
                    "dump_stride": self.dump_stride},
            "report": {"figures": self.figures},
        }


def _grid_dict(g: PhaseGridSpec) -> dict:
    return {"q_min": g.q.lo, "q_max": g.q.hi, "n_q": g.q.n,
            "p_min": g.p.lo, "p_max": g.p.hi, "n_p": g.p.n}


class _Source:
    """Raw config text with enough structure to report line numbers."""

    def __init__(self, text: str, origin: str):
        self.text = text
        self.origin = origin
        self.lines = text.splitlines()

    def line_of(self, section: str, key: str | None = None) -> int | None:
        current = None
        for i, raw in enumerate(self.lines, start=1):
            line = raw.strip()
            if line.startswith("[") and line.endswith("]"):
                current = line[1:-1].strip()
                if key is None and current == section:
                    return i
            elif key is not None and current == section:
                name = line.split("=", 1)[0].split(":", 1)[0].strip()
                if name == key:
                    return i
        return None

    def error(self, section: str, key: str | None, message: str) -> ConfigError:
        line = self.line_of(section, key)
        where = f"{self.origin}:{line}" if line else self.origin
        target = f"[{section}] {key}" if key else f"[{section}]"
        return ConfigError(f"{where}: {target}: {message}")


class _Reader:
    def __init__(self, parser: configparser.ConfigParser, src: _Source):
        self.p = parser
        self.src = src

    def _raw(self, section: str, key: str) -> str:
        try:
            return self.p.get(section, key)
        except (configparser.NoSectionError, configparser.NoOptionError):
            raise self.src.error(section, key, "missing required option") from None

    def number(self, section: str, key: str) -> float:
        raw = self._raw(section, key)
        try:
            return float(raw)
        except ValueError:
            raise self.src.error(section, key, f"not a number: {raw!r}") from None

    def integer(self, section: str, key: str) -> int:
        raw = self._raw(section, key)
        try:
            return int(raw)
        except ValueError:
            raise self.src.error(section, key, f"not an integer: {raw!r}") from None

    def boolean(self, section: str, key: str) -> bool:
        raw = self._raw(section, key).strip().lower()
        if raw in ("true", "yes", "on", "1"):
            return True
        if raw in ("false", "no", "off", "0"):
            return False
        raise self.src.error(section, key, f"not a boolean: {raw!r}")

    def numbers(self, section: str, key: str) -> list:
        raw = self._raw(section, key)
        try:
            return [float(tok) for tok in raw.replace(",", " ").split()]
        except ValueError:
            raise self.src.error(section, key, f"not a number list: {raw!r}") from None

    def word(self, section: str, key: str) -> str:
        return self._raw(section, key).strip()


def _parse(text: str, origin: str, src_text: str | None = None) -> RunConfig:
    # line numbers in error messages refer to the user's file, not to the
    # merged defaults; options only present in the defaults report no line
    src = _Source(src_text if src_text is not None else text, origin)
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text, source=origin)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    r = _Reader(parser, src)

    scaling_b = r.number("hamiltonian", "b")
    scaling_hbar = r.number("hamiltonian", "hbar")
    if scaling_b <= 0.0 or scaling_hbar <= 0.0:
        raise src.error("hamiltonian", "b", "b and hbar must be positive")
    omega_ = r.number("hamiltonian", "Omega")
    lam = r.number("hamiltonian", "lambda")
    if omega_ < 0.0 or lam < 0.0:
        raise src.error("hamiltonian", "Omega",
                        "Omega and lambda must be non-negative")
    quartic = QuarticSpec(Omega=omega_, lam=lam,
                          scaling=UnitScaling(scaling_b, scaling_hbar))

    times = r.numbers("times", "T")
    if any(t < 0 for t in times):
        raise src.error("times", "T", "times must be non-negative")
    if any(b < a for a, b in zip(times, times[1:])):
        raise src.error("times", "T", "times must be non-decreasing")

    a_values = r.numbers("civr", "a")
    if len(a_values) == 1:
        a_values = a_values * len(times)
    if len(a_values) != len(times):
        raise src.error("civr", "a",
                        f"need 1 or {len(times)} widths, got {len(a_values)}")
    if any(a <= 0 for a in a_values):
        raise src.error("civr", "a", "widths must be positive")
    mode = r.word("civr", "mode")
    if mode not in ("smooth", "sudden"):
        raise src.error("civr", "mode", f"must be smooth or sudden, got {mode!r}")
    epsilon = r.number("civr", "epsilon")
    if epsilon <= 0.0:
        raise src.error("civr", "epsilon", "epsilon must be positive")

    def axis(section, lo_key, hi_key, n_key):
        lo = r.number(section, lo_key)
        hi = r.number(section, hi_key)
        n = r.integer(section, n_key)
        try:
            return AxisSpec(lo, hi, n)
        except ValueError as exc:
            raise src.error(section, n_key, str(exc)) from None

    grid1 = PhaseGridSpec(q=axis("civr", "q1_min", "q1_max", "n_q1"),
                          p=axis("civr", "p1_min", "p1_max", "n_p1"))
    zf_grid = PhaseGridSpec(q=axis("zf_grid", "q_min", "q_max", "n_q"),
                            p=axis("zf_grid", "p_min", "p_max", "n_p"))
    x_grid = axis("x_grid", "x_min", "x_max", "n_x")

    try:
        oracle = SplitOpConfig(x_min=r.number("oracle", "x_min"),
                               x_max=r.number("oracle", "x_max"),
                               n_x=r.integer("oracle", "n_x"),
                               dt=r.number("oracle", "dt"))
    except ValueError as exc:
        raise src.error("oracle", "n_x", str(exc)) from None

    dt = r.number("run", "dt")
    if dt <= 0.0:
        raise src.error("run", "dt", "dt must be positive")
    workers = r.integer("run", "workers")
    if workers < 1:
        raise src.error("run", "workers", "workers must be >= 1")
    dump_stride = r.integer("run", "dump_stride")
    if dump_stride < 1:
        raise src.error("run", "dump_stride", "dump_stride must be >= 1")

    return RunConfig(
        quartic=quartic,
        q0=r.number("initial", "q0"),
        p0=r.number("initial", "p0"),
        times=times,
        a_values=a_values,
        c=r.number("civr", "c"),
        mode=mode,
        epsilon=epsilon,
        grid1=grid1,
        zf_grid=zf_grid,
        x_grid=x_grid,
        oracle=oracle,
        oracle_dt=r.number("oracle", "dt"),
        dt=dt,
        workers=workers,
        renormalize=r.boolean("run", "renormalize"),
        dump_trajectories=r.boolean("run", "dump_trajectories"),
        dump_stride=dump_stride,
        figures=r.boolean("report", "figures"),
        source_text=text,
    )


def _merge_with_defaults(user_text: str) -> str:
    base = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    base.read_string(DEFAULT_CONFIG)
    user = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    user.read_string(user_text)
    for section in user.sections():
        if not base.has_section(section):
            base.add_section(section)
        for key, value in user.items(section):
            base.set(section, key, value)
    out = io.StringIO()
    base.write(out)
    return out.getvalue()


def apply_overrides(text: str, overrides) -> str:
    """Apply ``section.key=value`` strings on top of a config text."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.read_string(text)
    for item in overrides or ():
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value: {item!r}")
        target, value = item.split("=", 1)
        section, key = target.split(".", 1)
        section, key = section.strip(), key.strip()
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key, value.strip())
    out = io.StringIO()
    parser.write(out)
    return out.getvalue()


def load_config(path: str | None = None, overrides=None) -> RunConfig:
    """Parse a config file (defaults fill anything missing)."""
    if path is None:
        text = DEFAULT_CONFIG
        user_text = DEFAULT_CONFIG
        origin = "<defaults>"
    else:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                user_text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from None
        try:
            text = _merge_with_defaults(user_text)
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        origin = path
    if overrides:
        text = apply_overrides(text, overrides)
    return _parse(text, origin, src_text=user_text)
