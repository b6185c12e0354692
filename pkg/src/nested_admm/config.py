"""Experiment configuration files.

INI layout with three sections::

    [problem]          generator fields (kind, d, l, p, n1, n2, m, noise,
                       reg_kind, reg_weights, decay, radius, graph, ...)
                       or ``instance = path`` to a saved instance
    [solver]           K, alpha, seeds, eps, rho, eta, r, tau,
                       record_every, stop_at_eps, workers, out
    [estimator]        kind (one or more of spider, minibatch), mode,
                       q, s, b1, b2, S, B1, B2

Any solver or estimator field left out is filled by calibration.  Keys are
case sensitive (``S`` and ``s`` differ).  Errors carry the line number of
the offending entry.
"""
import configparser
import re
from dataclasses import dataclass, field, fields

from .estimators import ESTIMATORS, SPIDER
from .exceptions import ConfigParseError, GeneratorError, IoError
from .generators import GeneratorSpec
from .problem import FINITE_SUM, MODES

PLAN_KEYS = ("q", "s", "b1", "b2", "S", "B1", "B2")
_SECTIONS = ("problem", "solver", "estimator")
_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^\s*([^=:#;\s][^=:]*?)\s*[=:]")


@dataclass
class ExperimentConfig:
    generator: GeneratorSpec = field(default_factory=GeneratorSpec)
    estimators: list = field(default_factory=lambda: [SPIDER])
    mode: str = FINITE_SUM
    eps_targets: list = field(default_factory=lambda: [1e-2])
    seeds: list = field(default_factory=lambda: [0])
    K: int = 1000
    alpha: float = 0.5
    overrides: dict = field(default_factory=dict)
    plan_overrides: dict = field(default_factory=dict)
    record_every: int = 1
    stop_at_eps: bool = True
    workers: int = 1
    out: str = "results"
    instance: str = None

    def __post_init__(self):
        if not self.seeds:
            raise ConfigParseError("seed list is empty")
        if not self.estimators:
            raise ConfigParseError("no estimator listed")
        for e in self.estimators:
            if e not in ESTIMATORS:
                raise ConfigParseError(f"unknown estimator {e!r}; expected one of {ESTIMATORS}")
        if self.mode not in MODES:
            raise ConfigParseError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if not self.eps_targets or any(not e > 0 for e in self.eps_targets):
            raise ConfigParseError("eps targets must be a nonempty list of positive numbers")


def _line_numbers(text):
    where, section = {}, None
    for n, line in enumerate(text.splitlines(), start=1):
        m = _SECTION_RE.match(line)
        if m:
            section = m.group(1).strip()
            where[(section, None)] = n
            continue
        m = _KEY_RE.match(line)
        if m and section is not None:
            where[(section, m.group(1).strip())] = n
    return where


def _list(raw, conv):
    return [conv(tok) for tok in raw.replace(",", " ").split()]


def _bool(raw):
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _int(raw):
    val = float(raw)
    if val != int(val):
        raise ValueError(f"not an integer: {raw!r}")
    return int(val)


_GEN_FIELDS = {f.name for f in fields(GeneratorSpec)}
_GEN_CONV = {
    "kind": str,
    "reg_kind": str,
    "mode": str,
    "graph": str,
    "reg_weights": lambda raw: _list(raw, float),
    "noise": float,
    "decay": float,
    "radius": float,
    "edge_prob": float,
}
_SOLVER_CONV = {
    "K": _int,
    "alpha": float,
    "seeds": lambda raw: _list(raw, _int),
    "eps": lambda raw: _list(raw, float),
    "rho": float,
    "eta": float,
    "r": float,
    "tau": lambda raw: tuple(_list(raw, float)),
    "record_every": _int,
    "stop_at_eps": _bool,
    "workers": _int,
    "out": str,
}
_ESTIMATOR_CONV = {"kind": lambda raw: _list(raw, str), "mode": str, **{k: _int for k in PLAN_KEYS}}


# which entry to blame for a validation failure, by message keyword
_BLAME = (
    ("seed", ("solver", "seeds")),
    ("eps", ("solver", "eps")),
    ("mode", ("estimator", "mode")),
    ("estimator", ("estimator", "kind")),
)


def parse_config(text, source="<config>"):
    """Parse INI ``text`` into an :class:`ExperimentConfig`."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.MissingSectionHeaderError as exc:
        # subclass of ParsingError, so it goes first
        raise ConfigParseError(f"{source}: entry outside of any section", exc.lineno) from exc
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else None
        raise ConfigParseError(f"{source}: malformed line", lineno) from exc
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigParseError(f"{source}: {exc.message}", exc.lineno) from exc
    lines = _line_numbers(text)
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigParseError(f"unknown section [{section}]", lines.get((section, None)))

    def convert(section, table):
        out = {}
        if not parser.has_section(section):
            return out
        for key, raw in parser.items(section):
            lineno = lines.get((section, key))
            if section == "problem" and key == "instance":
                out[key] = raw.strip()
                continue
            if section == "problem" and key not in table and key in _GEN_FIELDS:
                conv = _int
            else:
                conv = table.get(key)
            if conv is None:
                raise ConfigParseError(f"unknown key {key!r} in [{section}]", lineno)
            try:
                out[key] = conv(raw)
            except ValueError as exc:
                raise ConfigParseError(f"bad value for {key!r}: {exc}", lineno) from exc
        return out

    prob = convert("problem", _GEN_CONV)
    solv = convert("solver", _SOLVER_CONV)
    est = convert("estimator", _ESTIMATOR_CONV)

    if "seeds" in solv and not solv["seeds"]:
        raise ConfigParseError("seed list is empty", lines.get(("solver", "seeds")))
    mode = est.get("mode", prob.get("mode", FINITE_SUM))
    instance = prob.pop("instance", None)
    prob.setdefault("mode", mode)
    try:
        spec = GeneratorSpec(**prob)
    except GeneratorError as exc:
        raise ConfigParseError(str(exc), lines.get(("problem", None))) from exc

    kw = dict(
        generator=spec,
        mode=mode,
        instance=instance,
        overrides={k: solv[k] for k in ("rho", "eta", "r", "tau") if k in solv},
        plan_overrides={k: est[k] for k in PLAN_KEYS if k in est},
    )
    for key, name in (
        ("K", "K"),
        ("alpha", "alpha"),
        ("seeds", "seeds"),
        ("eps", "eps_targets"),
        ("record_every", "record_every"),
        ("stop_at_eps", "stop_at_eps"),
        ("workers", "workers"),
        ("out", "out"),
    ):
        if key in solv:
            kw[name] = solv[key]
    if "kind" in est:
        kw["estimators"] = est["kind"]
    try:
        return ExperimentConfig(**kw)
    except ConfigParseError as exc:
        msg = str(exc)
        where = next((loc for word, loc in _BLAME if word in msg), None)
        raise ConfigParseError(msg, lines.get(where)) from exc


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, source=str(path))
