"""Experiment configuration files.

The format is INI-style (read with :mod:`configparser`).  Keys may be
written fully dotted at the top of the file or grouped in sections, so the
two snippets below are equivalent::

    rates.family = geometric_regular
    rates.ratio = 4

    [rates]
    family = geometric_regular
    ratio = 4

Nested sections use dots too (``[triple.nu]``).  Every recognised key is
listed in :data:`SCHEMA`; anything else is rejected with a suggestion.
"""

from dataclasses import dataclass, field
import configparser
import difflib
import hashlib
import os
import re

from .errors import BDPError, ParseError, ValidationError
from .measures import build_measure
from .rates import build_rates
from .triple import ParameterTriple

__all__ = ["SCHEMA", "COMMANDS", "ExperimentPlan", "parse_config", "parse_config_text", "parse_fn_spec"]

COMMANDS = ("classify", "resolvent", "approx", "simulate", "distance", "mc")
_ROOT = "__root__"


def _float(s):
    return float(s)


def _int(s):
    return int(s)


def _floats(s):
    return [float(x) for x in re.split(r"[,\s]+", s.strip()) if x]


def _ints(s):
    return [int(x) for x in re.split(r"[,\s]+", s.strip()) if x]


def _str(s):
    return s.strip()


def _choice(*opts):
    def parse(s):
        v = s.strip().lower()
        if v not in opts:
            raise ValueError(f"expected one of {', '.join(opts)}")
        return v
    return parse


def _entries(s):
    """``"0:0.5, 3:0.25"`` -> ``{0: 0.5, 3: 0.25}``."""
    out = {}
    for item in re.split(r"[,\s]+", s.strip()):
        if not item:
            continue
        k, _, v = item.partition(":")
        if not _:
            raise ValueError(f"entry {item!r} is not of the form k:weight")
        out[int(k)] = float(v)
    return out


def _params(s):
    """``"ratio=4"`` or ``"C=1, rho=0.5"`` -> dict; values become floats when they parse as such."""
    out = {}
    for item in re.split(r"[,;]\s*", s.strip()):
        if not item:
            continue
        k, eq, v = item.partition("=")
        if not eq or not k.strip():
            raise ValueError(f"parameter {item!r} is not of the form name=value")
        v = v.strip()
        try:
            out[k.strip()] = float(v)
        except ValueError:
            out[k.strip()] = v
    return out


_MEASURE_KEYS = {"family": _str, "params": _params, "C": _float, "rho": _float, "p": _float, "entries": _entries,
                 "prefix": _floats}

SCHEMA = {
    "command": _choice(*COMMANDS),
    "rates.family": _str,
    "rates.params": _params,
    "rates.ratio": _float,
    "rates.a": _str,
    "rates.b": _str,
    "rates.tail": _choice("constant", "geometric"),
    "rates.tail_ratio": _float,
    "triple.gamma": _float,
    "triple.beta": _float,
    **{f"triple.nu.{k}": v for k, v in _MEASURE_KEYS.items()},
    **{f"triple.nu.tail.{k}": v for k, v in _MEASURE_KEYS.items() if k not in ("prefix",)},
    "classify.tol": _float,
    "resolvent.alpha": _floats,
    "resolvent.f": _str,
    "resolvent.states": _int,
    "resolvent.tol": _float,
    "resolvent.Nmax": _int,
    "approx.scheme": _choice("truncation", "tailshift", "wang", "constant"),
    "approx.n_grid": _ints,
    "approx.alphas": _floats,
    "approx.k_probe": _int,
    "approx.threshold": _float,
    "approx.f": _str,
    "approx.K": _int,
    "approx.reports": _str,
    "sim.cap": _int,
    "sim.horizon": _float,
    "sim.max_events": _int,
    "simulate.process": _choice("minimal", "doob", "wang"),
    "simulate.i0": _int,
    "simulate.count": _int,
    "simulate.n": _int,
    "distance.path1": _str,
    "distance.path2": _str,
    "distance.Jmax": _int,
    "distance.T": _float,
    "distance.grid": _int,
    "mc.experiment": _choice("dprime", "fdd"),
    "mc.scheme": _choice("truncation", "tailshift", "wang", "constant"),
    "mc.n_grid": _ints,
    "mc.count": _int,
    "mc.seed": _int,
    "mc.workers": _int,
    "mc.i0": _int,
    "mc.times": _floats,
    "mc.test_fns": _str,
    "mc.horizon": _float,
    "mc.threshold": _float,
    "mc.Jmax": _int,
}


def parse_fn_spec(text):
    """Build a StateFunction from ``indicator:0,1``, ``const:1`` or ``one``.

    ``indicator`` may list ``inf`` and ``cem``; ``const`` functions also take
    their value at the cemetery.
    """
    from .functions import StateFunction

    kind, _, arg = text.strip().partition(":")
    kind = kind.strip().lower()
    if kind in ("one", "const", "constant"):
        c = float(arg) if arg.strip() else 1.0
        return StateFunction.constant(c)
    if kind in ("indicator", "ind"):
        items = [x for x in re.split(r"[,\s]+", arg.strip()) if x]
        finite = [int(x) for x in items if x not in ("inf", "cem")]
        return StateFunction.indicator(finite, include_inf="inf" in items, include_cem="cem" in items)
    raise ValueError(f"unknown function spec {text!r} (use indicator:k,.. or const:c)")


@dataclass
class ExperimentPlan:
    """Validated configuration.  ``values`` holds the typed flat keys."""

    values: dict
    rates: object
    triple: object = None
    source: str = ""
    seed: int | None = None
    digest: str = ""
    lines: dict = field(default_factory=dict, repr=False)

    def get(self, key, default=None):
        return self.values.get(key, default)

    @property
    def command(self):
        return self.values.get("command")


def _flatten(text):
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"),
                                   inline_comment_prefixes=("#",), strict=True)
    cp.optionxform = str
    try:
        cp.read_string(f"[{_ROOT}]\n" + text)
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] - 1
        src = text.splitlines()[line - 1].strip() if 0 < line <= len(text.splitlines()) else ""
        raise ParseError(line, f"cannot parse {src!r}") from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ParseError(max(getattr(exc, "lineno", 1) - 1, 1), str(exc).split(":", 1)[-1].strip()) from None
    except configparser.Error as exc:
        raise ParseError(1, str(exc)) from None
    # line numbers of keys, for diagnostics
    lines = {}
    section = ""
    for no, raw in enumerate(text.splitlines(), 1):
        s = raw.strip()
        m = re.match(r"\[(.+)\]$", s)
        if m:
            section = m.group(1).strip()
        elif "=" in s and not s.startswith(("#", ";")):
            k = s.split("=", 1)[0].strip()
            lines[f"{section}.{k}" if section else k] = no
    flat = {}
    for sec in cp.sections():
        for k, v in cp.items(sec):
            key = k if sec == _ROOT else f"{sec}.{k}"
            if key in flat:
                raise ParseError(lines.get(key, 0), f"key {key} given twice")
            flat[key] = v
    return flat, lines


def _merge_params(d, where):
    extra = d.pop("params", {})
    clash = set(extra) & set(d)
    if clash:
        raise ValidationError(f"{where}.params", f"repeats {sorted(clash)}")
    d.update(extra)
    return d


def _blame(msg, desc):
    """Most specific ``triple.*`` key named in an error message."""
    for k in ("gamma", "beta"):
        if msg.startswith(k):
            return f"triple.{k}"
    for k in ("rho", "C", "p", "entries", "prefix"):
        if re.search(rf"\b{k}\b", msg) and desc and k in desc:
            return f"triple.nu.{k}"
    return "triple.nu"


def _measure_desc(vals, prefix):
    d = {k[len(prefix):]: v for k, v in vals.items() if k.startswith(prefix) and ".tail." not in k[len(prefix) - 1:]}
    tail = {k[len(prefix) + 5:]: v for k, v in vals.items() if k.startswith(prefix + "tail.")}
    _merge_params(d, prefix.rstrip("."))
    if tail:
        d["tail"] = _merge_params(tail, prefix + "tail")
    return d or None


def parse_config_text(text, source="<string>"):
    """Parse and validate configuration text.

    Raises
    ------
    ParseError
        On syntax errors (with the offending line).
    ValidationError
        On unknown keys, malformed values or inconsistent parameters.
    """
    flat, lines = _flatten(text)
    vals = {}
    for key, raw in flat.items():
        if key not in SCHEMA:
            near = difflib.get_close_matches(key, SCHEMA.keys(), n=1)
            hint = f"; did you mean {near[0]!r}?" if near else ""
            raise ValidationError(key, f"unknown key{hint}")
        try:
            vals[key] = SCHEMA[key](raw)
        except ValueError as exc:
            raise ValidationError(key, f"bad value {raw!r}: {exc}") from None
    if "rates.family" not in vals:
        raise ValidationError("rates.family", "required")
    rdesc = _merge_params({k[6:]: v for k, v in vals.items() if k.startswith("rates.")}, "rates")
    if rdesc.get("family", "").lower() == "table":
        for ab in ("a", "b"):
            if ab in rdesc:
                try:
                    rdesc[ab] = _floats(rdesc[ab])
                except ValueError as exc:
                    raise ValidationError(f"rates.{ab}", str(exc)) from None
    try:
        rates = build_rates(rdesc)
    except BDPError as exc:
        raise ValidationError("rates", str(exc)) from None
    except (ValueError, TypeError, SyntaxError, NameError) as exc:
        raise ValidationError("rates", f"{type(exc).__name__}: {exc}") from None
    triple = None
    if any(k.startswith("triple.") for k in vals):
        desc = _measure_desc(vals, "triple.nu.")
        try:
            nu = build_measure(desc)
            triple = ParameterTriple(vals.get("triple.gamma", 0.0), vals.get("triple.beta", 0.0), nu)
        except (BDPError, ValueError, TypeError) as exc:
            raise ValidationError(_blame(str(exc), desc), str(exc)) from None
    canon = "\n".join(f"{k}={flat[k].strip()}" for k in sorted(flat))
    digest = hashlib.sha256(canon.encode()).hexdigest()[:12]
    return ExperimentPlan(vals, rates, triple, source, vals.get("mc.seed"), digest, lines)


def parse_config(path):
    """Read a UTF-8 configuration file; see :func:`parse_config_text`."""
    if not os.path.isfile(path):
        raise ValidationError("--config", f"no such file {path!r}")
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except UnicodeDecodeError as exc:
        raise ParseError(1, f"not UTF-8: {exc}") from None
    return parse_config_text(text, source=path)
