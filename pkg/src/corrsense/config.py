"""Campaign configuration files.

The format is a small TOML-compatible subset: ``[section]`` headers,
``key = value`` lines and ``#`` comments. Values are numbers, booleans,
quoted strings or one-line arrays. Physical quantities are quoted strings
with a unit suffix (``"500 kHz"``, ``"2 us"``, ``"8 uT"``); a bare number is
taken in the base unit. Frequencies are written as ordinary frequency (Hz)
or explicitly as ``rad/s`` and are stored as angular frequency.
"""

from dataclasses import dataclass, field, replace
import difflib
import math
import re

import numpy as np

from .errors import ConfigError, DomainError
from .mc_engine import ProtocolSchedule, RunConfig, ScheduleMode, Estimator
from .signal_model import (AcField, DetectionModel, GAMMA_E_DEFAULT, PhysicsConstants,
                           PulseSequence, SequenceKind)

TWO_PI = 2.0 * math.pi
DEFAULT_SEED = 20240601
DEFAULT_TRIALS = 200

PREFIXES = {"": 1.0, "p": 1e-12, "n": 1e-9, "u": 1e-6, "µ": 1e-6, "m": 1e-3,
            "k": 1e3, "M": 1e6, "G": 1e9}

# unit kinds: base unit symbol -> multiplier into the stored SI value
UNITS = {
    "frequency": {"Hz": TWO_PI, "rad/s": 1.0},
    "time": {"s": 1.0},
    "field": {"T": 1.0},
    "angle": {"rad": 1.0},
    "gyro": {"Hz/T": TWO_PI, "rad/s/T": 1.0},
    "count": {},
}

# section -> key -> (kind, required); kind is a unit kind or a plain type name
SCHEMA = {
    "field": {"omega": ("frequency", True), "amplitude": ("field", True),
              "phi0": ("angle", False)},
    "sequence": {"kind": ("str", False), "n": ("int", False), "tau": ("time", True),
                 "theta_convention": ("str", False)},
    "schedule": {"n_s": ("int", True), "n_phi": ("int", True), "t_d": ("time", True),
                 "t_phi": ("time", True), "t_dead": ("time", False), "n_r": ("int", False),
                 "mode": ("str", False)},
    "detection": {"n_nv": ("float", True), "eta": ("float", True)},
    "constants": {"gamma_e": ("gyro", False)},
    "run": {"seed": ("int", False), "trials": ("int", False), "workers": ("int", False)},
    "sweep": {"variable": ("str", True), "start": ("sweepval", False),
              "stop": ("sweepval", False), "points": ("int", False),
              "spacing": ("str", False), "values": ("sweeparr", False)},
    "analysis": {"n_s_values": ("intarr", False), "estimator": ("str", False),
                 "nu": ("int", False), "n_max": ("int", False), "use_sqrt": ("bool", False),
                 "mc": ("bool", False)},
}

SWEEPABLE = {f"{sec}.{key}": kind for sec, keys in SCHEMA.items() if sec in
             ("field", "sequence", "schedule", "detection", "constants")
             for key, (kind, _) in keys.items() if kind not in ("str",)}


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    start: float = None
    stop: float = None
    points: int = None
    spacing: str = "linear"
    explicit: tuple = None

    def values(self):
        if self.explicit is not None:
            return np.array(self.explicit, dtype=float)
        if self.spacing == "log":
            return np.geomspace(self.start, self.stop, self.points)
        return np.linspace(self.start, self.stop, self.points)


@dataclass(frozen=True)
class AnalysisSpec:
    n_s_values: tuple = None
    estimator: str = "variance"
    nu: int = None
    n_max: int = 8
    use_sqrt: bool = False
    mc: bool = False


@dataclass(frozen=True)
class CampaignConfig:
    field: AcField
    sequence: PulseSequence
    schedule: ProtocolSchedule
    detection: DetectionModel
    constants: PhysicsConstants
    run: RunConfig
    sweep: SweepSpec
    theta_convention: str = "quarter"
    analysis: AnalysisSpec = AnalysisSpec()
    defaults_applied: tuple = field(default=(), compare=False)


# ---------------------------------------------------------------- lexing

_SECTION = re.compile(r"^\[([A-Za-z_][A-Za-z0-9_]*)\]$")
_KEYVAL = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.+)$")
_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(\S*)\s*$")


def _strip_comment(line):
    out, quoted = [], False
    for ch in line:
        if ch == '"':
            quoted = not quoted
        elif ch == "#" and not quoted:
            break
        out.append(ch)
    return "".join(out).strip()


def _split_array(body):
    items, cur, quoted = [], [], False
    for ch in body:
        if ch == '"':
            quoted = not quoted
        if ch == "," and not quoted:
            items.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    tail = "".join(cur).strip()
    if tail:
        items.append(tail)
    return items


def parse_literal(text):
    """One TOML-subset value: number, bool, quoted string or flat array."""
    t = text.strip()
    if t.startswith("[") and t.endswith("]"):
        return [parse_literal(x) for x in _split_array(t[1:-1])]
    if len(t) >= 2 and t[0] == '"' and t[-1] == '"':
        return t[1:-1]
    if t in ("true", "false"):
        return t == "true"
    if re.fullmatch(r"[-+]?\d+", t.replace("_", "")):
        return int(t.replace("_", ""))
    try:
        return float(t.replace("_", ""))
    except ValueError:
        raise ValueError(f"cannot parse value {text!r}") from None


def read_entries(text, source="<config>"):
    """Map (section, key) -> (raw value, line number); collects syntax errors."""
    entries, errors = {}, []
    section = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip_comment(raw)
        if not line:
            continue
        m = _SECTION.match(line)
        if m:
            section = m.group(1)
            if section not in SCHEMA:
                errors.append(_unknown(f"[{section}]", section, SCHEMA, lineno))
            continue
        m = _KEYVAL.match(line)
        if not m:
            errors.append(f"line {lineno}: expected 'key = value' or '[section]'")
            continue
        if section is None:
            errors.append(f"line {lineno}: key {m.group(1)!r} outside any section")
            continue
        key, val = m.group(1), m.group(2)
        if section not in SCHEMA:
            continue
        if key not in SCHEMA[section]:
            errors.append(_unknown(f"{section}.{key}", key, SCHEMA[section], lineno))
            continue
        if (section, key) in entries:
            errors.append(f"line {lineno}: duplicate key {section}.{key}")
            continue
        try:
            entries[(section, key)] = (parse_literal(val), lineno)
        except ValueError as exc:
            errors.append(f"line {lineno}: {section}.{key}: {exc}")
    return entries, errors


def _unknown(path, name, valid, lineno):
    close = difflib.get_close_matches(name, list(valid), n=1, cutoff=0.5)
    hint = f"; did you mean {close[0]!r}?" if close else ""
    where = f"line {lineno}: " if lineno is not None else ""
    return f"{where}unknown key {path!r}{hint}"


# ---------------------------------------------------------------- units

def convert(value, kind):
    """Quantity (number or '<number> <unit>') to the stored SI value."""
    if isinstance(value, bool):
        raise ValueError("expected a quantity, got a boolean")
    if isinstance(value, (int, float)):
        return float(value) * (TWO_PI if kind in ("frequency", "gyro") else 1.0)
    if not isinstance(value, str):
        raise ValueError(f"expected a quantity, got {value!r}")
    m = _QUANTITY.match(value)
    if not m:
        raise ValueError(f"cannot read quantity {value!r}")
    number, unit = float(m.group(1)), m.group(2)
    units = UNITS[kind]
    if not unit:
        return number * (TWO_PI if kind in ("frequency", "gyro") else 1.0)
    for base, mult in units.items():
        if unit.endswith(base) and unit[: len(unit) - len(base)] in PREFIXES:
            scale = PREFIXES[unit[: len(unit) - len(base)]]
            # divide by the reciprocal for sub-unit prefixes: 100/1e6 is exactly 1e-4
            value = number / round(1.0 / scale) if scale < 1 else number * scale
            return value * mult
    raise ValueError(f"unit {unit!r} is not a {kind} unit (expected one of "
                     f"{', '.join(units)} with an optional SI prefix)")


def _coerce(value, kind):
    if kind in UNITS:
        return convert(value, kind)
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ValueError(f"expected an integer, got {value!r}")
        return int(value)
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValueError(f"expected a number, got {value!r}")
        return float(value)
    if kind == "str":
        if not isinstance(value, str):
            raise ValueError(f"expected a quoted string, got {value!r}")
        return value
    if kind == "bool":
        if not isinstance(value, bool):
            raise ValueError(f"expected true or false, got {value!r}")
        return value
    if kind == "intarr":
        if not isinstance(value, list):
            raise ValueError("expected an array")
        return tuple(_coerce(v, "int") for v in value)
    raise ValueError(f"no coercion for {kind}")


# ---------------------------------------------------------------- building

def parse_text(text, overrides=(), source="<config>"):
    entries, errors = read_entries(text, source)
    for item in overrides:
        if "=" not in item:
            errors.append(f"--set {item!r}: expected KEY=VALUE")
            continue
        path, val = (s.strip() for s in item.split("=", 1))
        sec, _, key = path.partition(".")
        if sec not in SCHEMA:
            errors.append(_unknown(path, sec, SCHEMA, None) + " (from --set)")
            continue
        if key not in SCHEMA[sec]:
            errors.append(_unknown(path, key, SCHEMA[sec], None) + " (from --set)")
            continue
        try:
            lit = parse_literal(val)
        except ValueError:
            # allow unquoted quantities and names on the command line
            lit = val
        entries[(sec, key)] = (lit, "--set")
    if errors:
        raise ConfigError(errors)
    return build(entries, source)


def parse_config(path, overrides=()):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_text(text, overrides, str(path))


def build(entries, source="<config>"):
    errors, defaults = [], []
    vals = {}

    def where(sec, key):
        line = entries[(sec, key)][1]
        return f"line {line}" if isinstance(line, int) else str(line)

    sweep_var = entries.get(("sweep", "variable"), (None, None))[0]
    sweep_kind = SWEEPABLE.get(sweep_var) if isinstance(sweep_var, str) else None

    for sec, keys in SCHEMA.items():
        for key, (kind, required) in keys.items():
            if (sec, key) not in entries:
                if required and not (f"{sec}.{key}" == sweep_var):
                    errors.append(f"{source}: missing required key {sec}.{key}")
                continue
            raw = entries[(sec, key)][0]
            k = kind
            if kind == "sweepval":
                k = sweep_kind or "float"
            try:
                if kind == "sweeparr":
                    if not isinstance(raw, list) or not raw:
                        raise ValueError("expected a non-empty array")
                    vals[(sec, key)] = tuple(_coerce(v, sweep_kind or "float") for v in raw)
                else:
                    vals[(sec, key)] = _coerce(raw, k)
            except ValueError as exc:
                errors.append(f"{where(sec, key)}: {sec}.{key}: {exc}")
    if sweep_var is not None and sweep_kind is None:
        close = difflib.get_close_matches(str(sweep_var), list(SWEEPABLE), n=1, cutoff=0.5)
        hint = f"; did you mean {close[0]!r}?" if close else ""
        errors.append(f"{where('sweep', 'variable')}: sweep.variable {sweep_var!r} "
                      f"is not a sweepable quantity{hint}")
    if errors:
        raise ConfigError(errors)

    def get(sec, key, default):
        if (sec, key) in vals:
            return vals[(sec, key)]
        defaults.append(f"{sec}.{key} = {default!r}")
        return default

    # a swept required key gets the first sweep value as its nominal setting
    if sweep_var:
        sec, key = sweep_var.split(".")
        if (sec, key) not in vals:
            first = vals.get(("sweep", "values"), (vals.get(("sweep", "start")),))[0]
            if first is not None:
                vals[(sec, key)] = int(first) if SCHEMA[sec][key][0] == "int" else first

    try:
        fld = AcField(vals[("field", "omega")], vals[("field", "amplitude")],
                      get("field", "phi0", 0.0))
        seq = PulseSequence(SequenceKind(get("sequence", "kind", "spin_echo")),
                            vals[("sequence", "tau")], get("sequence", "n", 1))
        convention = get("sequence", "theta_convention", "quarter")
        if convention not in ("quarter", "printed"):
            raise DomainError(f"sequence.theta_convention must be 'quarter' or 'printed', "
                              f"got {convention!r}")
        sched = ProtocolSchedule(vals[("schedule", "n_s")], vals[("schedule", "n_phi")],
                                 vals[("schedule", "t_d")], vals[("schedule", "t_phi")],
                                 get("schedule", "t_dead", 0.0), get("schedule", "n_r", 1),
                                 ScheduleMode(get("schedule", "mode", "delay_major")))
        det = DetectionModel(vals[("detection", "n_nv")], vals[("detection", "eta")])
        consts = PhysicsConstants(get("constants", "gamma_e", GAMMA_E_DEFAULT))
        run = RunConfig(get("run", "seed", DEFAULT_SEED), get("run", "trials", DEFAULT_TRIALS),
                        get("run", "workers", 1))
        sweep = _build_sweep(vals, sweep_var)
        est = vals.get(("analysis", "estimator"), "variance")
        Estimator(est)
        analysis = AnalysisSpec(vals.get(("analysis", "n_s_values")), est,
                                vals.get(("analysis", "nu")), vals.get(("analysis", "n_max"), 8),
                                vals.get(("analysis", "use_sqrt"), False),
                                vals.get(("analysis", "mc"), False))
        if analysis.n_max < 2:
            raise DomainError("analysis.n_max must be >= 2")
    except (DomainError, ValueError, KeyError) as exc:
        raise ConfigError([f"{source}: {exc}"]) from None
    return CampaignConfig(fld, seq, sched, det, consts, run, sweep, convention, analysis,
                          tuple(defaults))


def _build_sweep(vals, var):
    if ("sweep", "values") in vals:
        if any((("sweep", k) in vals) for k in ("start", "stop", "points")):
            raise DomainError("sweep: give either values or start/stop/points, not both")
        return SweepSpec(var, explicit=vals[("sweep", "values")])
    missing = [k for k in ("start", "stop", "points") if ("sweep", k) not in vals]
    if missing:
        raise DomainError(f"sweep: missing {', '.join('sweep.' + k for k in missing)}")
    spacing = vals.get(("sweep", "spacing"), "linear")
    if spacing not in ("linear", "log"):
        raise DomainError(f"sweep.spacing must be 'linear' or 'log', got {spacing!r}")
    start, stop, points = vals[("sweep", "start")], vals[("sweep", "stop")], vals[("sweep", "points")]
    if points < 1:
        raise DomainError("sweep.points must be >= 1")
    if spacing == "log" and not (start > 0 and stop > 0):
        raise DomainError("log sweep needs positive start and stop")
    return SweepSpec(var, start, stop, points, spacing)


# ---------------------------------------------------------------- emitting

_BASE_UNIT = {"frequency": "rad/s", "time": "s", "field": "T", "angle": "rad", "gyro": "rad/s/T"}


def _q(value, kind):
    if kind in _BASE_UNIT:
        return f'"{float(value)!r} {_BASE_UNIT[kind]}"'
    if kind == "float":
        return repr(float(value))
    return str(int(value))


def emit_config(cfg):
    """Canonical text for ``cfg``; parsing it gives back an equal config."""
    f, s, sc = cfg.field, cfg.sequence, cfg.schedule
    kind = SWEEPABLE[cfg.sweep.variable]
    lines = [
        "[field]",
        f"omega = {_q(f.omega, 'frequency')}",
        f"amplitude = {_q(f.amplitude, 'field')}",
        f"phi0 = {_q(f.phi0, 'angle')}",
        "",
        "[sequence]",
        f'kind = "{s.kind.value}"',
        f"n = {s.n}",
        f"tau = {_q(s.tau, 'time')}",
        f'theta_convention = "{cfg.theta_convention}"',
        "",
        "[schedule]",
        f"n_s = {sc.n_s}",
        f"n_phi = {sc.n_phi}",
        f"t_d = {_q(sc.t_d, 'time')}",
        f"t_phi = {_q(sc.t_phi, 'time')}",
        f"t_dead = {_q(sc.t_dead, 'time')}",
        f"n_r = {sc.n_r}",
        f'mode = "{sc.mode.value}"',
        "",
        "[detection]",
        f"n_nv = {float(cfg.detection.n_nv)!r}",
        f"eta = {float(cfg.detection.eta)!r}",
        "",
        "[constants]",
        f"gamma_e = {_q(cfg.constants.gamma_e, 'gyro')}",
        "",
        "[run]",
        f"seed = {cfg.run.master_seed}",
        f"trials = {cfg.run.trials}",
        f"workers = {cfg.run.workers}",
        "",
        "[sweep]",
        f'variable = "{cfg.sweep.variable}"',
    ]
    sw = cfg.sweep
    if sw.explicit is not None:
        lines.append("values = [" + ", ".join(_q(v, kind) for v in sw.explicit) + "]")
    else:
        lines += [f"start = {_q(sw.start, kind)}", f"stop = {_q(sw.stop, kind)}",
                  f"points = {sw.points}", f'spacing = "{sw.spacing}"']
    a = cfg.analysis
    lines += ["", "[analysis]"]
    if a.n_s_values is not None:
        lines.append("n_s_values = [" + ", ".join(str(n) for n in a.n_s_values) + "]")
    lines.append(f'estimator = "{a.estimator}"')
    if a.nu is not None:
        lines.append(f"nu = {a.nu}")
    lines += [f"n_max = {a.n_max}", f"use_sqrt = {str(a.use_sqrt).lower()}",
              f"mc = {str(a.mc).lower()}"]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- sweeping

def apply_value(cfg, variable, value):
    """Copy of cfg with one sweepable quantity replaced."""
    sec, key = variable.split(".")
    if SCHEMA[sec][key][0] == "int":
        value = int(round(value))
    attr = {"field": "field", "sequence": "sequence", "schedule": "schedule",
            "detection": "detection", "constants": "constants"}[sec]
    obj = getattr(cfg, attr)
    return replace(cfg, **{attr: replace(obj, **{key: value})})
