"""Run configuration: a flat ``section.key = value`` text format.

Grammar
-------
One assignment per line, ``#`` starts a comment, blank lines are ignored.
Keys are dotted identifiers; values are quoted strings, ``true``/``false``,
numbers, arithmetic on numbers (``1/3``, ``-log(2)/2``) or tuples of those
(``(0.5, 1/3), (2, 2/3)``). Coefficient expressions for an inline diffusion
are strings in the variable ``x``, e.g. ``diffusion.volatility = "1 + x**2"``.

Recognised keys::

    mode                   classify | embed | verify | qtable
    preset                 registered preset name
    preset.<param>         preset parameter (gamma, theta, xi, sigma)
    diffusion.drift        expression in x
    diffusion.volatility   expression in x
    diffusion.volatility_prime   optional expression in x
    diffusion.start, diffusion.lo, diffusion.hi
    target.family          atoms | two_point | uniform | gaussian | table | example
    target.atoms           tuples (location, mass)
    target.a, target.b, target.p           two_point parameters
    target.lo, target.hi                   uniform support
    target.mean, target.std                gaussian parameters
    target.file                            CSV with columns x, F
    target.name                            example target of the preset
    engine.<field>         any EngineConfig field
    classify.T             horizon for the bounded-time question
    qtable.range           "a:b:n"
    output.dir, output.dump_maps
"""

import ast
import math
import operator
from dataclasses import dataclass, field, fields
from typing import Dict, Optional

import numpy as np

from . import targets
from .engine import EngineConfig
from .errors import ParseError, ValidationError
from .model import DiffusionSpec, TargetLaw

MODES = ("classify", "embed", "verify", "qtable")

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNOPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}
_FUNCS = {name: getattr(np, name) for name in
          ("exp", "log", "sqrt", "sin", "cos", "tan", "sinh", "cosh", "tanh", "arctan",
           "abs", "log1p", "expm1", "minimum", "maximum", "where")}
_CONSTS = {"pi": math.pi, "e": math.e, "inf": math.inf, "nan": math.nan}

_ENGINE_FIELDS = {f.name: f.type for f in fields(EngineConfig)}
_KNOWN = {
    "mode", "preset", "diffusion.drift", "diffusion.volatility", "diffusion.volatility_prime",
    "diffusion.start", "diffusion.lo", "diffusion.hi", "target.family", "target.atoms",
    "target.a", "target.b", "target.p", "target.lo", "target.hi", "target.mean", "target.std",
    "target.file", "target.name", "classify.T", "qtable.range", "output.dir", "output.dump_maps",
} | {f"engine.{k}" for k in _ENGINE_FIELDS}
_PRESET_PARAMS = {"gamma", "theta", "xi", "sigma"}


def _eval_node(node, names):
    if isinstance(node, ast.Expression):
        return _eval_node(node.body, names)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float, str, bool)):
        return node.value
    if isinstance(node, ast.Tuple):
        return tuple(_eval_node(e, names) for e in node.elts)
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval_node(node.left, names), _eval_node(node.right, names))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
        return _UNOPS[type(node.op)](_eval_node(node.operand, names))
    if isinstance(node, ast.Name) and node.id in names:
        return names[node.id]
    if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
            and node.func.id in _FUNCS and not node.keywords):
        return _FUNCS[node.func.id](*[_eval_node(a, names) for a in node.args])
    raise ValueError(f"unsupported syntax: {ast.dump(node)[:60]}")


def parse_value(text, lineno=None):
    """Evaluate a config value with a whitelist evaluator (no names beyond constants)."""
    low = text.strip()
    if low in ("true", "false"):
        return low == "true"
    try:
        tree = ast.parse(low, mode="eval")
        return _eval_node(tree, _CONSTS)
    except (SyntaxError, ValueError, TypeError, ZeroDivisionError) as exc:
        raise ParseError(f"line {lineno}: cannot parse value {text!r} ({exc})") from None


def compile_expression(expr, key="expression"):
    """Vectorised function of ``x`` from a whitelisted arithmetic expression."""
    try:
        tree = ast.parse(expr, mode="eval")
        probe = _eval_node(tree, {**_CONSTS, "x": np.linspace(-0.5, 0.5, 3)})
        np.asarray(probe, dtype=float)
    except (SyntaxError, ValueError, TypeError) as exc:
        raise ValidationError(f"{key}: bad expression {expr!r} ({exc})") from None

    def fun(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            return np.asarray(_eval_node(tree, {**_CONSTS, "x": x}), dtype=float) * np.ones_like(x)
    return fun


@dataclass
class RunConfig:
    mode: Optional[str] = None
    preset: Optional[str] = None
    preset_params: Dict[str, float] = field(default_factory=dict)
    diffusion: Dict[str, object] = field(default_factory=dict)
    target: Dict[str, object] = field(default_factory=dict)
    engine: Dict[str, object] = field(default_factory=dict)
    T: Optional[float] = None
    qtable_range: Optional[str] = None
    out_dir: str = "."
    dump_maps: bool = False

    def engine_config(self, **overrides) -> EngineConfig:
        return EngineConfig(**{**self.engine, **overrides})

    def build_spec(self):
        """``(DiffusionSpec, Preset or None)`` for this run."""
        from .presets import get_preset
        if self.preset is not None:
            p = get_preset(self.preset, **self.preset_params)
            return p.spec, p
        d = self.diffusion
        drift = compile_expression(d.get("drift", "0"), "diffusion.drift")
        vol = compile_expression(d["volatility"], "diffusion.volatility")
        vp = d.get("volatility_prime")
        spec = DiffusionSpec(drift=drift, volatility=vol, start=float(d.get("start", 0.0)),
                             state_lo=float(d.get("lo", -math.inf)),
                             state_hi=float(d.get("hi", math.inf)), name="inline",
                             volatility_prime=None if vp is None else
                             compile_expression(vp, "diffusion.volatility_prime"))
        spec.validate()
        return spec, None

    def build_target(self, preset=None) -> TargetLaw:
        t = self.target
        fam = t.get("family")
        if fam is None and "atoms" in t:
            fam = "atoms"
        try:
            if fam == "atoms":
                return targets.atoms(_pairs(t["atoms"]))
            if fam == "two_point":
                return targets.two_point(float(t["a"]), None if "b" not in t else float(t["b"]),
                                         float(t.get("p", 0.5)))
            if fam == "uniform":
                return targets.uniform(float(t.get("lo", -1.0)), float(t.get("hi", 1.0)))
            if fam == "gaussian":
                return targets.gaussian(float(t.get("mean", 0.0)), float(t.get("std", 1.0)))
            if fam == "table":
                return targets.load_table(t["file"])
            if fam == "example":
                if preset is None:
                    raise ValidationError("target.family = \"example\" needs a preset")
                name = t.get("name")
                if name not in preset.targets:
                    raise ValidationError(f"target.name: preset {preset.name} has examples "
                                          f"{sorted(preset.targets)}")
                return preset.targets[name]
        except KeyError as exc:
            raise ValidationError(f"target.{exc.args[0]} is required for family {fam!r}") from None
        raise ValidationError(f"target.family: unknown family {fam!r}")


def _pairs(value):
    if isinstance(value, tuple) and len(value) == 2 and not isinstance(value[0], tuple):
        value = (value,)
    try:
        return [(float(a), float(p)) for a, p in value]
    except (TypeError, ValueError):
        raise ValidationError("target.atoms must be tuples (location, mass)") from None


def _split_line(raw, lineno):
    # strip comments outside quotes
    out, quote = [], None
    for ch in raw:
        if quote:
            if ch == quote:
                quote = None
        elif ch in "\"'":
            quote = ch
        elif ch == "#":
            break
        out.append(ch)
    line = "".join(out).strip()
    if not line:
        return None
    if "=" not in line:
        raise ParseError(f"line {lineno}: expected 'key = value'")
    key, value = (s.strip() for s in line.split("=", 1))
    if not key or not all(part.isidentifier() for part in key.split(".")):
        raise ParseError(f"line {lineno}: bad key {key!r}")
    if not value:
        raise ParseError(f"line {lineno}: missing value for {key}")
    return key, value


def parse_config(text) -> RunConfig:
    """Parse and validate a run configuration.

    Raises
    ------
    ParseError
        Syntax errors, duplicate keys and unknown keys, with line numbers.
    ValidationError
        Values of the wrong type or out of range, naming the key.
    """
    raw = {}
    where = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        kv = _split_line(line, lineno)
        if kv is None:
            continue
        key, value = kv
        if key in raw:
            raise ParseError(f"line {lineno}: duplicate key {key} (first set on line {where[key]})")
        is_param = key.startswith("preset.") and key.split(".", 1)[1] in _PRESET_PARAMS
        if key not in _KNOWN and not is_param:
            raise ParseError(f"line {lineno}: unknown key {key}")
        raw[key] = parse_value(value, lineno)
        where[key] = lineno
    return _build(raw)


def _typed(key, value, kind):
    if kind is str:
        if not isinstance(value, str):
            raise ValidationError(f"{key} must be a quoted string")
        return value
    if kind is bool:
        if not isinstance(value, bool):
            raise ValidationError(f"{key} must be true or false")
        return value
    if isinstance(value, (bool, str, tuple)):
        raise ValidationError(f"{key} must be a number")
    if kind is int:
        if float(value) != int(value):
            raise ValidationError(f"{key} must be an integer")
        return int(value)
    return float(value)


def _build(raw) -> RunConfig:
    cfg = RunConfig()
    if "mode" in raw:
        cfg.mode = _typed("mode", raw["mode"], str)
        if cfg.mode not in MODES:
            raise ValidationError(f"mode must be one of {', '.join(MODES)}")
    has_inline = any(k.startswith("diffusion.") for k in raw)
    if ("preset" in raw) == has_inline:
        raise ValidationError("give exactly one of preset or diffusion.*")
    if "preset" in raw:
        cfg.preset = _typed("preset", raw["preset"], str)
    for key, value in raw.items():
        section, _, name = key.partition(".")
        if section == "preset" and name:
            cfg.preset_params[name] = _typed(key, value, float)
        elif section == "diffusion":
            kind = str if name in ("drift", "volatility", "volatility_prime") else float
            cfg.diffusion[name] = _typed(key, value, kind)
        elif section == "target":
            if name == "atoms":
                cfg.target[name] = value
            else:
                kind = str if name in ("family", "file", "name") else float
                cfg.target[name] = _typed(key, value, kind)
        elif section == "engine":
            kind = {"int": int, "float": float, "str": str}.get(
                getattr(_ENGINE_FIELDS[name], "__name__", str(_ENGINE_FIELDS[name])), float)
            cfg.engine[name] = _typed(key, value, kind)
    if has_inline and "volatility" not in cfg.diffusion:
        raise ValidationError("diffusion.volatility is required for an inline diffusion")
    if "classify.T" in raw:
        cfg.T = _typed("classify.T", raw["classify.T"], float)
        if not cfg.T > 0:
            raise ValidationError("classify.T must be positive")
    if "qtable.range" in raw:
        cfg.qtable_range = _typed("qtable.range", raw["qtable.range"], str)
        parse_range(cfg.qtable_range)
    if "output.dir" in raw:
        cfg.out_dir = _typed("output.dir", raw["output.dir"], str)
    if "output.dump_maps" in raw:
        cfg.dump_maps = _typed("output.dump_maps", raw["output.dump_maps"], bool)
    try:
        cfg.engine_config()
    except (ValueError, TypeError) as exc:
        raise ValidationError(f"engine: {exc}") from None
    return cfg


def parse_range(text):
    """``"a:b:n"`` to ``numpy.linspace(a, b, n)``."""
    try:
        a, b, n = text.split(":")
        a, b, n = float(parse_value(a)), float(parse_value(b)), int(n)
    except (ValueError, ParseError):
        raise ValidationError(f"range {text!r} must look like a:b:n") from None
    if n < 1 or not a <= b:
        raise ValidationError(f"range {text!r} needs a <= b and n >= 1")
    return np.linspace(a, b, n)
