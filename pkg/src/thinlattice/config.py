"""Run configuration: sectioned key/value files parsed strictly.

Numbers may be written as plain floats, fractions (``1/12``) or small
arithmetic expressions in ``pi`` and ``sqrt`` (``pi*sqrt(5/2)``).  Lists are
comma separated.  Unknown sections or keys are errors reported with their
line number.
"""

from __future__ import annotations

import ast
import configparser
import copy
import hashlib
import json
import math
import operator
import re
from dataclasses import dataclass, field

__all__ = [
    "ConfigError",
    "RunConfig",
    "COMMANDS",
    "DEFAULTS",
    "REQUIRED",
    "parse_config",
    "load_config",
    "parse_number",
]

COMMANDS = ("nearfield", "mixed", "scattering", "bands", "friedrichs", "floquet", "all")

# section -> key -> (kind, default); kind in {str, int, float, floats, bool, optfloat}
DEFAULTS: dict[str, dict[str, tuple[str, object]]] = {
    "run": {
        "command": ("str", None),
        "output": ("str", None),
        "seed": ("int", 20240607),
        "write_mtx": ("bool", False),
    },
    "solver": {
        "eig_tol": ("float", 1e-10),
        "linear_tol": ("float", 1e-8),
    },
    "nearfield": {
        "R": ("float", 2.5),
        "spacings": ("floats", [1 / 8, 1 / 12, 1 / 16]),
        "cut_correction": ("bool", True),
    },
    "mixed": {
        "R": ("float", 2.5),
        "h": ("float", 1 / 12),
        "k": ("int", 3),
    },
    "scattering": {
        "R": ("float", 2.5),
        "h": ("float", 1 / 20),
        "convergence_spacings": ("floats", [1 / 12, 1 / 16, 1 / 20]),
        "spectral_parameter": ("str", "discrete"),
        "full": ("bool", False),
        "imag_tol": ("float", 0.02),
    },
    "bands": {
        "n_per_axis": ("int", 33),
        "p_max": ("int", 3),
        "eps": ("float", 0.1),
        "path_points": ("int", 16),
        "r_m": ("optfloat", None),
        "t_m": ("optfloat", None),
        "t_perp_m": ("optfloat", None),
        "K": ("optfloat", None),
        "beta1": ("optfloat", None),
        "mu1": ("optfloat", None),
    },
    "friedrichs": {
        "a": ("floats", [math.pi * math.sqrt(2.5)]),
        "R": ("floats", [1.0, 2.0, 4.0, 10.0]),
        "n_samples": ("int", 10_000),
        "h": ("float", 1e-3),
        "L": ("float", 6.0),
    },
    "floquet": {
        "eps": ("floats", [1 / 2, 1 / 3, 1 / 4]),
        "h_ratio": ("int", 4),
        "k": ("int", 6),
        "R_junction": ("float", 3.0),
        "R_scattering": ("float", 2.5),
    },
}

REQUIRED = ("run.command", "run.output")

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_NAMES = {"pi": math.pi, "inf": math.inf}
_FUNCS = {"sqrt": math.sqrt}


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        super().__init__("invalid configuration:\n  " + "\n  ".join(problems))
        self.problems = problems


def parse_number(text: str) -> float:
    """Evaluate a float literal, fraction or arithmetic in ``pi``/``sqrt``."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.Name) and node.id in _NAMES:
            return _NAMES[node.id]
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS
                and len(node.args) == 1 and not node.keywords):
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise ValueError(f"unsupported expression {text!r}")

    try:
        return float(ev(ast.parse(text.strip(), mode="eval")))
    except SyntaxError as exc:
        raise ValueError(f"cannot parse number {text!r}") from exc


def _convert(kind: str, raw: str):
    raw = raw.strip()
    if kind == "str":
        return raw
    if kind == "int":
        v = parse_number(raw)
        if v != int(v):
            raise ValueError(f"expected an integer, got {raw!r}")
        return int(v)
    if kind == "float":
        return parse_number(raw)
    if kind == "optfloat":
        return None if raw.lower() in ("", "none") else parse_number(raw)
    if kind == "floats":
        return [parse_number(p) for p in raw.split(",") if p.strip()]
    if kind == "bool":
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    raise AssertionError(kind)


def _format(kind: str, value) -> str:
    if value is None:
        return ""
    if kind == "floats":
        return ", ".join(repr(float(v)) for v in value)
    if kind == "float" or kind == "optfloat":
        return repr(float(value))
    if kind == "bool":
        return "true" if value else "false"
    return str(value)


def _line_numbers(text: str) -> dict:
    """Map ``(section, key)`` and ``(section, None)`` to 1-based line numbers."""
    out = {}
    section = None
    for no, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        m = re.match(r"\[(.+)\]$", s)
        if m:
            section = m.group(1).strip()
            out.setdefault((section, None), no)
            continue
        m = re.match(r"([^=:]+)[=:]", s)
        if m and section is not None:
            out.setdefault((section, m.group(1).strip().lower()), no)
    return out


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)

    def __getitem__(self, dotted: str):
        sec, key = dotted.split(".", 1)
        return self.values[sec][key]

    def section(self, name: str) -> dict:
        return self.values[name]

    @property
    def command(self) -> str:
        return self.values["run"]["command"]

    def to_ini(self, include_output: bool = True) -> str:
        lines = []
        for sec, keys in DEFAULTS.items():
            lines.append(f"[{sec}]")
            for key, (kind, _) in keys.items():
                if (sec, key) == ("run", "output") and not include_output:
                    continue
                lines.append(f"{key} = {_format(kind, self.values[sec][key])}")
            lines.append("")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return copy.deepcopy(self.values)

    def digest(self, exclude_output: bool = True) -> str:
        """SHA-256 of the canonical JSON form; the output path is excluded by default."""
        d = self.to_dict()
        if exclude_output:
            d["run"].pop("output", None)
        blob = json.dumps(d, sort_keys=True, default=repr).encode()
        return hashlib.sha256(blob).hexdigest()

    def apply_overrides(self, overrides) -> None:
        problems = []
        for item in overrides or ():
            if "=" not in item:
                problems.append(f"override {item!r}: expected section.key=value")
                continue
            name, raw = item.split("=", 1)
            if "." not in name:
                problems.append(f"override {item!r}: expected section.key=value")
                continue
            sec, key = (p.strip() for p in name.split(".", 1))
            key_l = _canonical_key(sec, key)
            if sec not in DEFAULTS or key_l is None:
                problems.append(f"override {item!r}: unknown key {sec}.{key}")
                continue
            try:
                self.values[sec][key_l] = _convert(DEFAULTS[sec][key_l][0], raw)
            except ValueError as exc:
                problems.append(f"override {item!r}: {exc}")
        if problems:
            raise ConfigError(problems)

    def validate(self) -> None:
        problems = [f"missing required field {name}" for name in REQUIRED if self[name] in (None, "")]
        cmd = self.values["run"]["command"]
        if cmd not in (None, "") and cmd not in COMMANDS:
            problems.append(f"run.command = {cmd!r}: expected one of {', '.join(COMMANDS)}")
        sp = self.values["scattering"]["spectral_parameter"]
        if sp not in ("discrete", "threshold"):
            try:
                parse_number(sp)
            except ValueError:
                problems.append(f"scattering.spectral_parameter = {sp!r}: expected discrete, threshold or a number")
        if self.values["bands"]["n_per_axis"] < 9:
            problems.append("bands.n_per_axis must be >= 9")
        if self.values["floquet"]["k"] < 4:
            problems.append("floquet.k must be >= 4")
        if len(self.values["floquet"]["eps"]) < 2:
            problems.append("floquet.eps needs two or more values")
        if problems:
            raise ConfigError(problems)


def _canonical_key(section: str, key: str) -> str | None:
    for k in DEFAULTS.get(section, {}):
        if k.lower() == key.lower():
            return k
    return None


def _defaults() -> dict:
    return {sec: {k: copy.deepcopy(d) for k, (_, d) in keys.items()} for sec, keys in DEFAULTS.items()}


def parse_config(text: str, validate: bool = True) -> RunConfig:
    """Parse configuration text; every problem is collected before raising."""
    lines = _line_numbers(text)
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"line {getattr(exc, 'lineno', '?')}: {exc.message if hasattr(exc, 'message') else exc}"])
    values = _defaults()
    problems = []
    for sec in parser.sections():
        if sec not in DEFAULTS:
            problems.append(f"line {lines.get((sec, None), '?')}: unknown section [{sec}]")
            continue
        for key, raw in parser.items(sec):
            canon = _canonical_key(sec, key)
            where = f"line {lines.get((sec, key.lower()), '?')}"
            if canon is None:
                problems.append(f"{where}: unknown key {key!r} in [{sec}]")
                continue
            try:
                values[sec][canon] = _convert(DEFAULTS[sec][canon][0], raw)
            except ValueError as exc:
                problems.append(f"{where}: {sec}.{canon}: {exc}")
    if problems:
        raise ConfigError(problems)
    cfg = RunConfig(values)
    if validate:
        cfg.validate()
    return cfg


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), validate=False)
