"""Flat ``section.key = value`` scenario configuration with a typed schema."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

REQUIRED = object()

FAMILIES = ("uniform", "thomas_fermi", "gpe", "vortex", "vortnovort", "planes")
SOLVERS = ("none", "kink", "pulse", "dispersion", "planes")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(eval_number(t)) for t in text.replace(",", " ").split())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.replace(",", " ").split())


def _words(text: str) -> tuple[str, ...]:
    return tuple(t for t in text.replace(",", " ").split())


def eval_number(text: str) -> float:
    """Float literal, also accepting ``pi`` and simple multiples such as ``pi/2`` or ``0.5*pi``."""
    t = text.strip().lower()
    try:
        return float(t)
    except ValueError:
        pass
    if "pi" not in t:
        raise ValueError(f"not a number: {text!r}")
    num, _, den = t.partition("/")
    factor = num.replace("pi", "").replace("*", "").strip() or "1"
    value = (-1.0 if factor == "-" else float(factor)) * math.pi
    return value / float(den) if den else value


# section -> key -> (parser, default)
SCHEMA: dict[str, dict[str, tuple]] = {
    "scenario": {
        "name": (str, REQUIRED),
        "seed": (int, 0),
        "kT": (eval_number, 0.0),
    },
    "grid": {
        "shape": (_ints, REQUIRED),
        "extent": (_floats, None),
        "length": (_floats, None),
        "bc": (_words, None),
    },
    "background": {
        "family": (str, REQUIRED),
        "V0": (eval_number, 1.0),
        "m": (eval_number, 1.0),
        "hbar": (eval_number, 1.0),
        "n_L0": (eval_number, None),
        "n_H0": (eval_number, None),
        "mu": (eval_number, None),
        "k": (int, 0),
        "v": (_floats, None),
        "trap_omega": (eval_number, 0.0),
        "N_target": (eval_number, None),
        "mu_H": (eval_number, None),
        "w": (eval_number, None),
        "circulation": (int, None),
        "amplitude": (eval_number, None),
        "t_perp": (eval_number, None),
        "gamma0": (eval_number, math.pi),
        "tol": (eval_number, 1e-10),
    },
    "states": {
        "alpha": (eval_number, None),
        "w": (eval_number, None),
        "cutoff": (int, None),
    },
    "solver": {
        "kind": (str, "none"),
        "dt": (eval_number, None),
        "cfl": (eval_number, 0.5),
        "steps": (int, 0),
        "stride": (int, 0),
        "u_kink": (eval_number, 0.0),
        "x0": (eval_number, None),
        "amplitude": (eval_number, 1e-3),
        "width": (eval_number, 1.0),
        "modes": (int, 3),
        "sponge": (eval_number, 0.0),
        "periods": (eval_number, 20.0),
        "snapshots": (int, 0),
    },
    "validate": {
        "tol": (eval_number, 1e-2),
        "amplitude": (eval_number, 1e-2),
        "wavenumber": (eval_number, 1.0),
        "harmonic_tol": (eval_number, None),
        "waive": (_words, ()),
        "waiver_reason": (str, ""),
    },
    "figure": {
        "w": (eval_number, None),
        "extent": (eval_number, 4.0),
        "points": (int, 161),
        "quiver_stride": (int, 8),
    },
}

FAMILY_KEYS = {
    "uniform": ("V0", "n_L0", "n_H0"),
    "thomas_fermi": ("V0", "mu", "trap_omega", "n_L0"),
    "gpe": ("V0", "N_target"),
    "vortex": ("V0", "n_H0", "circulation", "amplitude"),
    "vortnovort": ("V0", "n_H0", "n_L0", "w"),
    "planes": ("V0", "n_L0", "n_H0", "t_perp"),
}


def parse_text(text: str, source: str = "<config>") -> dict[str, dict[str, str]]:
    """Raw ``{section: {key: value}}`` mapping; ``#`` starts a comment."""
    raw: dict[str, dict[str, str]] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'section.key = value'", path=f"line {lineno}")
        lhs, value = (s.strip() for s in line.split("=", 1))
        set_value(raw, lhs, value, where=f"{source}:{lineno}")
    return raw


def set_value(raw: dict, dotted: str, value: str, where: str = "--set"):
    section, dot, key = dotted.partition(".")
    if not dot or not section or not key:
        raise ConfigError(f"{where}: key {dotted!r} is not of the form section.key", path=dotted)
    if section not in SCHEMA or key not in SCHEMA[section]:
        raise ConfigError(f"{where}: unknown key {dotted!r}", path=dotted)
    raw.setdefault(section, {})[key] = value


def load(path) -> dict[str, dict[str, str]]:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}", path=str(p))
    return parse_text(p.read_text(), str(p))


@dataclass
class ScenarioConfig:
    values: dict[str, dict[str, object]]
    raw: dict[str, dict[str, str]] = field(default_factory=dict)

    def __getitem__(self, dotted: str):
        section, _, key = dotted.partition(".")
        return self.values[section][key]

    @property
    def name(self) -> str:
        return str(self["scenario.name"])

    @property
    def family(self) -> str:
        return str(self["background.family"])

    def lines(self) -> list[str]:
        """Canonical ``section.key = value`` lines of the explicitly set keys."""
        return [f"{s}.{k} = {self.raw[s][k]}" for s in sorted(self.raw) for k in sorted(self.raw[s])]

    @classmethod
    def from_raw(cls, raw: dict[str, dict[str, str]], require_background: bool = True) -> "ScenarioConfig":
        values: dict[str, dict[str, object]] = {}
        missing = []
        for section, keys in SCHEMA.items():
            values[section] = {}
            given = raw.get(section, {})
            for key, (parse, default) in keys.items():
                if key in given:
                    try:
                        values[section][key] = parse(given[key])
                    except ValueError as exc:
                        raise ConfigError(f"{section}.{key}: {exc}", path=f"{section}.{key}") from exc
                elif default is REQUIRED:
                    if section == "background" and not require_background:
                        values[section][key] = None
                        continue
                    missing.append(f"{section}.{key}")
                else:
                    values[section][key] = default
        if missing:
            raise ConfigError("missing required keys: " + ", ".join(missing), path=missing[0])
        cfg = cls(values, {s: dict(v) for s, v in raw.items()})
        cfg._validate(require_background)
        return cfg

    def _validate(self, require_background: bool):
        g = self.values["grid"]
        d = len(g["shape"])
        if g["extent"] is None and g["length"] is None:
            raise ConfigError("grid needs grid.extent or grid.length", path="grid.extent")
        if g["extent"] is not None and g["length"] is not None:
            raise ConfigError("give only one of grid.extent and grid.length", path="grid.length")
        for key in ("extent", "length", "bc"):
            val = g[key]
            if val is not None and len(val) not in (1, d):
                raise ConfigError(f"grid.{key} needs 1 or {d} entries", path=f"grid.{key}")
        kind = self["solver.kind"]
        if kind not in SOLVERS:
            raise ConfigError(f"solver.kind must be one of {', '.join(SOLVERS)}", path="solver.kind")
        if not require_background and self.values["background"]["family"] is None:
            return
        fam = self.family
        if fam not in FAMILIES:
            raise ConfigError(f"background.family must be one of {', '.join(FAMILIES)}", path="background.family")
        given = self.raw.get("background", {})
        missing = [f"background.{k}" for k in FAMILY_KEYS[fam]
                   if self.values["background"][k] is None and k not in given]
        if missing:
            raise ConfigError(f"family {fam!r} needs: " + ", ".join(missing), path=missing[0])


def from_file(path, overrides=(), require_background: bool = True) -> ScenarioConfig:
    raw = load(path)
    apply_overrides(raw, overrides)
    return ScenarioConfig.from_raw(raw, require_background)


def apply_overrides(raw: dict, overrides) -> dict:
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form section.key=value", path=item)
        key, value = item.split("=", 1)
        set_value(raw, key.strip(), value.strip())
    return raw


def section_values(raw: dict, section: str) -> dict[str, object]:
    """Typed values of one section with defaults, ignoring the rest of the file."""
    out = {}
    given = raw.get(section, {})
    for key, (parse, default) in SCHEMA[section].items():
        if key in given:
            try:
                out[key] = parse(given[key])
            except ValueError as exc:
                raise ConfigError(f"{section}.{key}: {exc}", path=f"{section}.{key}") from exc
        else:
            out[key] = None if default is REQUIRED else default
    return out
