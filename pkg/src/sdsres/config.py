"""Run configuration in a plain ``key = value`` text format.

Blank lines and ``#`` comments are ignored. Keys are case-insensitive;
``Lambda`` and ``Λ`` are accepted for ``lambda``. Unset keys take defaults.
"""

from __future__ import annotations

from dataclasses import dataclass

# key -> (attribute, type, default, help)
_SCHEMA = {
    "M": ("M", float, 1.0, "black hole mass"),
    "lambda": ("Lam", float, 0.04, "cosmological constant"),
    "X": ("X", float, 60.0, "half-width of the evolution domain in x"),
    "points": ("points", int, 4096, "evolution grid points on [-X, X]"),
    "cfl": ("cfl", float, 0.5, "time step as a fraction of the grid spacing"),
    "T": ("T", float, 200.0, "evolution end time"),
    "a": ("a", float, 10.0, "cutoff half-width"),
    "resolvent_points": ("resolvent_points", int, 401, "grid points on [-a, a] for kernels"),
    "strip_safety": ("strip_safety", float, 0.98, "fraction of the analytic strip used"),
    "newton_tol": ("newton_tol", float, 1e-12, "relative step tolerance for resonance Newton"),
    "winding_floor": ("winding_floor", float, 1e-10, "|w| below which a contour is said to touch a zero"),
    "output_dir": ("output_dir", str, "sdsres-out", "artifact directory"),
}
_ALIASES = {"lambda": "lambda", "Λ": "lambda", "lam": "lambda"}
_LOOKUP = {k.lower(): k for k in _SCHEMA}


class ConfigError(ValueError):
    def __init__(self, message: str, line: int = 0):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


@dataclass(frozen=True)
class RunConfig:
    M: float = 1.0
    Lam: float = 0.04
    X: float = 60.0
    points: int = 4096
    cfl: float = 0.5
    T: float = 200.0
    a: float = 10.0
    resolvent_points: int = 401
    strip_safety: float = 0.98
    newton_tol: float = 1e-12
    winding_floor: float = 1e-10
    output_dir: str = "sdsres-out"

    @property
    def h(self) -> float:
        return 2.0 * self.X / (self.points - 1)

    @property
    def dt(self) -> float:
        return self.cfl * self.h

    def validate(self, lines: dict[str, int] | None = None) -> None:
        lines = lines or {}

        def fail(msg, *keys):
            raise ConfigError(msg, min((lines[k] for k in keys if k in lines), default=0))

        if self.M <= 0:
            fail(f"M must be positive, got {self.M}", "M")
        if not 0 < 9 * self.M**2 * self.Lam < 1:
            fail(f"need 0 < 9 M^2 Lambda < 1, got {9 * self.M**2 * self.Lam:.6g}", "lambda", "M")
        if self.points < 16:
            fail(f"points must be at least 16, got {self.points}", "points")
        if not 0 < self.cfl <= 0.9:
            fail(f"cfl must lie in (0, 0.9], got {self.cfl}", "cfl")
        if not 0 < 2 * self.a < self.X:
            fail(f"cutoff must satisfy 0 < 2a < X, got a={self.a}, X={self.X}", "a", "X")
        if self.T <= 0:
            fail(f"T must be positive, got {self.T}", "T")
        if self.resolvent_points < 16:
            fail(f"resolvent_points must be at least 16, got {self.resolvent_points}", "resolvent_points")
        if not 0 < self.strip_safety < 1:
            fail(f"strip_safety must lie in (0, 1), got {self.strip_safety}", "strip_safety")
        if self.newton_tol <= 0 or self.winding_floor <= 0:
            fail("tolerances must be positive", "newton_tol", "winding_floor")


def parse_config(text: str) -> RunConfig:
    values: dict = {}
    lines: dict[str, int] = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", n)
        key, val = (s.strip() for s in line.split("=", 1))
        key = _ALIASES.get(key, _ALIASES.get(key.lower(), key))
        canon = _LOOKUP.get(key.lower())
        if canon is None:
            raise ConfigError(f"unknown key {key!r}", n)
        if canon in lines:
            raise ConfigError(f"duplicate key {canon!r} (first set on line {lines[canon]})", n)
        attr, typ, _, _ = _SCHEMA[canon]
        try:
            if typ is int:
                f = float(val)
                if f != int(f):
                    raise ValueError
                values[attr] = int(f)
            elif typ is float:
                values[attr] = float(val)
            else:
                if not val:
                    raise ValueError
                values[attr] = val
        except ValueError:
            raise ConfigError(f"bad value {val!r} for {canon} ({typ.__name__} expected)", n) from None
        lines[canon] = n
    cfg = RunConfig(**values)
    cfg.validate(lines)
    return cfg


def serialize_config(cfg: RunConfig) -> str:
    out = []
    for key, (attr, typ, _, _) in _SCHEMA.items():
        v = getattr(cfg, attr)
        out.append(f"{key} = {v!r}" if typ is float else f"{key} = {v}")
    return "\n".join(out) + "\n"


def describe_schema() -> str:
    return "\n".join(f"{k:17s} {t.__name__:5s} default {d!r:12s} {h}"
                     for k, (_, t, d, h) in _SCHEMA.items())
