"""Flat ``section.key = value`` configuration files.

One assignment per line; ``#`` starts a comment. Values are integers, floats,
``true``/``false``, comma-separated lists of those, or bare strings::

    experiment.agent = langevin
    experiment.depths = 10, 12, 14
    agent.sigma_sq = 0.005
    optim.alpha = 0.01
"""

from __future__ import annotations

import re

_KEY = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*(\.[A-Za-z_][A-Za-z0-9_]*)+$")


class ConfigError(ValueError):
    pass


def parse_scalar(text: str):
    t = text.strip()
    low = t.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    for cast in (int, float):
        try:
            return cast(t)
        except ValueError:
            pass
    if len(t) >= 2 and t[0] == t[-1] and t[0] in "\"'":
        return t[1:-1]
    return t


def parse_value(text: str):
    if "," in text:
        return [parse_scalar(p) for p in text.split(",") if p.strip()]
    return parse_scalar(text)


def parse_config(text: str) -> dict:
    """Return a flat dict keyed by the dotted names."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'section.key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not _KEY.match(key):
            raise ConfigError(f"line {lineno}: bad key {key!r} (need a dotted section name)")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if not value:
            raise ConfigError(f"line {lineno}: missing value for {key!r}")
        out[key] = parse_value(value)
    return out


def load_config(path) -> dict:
    with open(path) as fh:
        return parse_config(fh.read())


def format_config(values: dict) -> str:
    lines = []
    for k, v in values.items():
        if isinstance(v, (list, tuple)):
            v = ", ".join(_fmt(x) for x in v)
        else:
            v = _fmt(v)
        lines.append(f"{k} = {v}")
    return "\n".join(lines) + "\n"


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    return str(x)
