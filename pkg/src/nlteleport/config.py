"""Flat ``key = value`` experiment records and deterministic output files."""

from __future__ import annotations

import configparser
import csv
import hashlib
import io
import math
from pathlib import Path
from typing import Any, Iterable, Mapping

__all__ = [
    "ConfigError",
    "SCHEMAS",
    "config_hash",
    "dump_record",
    "format_value",
    "load_record",
    "parse_config",
    "write_csv",
    "write_record",
]

_SECTION = "record"


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending key."""


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _strs(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# experiment -> key -> (parser, default); a default of None means required
SCHEMAS: dict[str, dict[str, tuple[Any, Any]]] = {
    "deterministic-sweep": {
        "schemes": (_strs, "canonical,nonlinear,ideal-cubic"),
        "ancillas": (_strs, "cubic-finite"),
        "s_max_db": (_floats, "10"),
        "n": (_floats, "0"),
        "restarts": (int, "430"),
        "gaussian_ancilla": (_bool, "false"),
    },
    "optimize": {
        "scheme": (str, None),
        "ancilla": (str, "cubic-finite"),
        "s_max_db": (float, "10"),
        "n": (float, "0"),
        "restarts": (int, "430"),
    },
    "probabilistic-sweep": {
        "source": (str, "preset"),
        "db": (_floats, "6,8"),
        "eta": (_floats, "1,0.75"),
        "u": (float, "0.79"),
        "chi": (_floats, ""),
        "params": (str, ""),
        "p_points": (int, "20"),
        "modes": (_strs, "aggregate-xi,aggregate-states"),
    },
    "unity-gain-chi": {
        "db": (_floats, "6,8"),
        "eta": (_floats, "1,0.75"),
        "u": (float, "0.79"),
        "n_scan": (int, "41"),
    },
}
_COMMON = {"experiment": (str, None), "seed": (int, "0"), "cutoff": (int, "30")}


def _read(text: str) -> dict[str, str]:
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                       comment_prefixes=("#",), inline_comment_prefixes=("#",))
    parser.optionxform = str  # keys are case-sensitive
    try:
        parser.read_string(f"[{_SECTION}]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    return dict(parser[_SECTION])


def parse_config(text: str, experiment: str | None = None) -> dict[str, Any]:
    """Parse and validate an experiment config, filling in defaults."""
    raw = _read(text)
    exp = raw.get("experiment", experiment)
    if exp is None:
        raise ConfigError("missing key 'experiment'")
    if experiment is not None and exp != experiment:
        raise ConfigError(f"key 'experiment' is {exp!r} but the command runs {experiment!r}")
    if exp not in SCHEMAS:
        raise ConfigError(f"key 'experiment' has unknown value {exp!r}")
    schema = {**_COMMON, **SCHEMAS[exp]}
    raw["experiment"] = exp
    for key in raw:
        if key not in schema:
            raise ConfigError(f"unknown config key {key!r} for experiment {exp!r}")
    out: dict[str, Any] = {}
    for key, (conv, default) in schema.items():
        value = raw.get(key, default)
        if value is None:
            raise ConfigError(f"missing required key {key!r}")
        try:
            out[key] = conv(value)
        except ValueError as exc:
            raise ConfigError(f"bad value for key {key!r}: {exc}") from None
    return out


def format_value(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    if isinstance(v, (list, tuple)):
        return ",".join(format_value(x) for x in v)
    return str(v)


def config_hash(cfg: Mapping[str, Any]) -> str:
    """Stable hash of a parsed config (independent of key order and spelling of defaults)."""
    text = "\n".join(f"{k}={format_value(cfg[k])}" for k in sorted(cfg))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _header(cfg_hash: str, seed: int) -> str:
    return f"# config_hash: {cfg_hash}\n# seed: {seed}\n"


def dump_record(record: Mapping[str, Any], cfg_hash: str, seed: int) -> str:
    lines = [f"{k} = {format_value(record[k])}" for k in record]
    return _header(cfg_hash, seed) + "\n".join(lines) + "\n"


def write_record(path: Path, record: Mapping[str, Any], cfg_hash: str, seed: int) -> None:
    Path(path).write_text(dump_record(record, cfg_hash, seed))


def load_record(path: Path) -> dict[str, str]:
    """Read a stored record back as raw strings (header comments are skipped)."""
    return _read(Path(path).read_text())


def write_csv(path: Path, rows: Iterable[Mapping[str, Any]], columns: list[str],
              cfg_hash: str, seed: int) -> None:
    buf = io.StringIO()
    buf.write(_header(cfg_hash, seed))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([format_value(row[c]) for c in columns])
    Path(path).write_text(buf.getvalue())
