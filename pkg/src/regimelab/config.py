"""Model configuration files (TOML).

Keys: ``states``, ``rates`` (flat row-major list of ``states**2`` numbers),
``mu``, ``sigma``, ``x0``, ``T``, ``N`` and optionally ``family``
(``"binomial"`` or ``"trinomial"``), ``convention`` (``"end"`` or
``"start"``), ``allow_zero_rates`` and ``degenerate``.
"""

from __future__ import annotations

import hashlib
import re
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .discrete_scheme import Convention, FamilyKind, ReturnFamily
from .errors import ConfigParse
from .markov_core import GeneratorMatrix, RegimeParams, TimeGrid, validate_generator

REQUIRED = ("states", "rates", "mu", "sigma", "x0", "T", "N")
OPTIONAL = ("family", "convention", "allow_zero_rates", "degenerate")


@dataclass(frozen=True)
class ModelConfig:
    generator: GeneratorMatrix
    params: RegimeParams
    grid: TimeGrid
    family: ReturnFamily
    convention: Convention
    source: str
    text: bytes

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.text).hexdigest()


def default_config_path() -> Path:
    return Path(str(resources.files("regimelab") / "data" / "default.toml"))


def _line_of(text: str, key: str) -> int | None:
    m = re.search(rf"^\s*{re.escape(key)}\s*=", text, flags=re.MULTILINE)
    return None if m is None else text.count("\n", 0, m.start()) + 1


def _numbers(raw, key, text, length=None) -> list[float]:
    if not isinstance(raw, list) or not all(isinstance(x, (int, float)) and not isinstance(x, bool)
                                            for x in raw):
        raise ConfigParse("expected a list of numbers", key, _line_of(text, key))
    if length is not None and len(raw) != length:
        raise ConfigParse(f"expected {length} values, got {len(raw)}", key, _line_of(text, key))
    return [float(x) for x in raw]


def _number(raw, key, text) -> float:
    if not isinstance(raw, (int, float)) or isinstance(raw, bool):
        raise ConfigParse("expected a number", key, _line_of(text, key))
    return float(raw)


def parse_config(text: str | bytes, source: str = "<string>") -> ModelConfig:
    """Parse and validate a configuration; raises ConfigParse or ModelInvalid."""
    data_bytes = text.encode("utf-8") if isinstance(text, str) else bytes(text)
    text = data_bytes.decode("utf-8")
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigParse(f"invalid TOML: {exc}", None, int(m.group(1)) if m else None) from None
    for key in REQUIRED:
        if key not in raw:
            raise ConfigParse("missing required key", key)
    for key in raw:
        if key not in REQUIRED + OPTIONAL:
            raise ConfigParse("unknown key", key, _line_of(text, key))
    d = raw["states"]
    if not isinstance(d, int) or isinstance(d, bool) or d < 2:
        raise ConfigParse("expected an integer >= 2", "states", _line_of(text, "states"))
    rates = _numbers(raw["rates"], "rates", text, d * d)
    mu = _numbers(raw["mu"], "mu", text, d)
    sigma = _numbers(raw["sigma"], "sigma", text, d)
    x0 = _number(raw["x0"], "x0", text)
    T = _number(raw["T"], "T", text)
    N = raw["N"]
    if not isinstance(N, int) or isinstance(N, bool) or N < 1:
        raise ConfigParse("expected a positive integer", "N", _line_of(text, "N"))
    if not T > 0:
        raise ConfigParse("horizon must be positive", "T", _line_of(text, "T"))
    flags = {}
    for key in ("allow_zero_rates", "degenerate"):
        v = raw.get(key, False)
        if not isinstance(v, bool):
            raise ConfigParse("expected true or false", key, _line_of(text, key))
        flags[key] = v
    try:
        kind = FamilyKind(raw.get("family", "binomial"))
    except ValueError:
        raise ConfigParse("expected \"binomial\" or \"trinomial\"", "family", _line_of(text, "family")) from None
    try:
        convention = Convention(raw.get("convention", "end"))
    except ValueError:
        raise ConfigParse("expected \"end\" or \"start\"", "convention",
                          _line_of(text, "convention")) from None
    G = validate_generator([rates[i * d:(i + 1) * d] for i in range(d)],
                           allow_zero_rates=flags["allow_zero_rates"])
    params = RegimeParams(mu, sigma, x0, degenerate=flags["degenerate"])
    grid = TimeGrid(T, N)
    try:
        family = ReturnFamily(kind, params, grid)
    except ValueError as exc:
        raise ConfigParse(str(exc), "N", _line_of(text, "N")) from None
    return ModelConfig(G, params, grid, family, convention, source, data_bytes)


def load_config(path: str | Path | None = None) -> ModelConfig:
    """Read a configuration file; ``None`` loads the shipped two-state fixture."""
    p = default_config_path() if path is None else Path(path)
    try:
        data = p.read_bytes()
    except OSError as exc:
        raise ConfigParse(f"cannot read {p}: {exc.strerror or exc}") from None
    return parse_config(data, str(p))
