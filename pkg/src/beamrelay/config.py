"""Flat ``key=value`` run configuration files."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .engine import RunConfig, VerifyMode
from .phasor import ChannelParams, perturb_integer_wavelength
from .placement import make_grid, make_random
from .schedule import U1, U2, ScheduleParams, u1_min_w0, u2_min_w0
from .senders import GridBlock


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"field {key!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.line = line
        self.key = key


def _float(v):
    return float(v)


def _int(v):
    f = float(v)
    if f != int(f):
        raise ValueError(f"expected an integer, got {v}")
    return int(f)


def _bool(v):
    s = v.lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {v}")


def _pair(v):
    parts = [p.strip() for p in v.split(",")]
    if len(parts) != 2:
        raise ValueError(f"expected x,y, got {v}")
    return (_int(parts[0]), _int(parts[1]))


def _box(v):
    parts = [p.strip() for p in v.split(",")]
    if len(parts) != 4:
        raise ValueError(f"expected x_lo,x_hi,y_lo,y_hi, got {v}")
    return tuple(float(p) for p in parts)


def _choice(*opts):
    def parse(v):
        if v not in opts:
            raise ValueError(f"expected one of {', '.join(opts)}, got {v}")
        return v
    return parse


def _w0(v):
    return v if v == "auto" else _float(v)


KEYS = {
    "model": _choice("grid", "random"),
    "rows": _int,
    "cols": _int,
    "n": _int,
    "k": _float,
    "seed": _int,
    "lambda": _float,
    "tau": _float,
    "carrier_freq_hz": _float,
    "light_speed": _float,
    "grid_spacing_m": _float,
    "w0": _w0,
    "variant": _choice(U1, U2),
    "distance": _float,
    "source": _pair,
    "target": _pair,
    "t0": _float,
    "verify": _choice("sampled", "all"),
    "samples": _int,
    "verify_seed": _int,
    "full_verify_max": _int,
    "strict": _bool,
    "evaluator": _choice("auto", "brute", "cells"),
    "workers": _int,
    "perturb": _bool,
    # field rendering
    "senders": _box,
    "receivers": _box,
    "viewport": _box,
    "resolution": _float,
    "margin": _float,
}


def parse_text(text: str) -> dict:
    """Parse ``key=value`` lines; ``#`` starts a comment.  Raises :class:`ConfigError`."""
    out: dict = {}
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected key=value, got {raw.strip()!r}", no)
        key, val = (p.strip() for p in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError("unknown key", no, key)
        if key in out:
            raise ConfigError("duplicate key", no, key)
        if not val:
            raise ConfigError("empty value", no, key)
        try:
            out[key] = KEYS[key](val)
        except ValueError as exc:
            raise ConfigError(str(exc), no, key) from None
    return out


def load(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return parse_text(text)


def _require(cfg: dict, *keys):
    for k in keys:
        if k not in cfg:
            raise ConfigError("missing required key", None, k)


@dataclass
class FieldSetup:
    senders: GridBlock
    viewport: tuple
    resolution: float
    receivers: tuple | None = None
    params: ChannelParams = field(default_factory=ChannelParams)


def channel_params(cfg: dict) -> ChannelParams:
    if "lambda" in cfg:
        lam = cfg["lambda"]
    elif cfg.get("model") == "random" and "n" in cfg:
        lam = 3 * cfg.get("k", 3.0) / math.sqrt(math.log(cfg["n"]))
    else:
        lam = 0.1
    if cfg.get("perturb", True):
        lam = perturb_integer_wavelength(lam)
    kw = {"lam": lam}
    for key, name in (("tau", "tau"), ("carrier_freq_hz", "carrier_freq_hz"),
                      ("light_speed", "light_speed"), ("grid_spacing_m", "grid_spacing_m")):
        if key in cfg:
            kw[name] = cfg[key]
    try:
        return ChannelParams(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def build_run_config(cfg: dict, workers=None) -> RunConfig:
    """Assemble a :class:`RunConfig` from parsed keys (grid or random model)."""
    params = channel_params(cfg)
    model = cfg.get("model", "grid")
    variant = cfg.get("variant", U1)
    verify = VerifyMode(cfg.get("verify", "sampled"), cfg.get("samples", 64), cfg.get("verify_seed", 0),
                        cfg.get("full_verify_max", 100_000))
    if model == "random":
        _require(cfg, "n", "seed")
        k = cfg.get("k", 3.0)
        try:
            nodes = make_random(cfg["n"], cfg["seed"], k)
        except ValueError as exc:
            raise ConfigError(str(exc), None, "n") from None
        sp = ScheduleParams(params.lam, 1.0, variant, cfg.get("distance", 1.0))
        source = cfg.get("source")
    else:
        _require(cfg, "rows", "cols")
        try:
            nodes = make_grid(cfg["rows"], cfg["cols"])
        except ValueError as exc:
            raise ConfigError(str(exc), None, "rows") from None
        w0 = cfg.get("w0", "auto")
        if w0 == "auto":
            w0 = float(math.ceil(u1_min_w0(params.lam) if variant == U1 else u2_min_w0(params.lam)))
        source = cfg.get("source", (0, 0))
        target = cfg.get("target")
        if "distance" in cfg:
            dist = cfg["distance"]
        elif target is not None:
            dist = float(abs(target[0] - source[0]) or abs(target[1] - source[1]))
        else:
            raise ConfigError("missing required key", None, "distance")
        sp = ScheduleParams(params.lam, w0, variant, dist)
        k = 3.0
    return RunConfig(nodes, params, sp, source=source if source is not None else None,
                     target=cfg.get("target"), t0_processing_s=cfg.get("t0", 1e-2), verify=verify,
                     strict=cfg.get("strict", True), evaluator=cfg.get("evaluator", "auto"),
                     workers=workers if workers is not None else cfg.get("workers"), k=k)


def build_field_setup(cfg: dict) -> FieldSetup:
    """Explicit sender block and viewport for the ``field`` command."""
    _require(cfg, "senders")
    x_lo, x_hi, y_lo, y_hi = cfg["senders"]
    if x_hi < x_lo or y_hi < y_lo:
        raise ConfigError("sender box is empty", None, "senders")
    blk = GridBlock(int(x_lo), int(x_hi) - int(x_lo) + 1, int(y_lo), int(y_hi) - int(y_lo) + 1)
    view = cfg.get("viewport")
    if view is None:
        m = cfg.get("margin", 10.0)
        rx = cfg.get("receivers", (x_lo, x_hi, y_lo, y_hi))
        view = (min(x_lo, rx[0]) - m, max(x_hi, rx[1]) + m, min(y_lo, rx[2]) - m, max(y_hi, rx[3]) + m)
    return FieldSetup(blk, tuple(view), cfg.get("resolution", 1.0), cfg.get("receivers"), channel_params(cfg))
