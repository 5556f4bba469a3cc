import re
from pathlib import Path
from typing import Optional, Dict, Tuple, Any, List
from pydantic import ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from src.core.exceptions import ConfigError


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_file=".env", env_file_encoding="utf-8", extra="ignore")

    ENVIRONMENT: str = "development"
    LOG_LEVEL: str = "INFO"

    # Overrides output_dir of every run when set
    LAGFLOW_OUT: Optional[str] = None

    # Process fan-out for convergence levels; 1 runs them in threads
    MAX_WORKERS: int = 1


settings = Settings()


KNOWN_KEYS = {
    "a", "b", "k", "tau", "t_end",
    "cost", "p", "gamma",
    "m", "potential", "potential_weight", "potential_center", "potential_value", "potential_coefficients",
    "init", "init_support", "init_file", "floor",
    "output_dir", "snapshot_times",
    "newton_tol", "newton_max_iter", "armijo_shrink", "min_gap",
}

_LINE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*?)\s*$")


def _tokenize(text: str) -> Dict[str, Tuple[str, int]]:
    """Split `key = value` lines; returns key -> (raw value, line number)."""
    entries: Dict[str, Tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        match = _LINE.match(line)
        if match is None:
            column = len(line) - len(line.lstrip()) + 1
            if "=" not in line:
                raise ConfigError("expected 'key = value'", line=lineno, column=column)
            raise ConfigError(f"invalid key {line.split('=', 1)[0].strip()!r}", line=lineno, column=column)
        key, value = match.group(1), match.group(2)
        if key not in KNOWN_KEYS:
            raise ConfigError(f"unknown key {key!r}", line=lineno, column=line.index(key) + 1)
        if key in entries:
            raise ConfigError(f"duplicate key {key!r} (first set on line {entries[key][1]})", line=lineno, column=line.index(key) + 1)
        if value == "":
            raise ConfigError(f"empty value for {key!r}", line=lineno, column=len(line.rstrip()) + 1)
        entries[key] = (value, lineno)
    return entries


def _floats(key: str, raw: str, lineno: int) -> List[float]:
    try:
        return [float(tok) for tok in raw.split(",") if tok.strip()]
    except ValueError:
        raise ConfigError(f"{key!r} expects comma-separated reals, got {raw!r}", line=lineno)


def _float(key: str, raw: str, lineno: int) -> float:
    values = _floats(key, raw, lineno)
    if len(values) != 1:
        raise ConfigError(f"{key!r} expects a single real, got {raw!r}", line=lineno)
    return values[0]


def _int(key: str, raw: str, lineno: int) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{key!r} expects an integer, got {raw!r}", line=lineno)


def _require(entries: Dict[str, Tuple[str, int]], key: str, because: str) -> Tuple[str, int]:
    if key not in entries:
        raise ConfigError(f"missing key {key!r} required by {because}")
    return entries[key]


def _cost_fields(entries) -> Dict[str, Any]:
    raw, lineno = _require(entries, "cost", "every run")
    if raw == "ppower":
        p_raw, p_line = _require(entries, "p", "cost = ppower")
        return {"kind": "p_power", "p": _float("p", p_raw, p_line)}
    if raw == "relativistic":
        g_raw, g_line = _require(entries, "gamma", "cost = relativistic")
        return {"kind": "relativistic", "gamma": _float("gamma", g_raw, g_line)}
    raise ConfigError(f"cost must be 'ppower' or 'relativistic', got {raw!r}", line=lineno)


def _potential_fields(entries, domain: Tuple[float, float]) -> Dict[str, Any]:
    raw, lineno = entries.get("potential", ("constant", None))
    if raw == "constant":
        value = _float("potential_value", *entries["potential_value"]) if "potential_value" in entries else 0.0
        return {"kind": "constant", "coefficients": (value,), "domain": domain}
    if raw == "quadratic":
        w_raw, w_line = _require(entries, "potential_weight", "potential = quadratic")
        center = _float("potential_center", *entries["potential_center"]) if "potential_center" in entries else 0.0
        return {"kind": "quadratic", "coefficients": (_float("potential_weight", w_raw, w_line),), "center": center, "domain": domain}
    if raw == "polynomial":
        c_raw, c_line = _require(entries, "potential_coefficients", "potential = polynomial")
        return {"kind": "polynomial", "coefficients": tuple(_floats("potential_coefficients", c_raw, c_line)), "domain": domain}
    raise ConfigError(f"potential must be constant, quadratic or polynomial, got {raw!r}", line=lineno)


def _init_fields(entries, base_dir: Optional[Path]) -> Dict[str, Any]:
    raw, lineno = entries.get("init", ("uniform", None))
    if raw == "uniform":
        s_raw, s_line = _require(entries, "init_support", "init = uniform")
        support = _floats("init_support", s_raw, s_line)
        if len(support) != 2:
            raise ConfigError(f"init_support expects '<r>,<s>', got {s_raw!r}", line=s_line)
        return {"kind": "uniform", "support": tuple(support)}
    if raw == "csv":
        f_raw, _ = _require(entries, "init_file", "init = csv")
        path = Path(f_raw)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return {"kind": "csv", "file": str(path)}
    raise ConfigError(f"init must be 'uniform' or 'csv', got {raw!r}", line=lineno)


_SCALARS = {
    "tau": _float, "t_end": _float, "m": _float, "floor": _float,
    "newton_tol": _float, "armijo_shrink": _float, "min_gap": _float,
    "newton_max_iter": _int,
}


def _located(exc: ValidationError, entries) -> ConfigError:
    """Translate the first pydantic error into a ConfigError pointing at the offending key."""
    err = exc.errors()[0]
    loc = [str(part) for part in err.get("loc", ())]
    message = str(err.get("msg", "invalid value")).removeprefix("Value error, ")
    key = loc[0] if loc else None
    line = entries[key][1] if key in entries else None
    prefix = f"{key}: " if key and key in KNOWN_KEYS else ""
    return ConfigError(f"{prefix}{message}", line=line)


def parse_config(text: str, base_dir: Optional[Path] = None):
    """
    Parse the line-based `key = value` experiment format into a validated RunConfig.
    `#` starts a comment. Relative init_file paths resolve against base_dir.
    """
    from src.models.schema import RunConfig

    entries = _tokenize(text)
    fields: Dict[str, Any] = {}
    for key in ("a", "b"):
        raw, lineno = _require(entries, key, "every run")
        fields[key] = _float(key, raw, lineno)
    raw, lineno = _require(entries, "k", "every run")
    fields["k"] = _int("k", raw, lineno)
    for key in ("tau", "t_end"):
        _require(entries, key, "every run")
    for key, conv in _SCALARS.items():
        if key in entries:
            fields[key] = conv(key, *entries[key])

    fields["cost"] = _cost_fields(entries)
    fields["potential"] = _potential_fields(entries, (fields["a"], fields["b"]))
    fields["init"] = _init_fields(entries, base_dir)
    if "output_dir" in entries:
        fields["output_dir"] = entries["output_dir"][0]
    if "snapshot_times" in entries:
        fields["snapshot_times"] = _floats("snapshot_times", *entries["snapshot_times"])

    try:
        return RunConfig(**fields)
    except ValidationError as exc:
        raise _located(exc, entries) from exc


def load_config(path: str):
    cfg_path = Path(path)
    try:
        text = cfg_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}")
    return parse_config(text, base_dir=cfg_path.parent)


def _fmt(value: float) -> str:
    return repr(float(value))


def format_config(cfg) -> str:
    """Inverse of parse_config: a config text that parses back to `cfg`."""
    lines = [f"a = {_fmt(cfg.a)}", f"b = {_fmt(cfg.b)}", f"k = {cfg.k}", f"tau = {_fmt(cfg.tau)}", f"t_end = {_fmt(cfg.t_end)}"]
    if cfg.cost.kind == "p_power":
        lines += ["cost = ppower", f"p = {_fmt(cfg.cost.p)}"]
    else:
        lines += ["cost = relativistic", f"gamma = {_fmt(cfg.cost.gamma)}"]
    lines.append(f"m = {_fmt(cfg.m)}")
    pot = cfg.potential
    lines.append(f"potential = {pot.kind}")
    if pot.kind == "constant":
        lines.append(f"potential_value = {_fmt(pot.coefficients[0])}")
    elif pot.kind == "quadratic":
        lines += [f"potential_weight = {_fmt(pot.coefficients[0])}", f"potential_center = {_fmt(pot.center)}"]
    else:
        lines.append("potential_coefficients = " + ", ".join(_fmt(c) for c in pot.coefficients))
    if cfg.init.kind == "uniform":
        lines += ["init = uniform", f"init_support = {_fmt(cfg.init.support[0])}, {_fmt(cfg.init.support[1])}"]
    else:
        lines += ["init = csv", f"init_file = {Path(cfg.init.file).resolve()}"]
    lines.append(f"floor = {_fmt(cfg.floor)}")
    lines.append(f"output_dir = {cfg.output_dir}")
    lines.append("snapshot_times = " + ", ".join(_fmt(t) for t in cfg.snapshot_times))
    if cfg.newton_tol is not None:
        lines.append(f"newton_tol = {_fmt(cfg.newton_tol)}")
    lines += [
        f"newton_max_iter = {cfg.newton_max_iter}",
        f"armijo_shrink = {_fmt(cfg.armijo_shrink)}",
        f"min_gap = {_fmt(cfg.min_gap)}",
    ]
    return "\n".join(lines) + "\n"
