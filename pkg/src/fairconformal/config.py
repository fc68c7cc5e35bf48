"""Experiment configuration: a flat ``key = value`` text file.

Grammar, one entry per line::

    # comment                     (also allowed after a value)
    key = value
    list_key = a, b, c

Blank lines are ignored, keys are case-sensitive, a repeated key keeps its
last value. ``auto`` selects the documented default rule for ``sigma`` and
``bandwidth``. Command-line overrides are applied on top of the file.
"""
import difflib
import os
from dataclasses import dataclass, replace

from .dataset import SCENARIOS, SyntheticScenario
from .fair import METHODS as SMOOTHING_METHODS

EXPERIMENT_METHODS = ("cfqp", "cqr", "unfair")


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists every problem found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class ExperimentConfig:
    # data source: exactly one of csv / synthetic
    csv: str = None
    csv_features: tuple = ()
    csv_group: str = None
    csv_response: str = None
    csv_delimiter: str = ","
    test_fraction: float = 0.2
    synthetic: str = None
    scenario: SyntheticScenario = None
    n: int = 2000
    n_test: int = 2000
    # method
    alpha: float = 0.1
    quantile_lo: float = None
    quantile_hi: float = None
    conformal_mode: str = "symmetric"
    alpha_lo: float = None
    alpha_hi: float = None
    smoothing: str = "triangular"
    bandwidth: float = None
    grid_size: int = 1024
    sigma: float = None
    max_iter: int = 2000
    step_size: float = 1.0
    # protocol
    repetitions: int = 200
    calibration_fraction: float = 0.5
    stratify: bool = False
    min_group_size: int = 10
    seed: int = 0
    methods: tuple = ("cfqp", "cqr")
    output_dir: str = "results"
    jobs: int = 1

    @property
    def levels(self):
        lo = self.alpha / 2 if self.quantile_lo is None else self.quantile_lo
        hi = 1 - self.alpha / 2 if self.quantile_hi is None else self.quantile_hi
        return lo, hi

    @property
    def asymmetric(self):
        if self.conformal_mode != "asymmetric":
            return None
        a_lo = self.alpha / 2 if self.alpha_lo is None else self.alpha_lo
        a_hi = self.alpha / 2 if self.alpha_hi is None else self.alpha_hi
        return a_lo, a_hi


def _str(v):
    return v


def _list(v):
    return tuple(s.strip() for s in v.split(",") if s.strip())


def _floats(v):
    return tuple(float(s) for s in _list(v))


def _bool(v):
    low = v.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _auto_float(v):
    return None if v.strip().lower() == "auto" else float(v)


def _opt_float(v):
    return None if v.strip().lower() in ("", "none", "default") else float(v)


PARSERS = {
    "csv": _str, "csv_features": _list, "csv_group": _str, "csv_response": _str,
    "csv_delimiter": _str, "test_fraction": float,
    "synthetic": _str, "synth_proportions": _floats, "synth_shifts": _floats,
    "synth_scales": _floats, "synth_features": int, "synth_noise": _str,
    "n": int, "n_test": int,
    "alpha": float, "quantile_lo": _opt_float, "quantile_hi": _opt_float,
    "conformal_mode": _str, "alpha_lo": _opt_float, "alpha_hi": _opt_float,
    "smoothing": _str, "bandwidth": _auto_float, "grid_size": int, "sigma": _auto_float,
    "max_iter": int, "step_size": float,
    "repetitions": int, "calibration_fraction": float, "stratify": _bool,
    "min_group_size": int, "seed": int, "methods": _list, "output_dir": _str, "jobs": int,
}
KEYS = tuple(PARSERS)
_SYNTH_KEYS = {"synth_proportions": "proportions", "synth_shifts": "shifts",
               "synth_scales": "scales", "synth_features": "n_features", "synth_noise": "noise"}


def parse_text(text):
    """Parse config text into a ``{key: raw string}`` dict plus syntax errors."""
    entries, errors = {}, []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value', got {line!r}")
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            errors.append(f"line {lineno}: missing key")
            continue
        entries[key] = value
    return entries, errors


def _suggest(key):
    match = difflib.get_close_matches(key, KEYS, n=1, cutoff=0.6)
    return f" (did you mean {match[0]!r}?)" if match else ""


def build_config(entries, errors=None):
    """Resolve raw entries into an :class:`ExperimentConfig`, collecting all errors."""
    errors = list(errors or [])
    values = {}
    for key, raw in entries.items():
        if key not in PARSERS:
            errors.append(f"unknown key {key!r}{_suggest(key)}")
            continue
        try:
            values[key] = PARSERS[key](raw)
        except ValueError as exc:
            errors.append(f"{key}: cannot parse {raw!r} ({exc})")

    synth = {_SYNTH_KEYS[k]: values.pop(k) for k in list(values) if k in _SYNTH_KEYS}
    has_csv = bool(values.get("csv"))
    has_synth = bool(values.get("synthetic"))
    if has_csv == has_synth:
        errors.append("exactly one data source (csv or synthetic) must be given")

    scenario = None
    if has_synth:
        name = values["synthetic"]
        if name not in SCENARIOS and name != "custom":
            errors.append(f"synthetic: unknown scenario {name!r}; choose from "
                          f"{sorted(SCENARIOS) + ['custom']}")
        else:
            base = SCENARIOS.get(name, SyntheticScenario())
            try:
                scenario = replace(base, **synth).validate()
            except (ValueError, TypeError) as exc:
                errors.append(f"synthetic scenario: {exc}")
                scenario = None
    elif synth:
        errors.append(f"synth_* keys given without a synthetic source: {sorted(synth)}")

    if has_csv:
        path = values["csv"]
        if not os.path.exists(path):
            errors.append(f"csv: file not found: {path}")
        for req in ("csv_features", "csv_group", "csv_response"):
            if not values.get(req):
                errors.append(f"{req} is required with a csv source")

    cfg = ExperimentConfig(**{k: v for k, v in values.items() if k in
                              ExperimentConfig.__dataclass_fields__}, scenario=scenario)
    errors.extend(_range_errors(cfg))
    if errors:
        raise ConfigError(errors)
    return cfg


def _range_errors(cfg):
    errs = []

    def unit(name, v):
        if v is not None and not 0 < v < 1:
            errs.append(f"{name} must lie in (0, 1), got {v}")

    unit("alpha", cfg.alpha)
    unit("quantile_lo", cfg.quantile_lo)
    unit("quantile_hi", cfg.quantile_hi)
    unit("alpha_lo", cfg.alpha_lo)
    unit("alpha_hi", cfg.alpha_hi)
    unit("calibration_fraction", cfg.calibration_fraction)
    unit("test_fraction", cfg.test_fraction)
    if 0 < cfg.alpha < 1:
        lo, hi = cfg.levels
        if 0 < lo < 1 and 0 < hi < 1 and not lo < hi:
            errs.append(f"quantile_lo ({lo}) must be below quantile_hi ({hi})")
    if cfg.conformal_mode not in ("symmetric", "asymmetric"):
        errs.append(f"conformal_mode must be 'symmetric' or 'asymmetric', got {cfg.conformal_mode!r}")
    if cfg.smoothing not in SMOOTHING_METHODS:
        errs.append(f"smoothing must be one of {SMOOTHING_METHODS}, got {cfg.smoothing!r}")
    if cfg.bandwidth is not None and not 0 < cfg.bandwidth < 0.5:
        errs.append(f"bandwidth must lie in (0, 0.5), got {cfg.bandwidth}")
    if cfg.sigma is not None and not cfg.sigma >= 0:
        errs.append(f"sigma must be >= 0, got {cfg.sigma}")
    if cfg.repetitions < 1:
        errs.append(f"repetitions must be >= 1, got {cfg.repetitions}")
    if cfg.jobs < 1:
        errs.append(f"jobs must be >= 1, got {cfg.jobs}")
    if cfg.n < 4:
        errs.append(f"n must be >= 4, got {cfg.n}")
    if cfg.n_test < 1:
        errs.append(f"n_test must be >= 1, got {cfg.n_test}")
    if cfg.grid_size < 16:
        errs.append(f"grid_size must be >= 16, got {cfg.grid_size}")
    if cfg.max_iter < 1:
        errs.append(f"max_iter must be >= 1, got {cfg.max_iter}")
    if not cfg.step_size > 0:
        errs.append(f"step_size must be > 0, got {cfg.step_size}")
    if not cfg.methods:
        errs.append("methods must name at least one method")
    bad = [m for m in cfg.methods if m not in EXPERIMENT_METHODS]
    if bad:
        errs.append(f"unknown methods {bad}; choose from {EXPERIMENT_METHODS}")
    if len(set(cfg.methods)) != len(cfg.methods):
        errs.append("methods contains duplicates")
    return errs


def validate_config(path=None, overrides=None):
    """Read, merge and validate a config.

    Parameters
    ----------
    path : str, optional
        Config file; may be omitted when ``overrides`` carry everything.
    overrides : dict of str, optional
        Raw ``key -> value`` strings that win over the file.

    Raises
    ------
    ConfigError
        With every problem found, not just the first.
    """
    entries, errors = {}, []
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                entries, errors = parse_text(fh.read())
        except OSError as exc:
            raise ConfigError([f"cannot read config {path}: {exc}"]) from None
    entries.update(overrides or {})
    return build_config(entries, errors)


def parse_overrides(pairs):
    """Turn ``["key=value", ...]`` into a dict; raises ConfigError on bad items."""
    out, errors = {}, []
    for item in pairs or ():
        if "=" not in item:
            errors.append(f"override {item!r} is not key=value")
            continue
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    if errors:
        raise ConfigError(errors)
    return out
