"""Run configuration: strict TOML parsing and validation.

Unknown keys are rejected (a typo in a parameter name must never
silently change the physics), every value is type- and range-checked,
and cross-field constraints (dt < T, m >= 1, L defined exactly once, in
[discretization]) are enforced at parse time.
"""

import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .basis import BasisKind
from .kernels import GAUSSIAN, LAPLACE, TABULATED, KernelSpec
from .simulate import ModelParams, csv_profile, gaussian_bump, single_mode, zero_profile


class ConfigError(ValueError):
    """Carries a list of (key, reason) pairs for every problem found."""

    def __init__(self, problems):
        self.problems = list(problems)
        lines = [f"  {key}: {reason}" for key, reason in self.problems]
        super().__init__("invalid configuration:\n" + "\n".join(lines))


_PROFILE_KEYS = {
    "gaussian_bump": {"profile", "center", "width", "amplitude"},
    "single_mode": {"profile", "k", "amplitude"},
    "csv": {"profile", "path"},
    "zero": {"profile"},
}

_SCHEMA = {
    "model": {"a", "b", "dispersal", "mu", "nu", "M"},
    "kernel": {"family", "epsilon", "normalization", "table", "allow_inadmissible"},
    "discretization": {"m", "L", "include_constant", "panels", "order"},
    "time": {"T", "T_max", "dt", "record_stride"},
    "initial": {"u", "w", "scale_to_admissible", "admissible_fraction"},
    "output": {"directory", "formats"},
}


@dataclass(frozen=True)
class RunConfig:
    model: ModelParams
    kernel: KernelSpec
    m: int
    L: float
    include_constant: bool
    panels: int | None
    order: int | None
    T: float | None
    T_max: float
    dt: float | None
    record_stride: int
    initial_u: dict
    initial_w: dict
    scale_to_admissible: bool
    admissible_fraction: float
    allow_inadmissible_kernel: bool
    output_dir: str
    formats: tuple
    raw: dict = field(repr=False, default_factory=dict)

    def config_hash(self):
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    def profile(self, which, disc):
        """Build the initial profile for 'u' or 'w' against a discretisation."""
        spec = self.initial_u if which == "u" else self.initial_w
        kind = spec["profile"]
        if kind == "gaussian_bump":
            return gaussian_bump(spec.get("center", 0.0), spec["width"], spec.get("amplitude", 1.0))
        if kind == "single_mode":
            basis = disc.plant if which == "u" else disc.water
            return single_mode(basis, int(spec["k"]), spec.get("amplitude", 1.0))
        if kind == "csv":
            samples = np.loadtxt(spec["path"], delimiter=",", comments="#", ndmin=2)
            return csv_profile(samples)
        return zero_profile()


def _check_number(table, section, key, problems, *, required=False, minimum=None,
                  strict_min=False, integer=False, default=None):
    if key not in table:
        if required:
            problems.append((f"{section}.{key}", "missing required key"))
        return default
    val = table[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        problems.append((f"{section}.{key}", f"expected a number, got {type(val).__name__}"))
        return default
    if integer and int(val) != val:
        problems.append((f"{section}.{key}", "expected an integer"))
        return default
    if minimum is not None:
        if strict_min and not val > minimum:
            problems.append((f"{section}.{key}", f"must be > {minimum}"))
            return default
        if not strict_min and not val >= minimum:
            problems.append((f"{section}.{key}", f"must be >= {minimum}"))
            return default
    return int(val) if integer else float(val)


def _check_unknown(table, section, allowed, problems):
    for key in table:
        if key not in allowed:
            problems.append((f"{section}.{key}", "unknown key"))


def _parse_profile(table, section, problems):
    kind = table.get("profile")
    if kind not in _PROFILE_KEYS:
        problems.append((f"{section}.profile", f"expected one of {sorted(_PROFILE_KEYS)}"))
        return {"profile": "zero"}
    _check_unknown(table, section, _PROFILE_KEYS[kind], problems)
    out = {"profile": kind}
    if kind == "gaussian_bump":
        out["center"] = _check_number(table, section, "center", problems, default=0.0)
        out["width"] = _check_number(
            table, section, "width", problems, required=True, minimum=0.0, strict_min=True
        )
        out["amplitude"] = _check_number(table, section, "amplitude", problems, default=1.0)
    elif kind == "single_mode":
        out["k"] = _check_number(
            table, section, "k", problems, required=True, minimum=1, integer=True
        )
        out["amplitude"] = _check_number(table, section, "amplitude", problems, default=1.0)
    elif kind == "csv":
        if "path" not in table:
            problems.append((f"{section}.path", "missing required key"))
        else:
            out["path"] = str(table["path"])
    return out


def parse_config(path):
    """Parse and validate a TOML run configuration."""
    path = Path(path)
    if not path.exists():
        raise ConfigError([(str(path), "file does not exist")])
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as err:
            raise ConfigError([(str(path), f"TOML syntax error: {err}")]) from None
    return config_from_dict(raw, base_dir=path.parent)


def config_from_dict(raw, base_dir="."):
    """Validate a configuration dictionary (the in-memory form of the TOML file)."""
    path = Path(base_dir) / "<in-memory>"
    problems = []
    _check_unknown(raw, "<root>", set(_SCHEMA), problems)
    for section in ("model", "kernel", "discretization"):
        if section not in raw:
            problems.append((section, "missing required section"))
    if problems:
        raise ConfigError(problems)
    for section, allowed in _SCHEMA.items():
        if section in raw and section != "initial":
            _check_unknown(raw[section], section, allowed, problems)

    mt = raw["model"]
    a = _check_number(mt, "model", "a", problems, required=True, minimum=0.0)
    b = _check_number(mt, "model", "b", problems, required=True, minimum=0.0)
    dispersal = _check_number(
        mt, "model", "dispersal", problems, required=True, minimum=0.0, strict_min=True
    )
    mu = _check_number(mt, "model", "mu", problems, required=True, minimum=0.0, strict_min=True)
    nu = _check_number(mt, "model", "nu", problems, required=True, minimum=0.0)
    M = _check_number(mt, "model", "M", problems, required=True, minimum=0.0, strict_min=True)
    if "L" in mt:
        problems.append(("model.L", "L belongs to [discretization] only"))

    kt = raw["kernel"]
    family = kt.get("family")
    if family not in (GAUSSIAN, LAPLACE, TABULATED):
        problems.append(("kernel.family", f"expected one of {[GAUSSIAN, LAPLACE, TABULATED]}"))
        family = GAUSSIAN
    epsilon = _check_number(
        kt, "kernel", "epsilon", problems, minimum=0.0, strict_min=True, default=1.0
    )
    normalization = _check_number(
        kt, "kernel", "normalization", problems, minimum=0.0, strict_min=True, default=1.0
    )
    allow_bad_kernel = bool(kt.get("allow_inadmissible", False))
    table = None
    if family == TABULATED:
        if "table" not in kt:
            problems.append(("kernel.table", "tabulated kernels need a table path"))
        else:
            table_path = Path(kt["table"])
            if not table_path.is_absolute():
                table_path = path.parent / table_path
            try:
                table = np.loadtxt(table_path, delimiter=",", comments="#", ndmin=2)
            except OSError as err:
                problems.append(("kernel.table", f"cannot read {table_path}: {err}"))

    dt_ = raw["discretization"]
    m = _check_number(dt_, "discretization", "m", problems, required=True, minimum=1, integer=True)
    L = _check_number(
        dt_, "discretization", "L", problems, required=True, minimum=0.0, strict_min=True
    )
    include_constant = bool(dt_.get("include_constant", False))
    panels = _check_number(dt_, "discretization", "panels", problems, minimum=1, integer=True)
    order = _check_number(dt_, "discretization", "order", problems, minimum=1, integer=True)

    tt = raw.get("time", {})
    T = _check_number(tt, "time", "T", problems, minimum=0.0, strict_min=True)
    T_max = _check_number(
        tt, "time", "T_max", problems, minimum=0.0, strict_min=True, default=1.0
    )
    dt_step = _check_number(tt, "time", "dt", problems, minimum=0.0, strict_min=True)
    record_stride = _check_number(
        tt, "time", "record_stride", problems, minimum=1, integer=True, default=1
    )
    if T is not None and dt_step is not None and dt_step >= T:
        problems.append(("time.dt", "dt must be smaller than T"))

    it = raw.get("initial", {})
    _check_unknown(it, "initial", _SCHEMA["initial"], problems)
    initial_u = (
        _parse_profile(it["u"], "initial.u", problems) if "u" in it else {"profile": "zero"}
    )
    initial_w = (
        _parse_profile(it["w"], "initial.w", problems) if "w" in it else {"profile": "zero"}
    )
    scale_to_admissible = bool(it.get("scale_to_admissible", False))
    admissible_fraction = _check_number(
        it, "initial", "admissible_fraction", problems,
        minimum=0.0, strict_min=True, default=0.9,
    )
    if admissible_fraction is not None and admissible_fraction >= 1.0:
        problems.append(("initial.admissible_fraction", "must be < 1"))

    ot = raw.get("output", {})
    output_dir = str(ot.get("directory", "out"))
    formats = ot.get("formats", ["csv", "json"])
    if not isinstance(formats, list) or any(f not in ("csv", "json") for f in formats):
        problems.append(("output.formats", "expected a list drawn from ['csv', 'json']"))
        formats = ["csv", "json"]

    if problems:
        raise ConfigError(problems)

    model = ModelParams(a=a, b=b, dispersal=dispersal, mu=mu, nu=nu, L=L, M=M)
    kernel = KernelSpec(
        family=family, epsilon=epsilon, normalization=normalization, table=table
    )
    if initial_u["profile"] == "csv" and not Path(initial_u["path"]).is_absolute():
        initial_u["path"] = str(path.parent / initial_u["path"])
    if initial_w["profile"] == "csv" and not Path(initial_w["path"]).is_absolute():
        initial_w["path"] = str(path.parent / initial_w["path"])
    return RunConfig(
        model=model,
        kernel=kernel,
        m=m,
        L=L,
        include_constant=include_constant,
        panels=panels,
        order=order,
        T=T,
        T_max=T_max,
        dt=dt_step,
        record_stride=record_stride,
        initial_u=initial_u,
        initial_w=initial_w,
        scale_to_admissible=scale_to_admissible,
        admissible_fraction=admissible_fraction,
        allow_inadmissible_kernel=allow_bad_kernel,
        output_dir=output_dir,
        formats=tuple(formats),
        raw=raw,
    )
