"""Flat ``key = value`` configuration files.

Blank lines and ``#`` comments are ignored.  Model keys:

    alpha, beta, gamma, K, T       required
    L            domain length                    (default 1)
    q_kind       white | power_law                (default white)
    q_exponent   rho in q_k = lambda_k^-rho       (default 0)
    f_kind       zero | linear_diagonal | sin_scaled | tanh_scaled | affine
                                                  (default zero)
    f_scale      c in c u, c sin u, c tanh u; slope of affine  (default 1)
    f_offset     intercept of affine              (default 0)
    x0_kind      zero | mode | smooth_decay       (default smooth_decay)
    x0_p         decay exponent, x0_k = k^-p      (default 2 beta + 0.6)
    x0_mode      mode index for x0_kind = mode    (default 1)
    x0_amplitude amplitude for x0_kind = mode     (default 1)
    r_target     regularity index r               (default: admissible max - 0.1)
    epsilon0     kappa back-off                   (default 1e-3)
    N_x          collocation cells                (default 4 K)

Study keys (command-line flags take precedence): grids, ref, paths, seed, lags.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .model import InitialDatum, ModelSpec, Nonlinearity, QSpectrum, validate

__all__ = ["ConfigError", "StudyParams", "Config", "parse_config", "parse_config_text",
           "MODEL_KEYS", "STUDY_KEYS"]

MODEL_KEYS = ("alpha", "beta", "gamma", "L", "K", "T", "q_kind", "q_exponent", "f_kind",
              "f_scale", "f_offset", "x0_kind", "x0_p", "x0_mode", "x0_amplitude",
              "r_target", "epsilon0", "N_x")
STUDY_KEYS = ("grids", "ref", "paths", "seed", "lags")
_REQUIRED = ("alpha", "beta", "gamma", "K", "T")
_INT_KEYS = {"K", "N_x", "x0_mode", "ref", "paths", "seed"}
_STR_KEYS = {"q_kind", "f_kind", "x0_kind"}
_LIST_KEYS = {"grids", "lags"}


class ConfigError(ValueError):
    """Malformed configuration text."""


@dataclass
class StudyParams:
    grids: list | None = None
    ref: int | None = None
    paths: int | None = None
    seed: int | None = None
    lags: list | None = None


@dataclass
class Config:
    spec: ModelSpec
    study: StudyParams
    values: dict = field(default_factory=dict)

    def canonical_text(self) -> str:
        """Resolved key-value pairs in a fixed order; basis of the content hash."""
        lines = []
        for key in MODEL_KEYS + STUDY_KEYS:
            if key in self.values:
                val = self.values[key]
                if isinstance(val, list):
                    val = ",".join(str(v) for v in val)
                lines.append(f"{key} = {val}")
        return "\n".join(lines) + "\n"

    def content_hash(self) -> str:
        """Git blob hash of :meth:`canonical_text`."""
        data = self.canonical_text().encode()
        return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def _convert(key, raw, lineno):
    try:
        if key in _STR_KEYS:
            return raw
        if key in _LIST_KEYS:
            return [int(v) for v in raw.replace(" ", "").split(",") if v]
        if key in _INT_KEYS:
            val = float(raw)
            if val != int(val):
                raise ValueError
            return int(val)
        return float(raw)
    except ValueError:
        raise ConfigError(f"line {lineno}: invalid value {raw!r} for {key}") from None


def _nonlinearity(v):
    kind = v.get("f_kind", "zero")
    c = v.get("f_scale", 1.0)
    n_x = v.get("N_x")
    if kind == "zero":
        return Nonlinearity.zero()
    if kind == "linear_diagonal":
        return Nonlinearity.linear_diagonal(c)
    if kind in ("sin_scaled", "tanh_scaled", "affine"):
        return Nonlinearity.nemytskii(kind, c, v.get("f_offset", 0.0), n_x)
    raise ConfigError(f"unknown f_kind {kind!r}")


def _initial(v):
    kind = v.get("x0_kind", "smooth_decay")
    if kind not in ("zero", "mode", "smooth_decay"):
        raise ConfigError(f"unknown x0_kind {kind!r}")
    return InitialDatum(kind, v.get("x0_p"), v.get("x0_mode", 1), v.get("x0_amplitude", 1.0))


def parse_config_text(text, strict=True, check=True) -> Config:
    """Parse configuration text; see the module docstring for keys.

    ``check`` runs :func:`fracspde.model.validate` on the resulting spec.
    """
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in body.split("=", 1))
        if key not in MODEL_KEYS and key not in STUDY_KEYS:
            if strict:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            continue
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if not raw:
            raise ConfigError(f"line {lineno}: missing value for {key}")
        values[key] = _convert(key, raw, lineno)
    missing = [k for k in _REQUIRED if k not in values]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")
    if values.get("q_kind", "white") not in ("white", "power_law"):
        raise ConfigError(f"unknown q_kind {values['q_kind']!r}")
    spec = ModelSpec(
        alpha=values["alpha"], beta=values["beta"], gamma=values["gamma"],
        domain_length=values.get("L", 1.0), truncation=values["K"], horizon=values["T"],
        q_spectrum=QSpectrum(values.get("q_kind", "white"), values.get("q_exponent", 0.0)),
        nonlinearity=_nonlinearity(values), initial=_initial(values),
        r_target=values.get("r_target"), epsilon0=values.get("epsilon0", 1e-3))
    if check:
        validate(spec)
    study = StudyParams(**{k: values.get(k) for k in STUDY_KEYS})
    return Config(spec, study, values)


def parse_config(path, strict=True, check=True) -> Config:
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read(), strict=strict, check=check)
