"""Run configuration: parsing, validation and construction of models and
contours from a YAML or JSON file."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .contour import build_contour
from .errors import ConfigError
from .model import (PHI_PRESETS, SPATIAL_PRESETS, PhiProfile, SchroedingerExampleModel,
                    SeparableAnalyticModel, build_discretized_full_matrix)

MODEL_KINDS = ("separable", "schroedinger", "discretized")

_CONTOUR_KEYS = {"l", "height", "re_entry", "points_per_segment", "panel_width", "tail_points", "cutoff"}


def _matrix(value, name) -> np.ndarray:
    """Real or complex matrix from nested lists; complex entries may be
    given as ``[re, im]`` pairs or strings like ``"1+2j"``."""
    try:
        if isinstance(value, dict):
            re = np.asarray(value["re"], dtype=float)
            im = np.asarray(value.get("im", np.zeros_like(re)), dtype=float)
            return np.atleast_2d(re + 1j * im)
        arr = np.asarray([[complex(x) for x in row] for row in np.atleast_2d(np.asarray(value, dtype=object))])
        return np.atleast_2d(arr)
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"{name}: not a matrix ({exc})") from exc


def _positive(d, key, default=None, kind=float):
    v = d.get(key, default)
    if v is None:
        raise ConfigError(f"missing required key {key!r}")
    try:
        v = kind(v)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key}: expected a number") from exc
    if not v > 0:
        raise ConfigError(f"{key} must be positive")
    return v


@dataclass
class RunConfig:
    model: dict
    contour: dict
    solver: dict = field(default_factory=dict)
    verify: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    seed: int = 0
    source_hash: str = ""

    @property
    def tol(self) -> float:
        return float(self.solver.get("tol", 1e-10))

    @property
    def max_iter(self) -> int:
        return int(self.solver.get("max_iter", 200))

    @property
    def allow_noncertified(self) -> bool:
        return bool(self.solver.get("allow_noncertified", False))

    def build_model(self):
        return build_model(self.model)

    def build_contour(self, model, l: int | None = None, **override):
        spec = dict(self.contour)
        spec.update(override)
        if l is not None:
            spec["l"] = l
        return build_contour(model, **spec)

    def second_contour(self, model, l: int | None = None):
        alt = self.verify.get("second_contour")
        if alt is None:
            alt = {"height": 0.7 * float(self.contour.get("height", 0.3))}
        return self.build_contour(model, l, **alt)

    def discretization(self, model):
        if self.model.get("kind") != "discretized":
            return None
        return build_discretized_full_matrix(model, float(self.model["Lambda"]), int(self.model["K"]))


def build_model(spec: dict):
    kind = spec.get("kind")
    if kind not in MODEL_KINDS:
        raise ConfigError(f"model.kind must be one of {MODEL_KINDS}, got {kind!r}")
    try:
        if kind == "discretized":
            base = spec.get("base")
            if not isinstance(base, dict) or base.get("kind") == "discretized":
                raise ConfigError("discretized model needs a separable or schroedinger 'base'")
            _positive(spec, "Lambda")
            if int(spec.get("K", 0)) < 2:
                raise ConfigError("discretized model needs K >= 2")
            return build_model(base)
        if kind == "separable":
            return _separable(spec)
        return _schroedinger(spec)
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"invalid {kind} model: {exc}") from exc


def _separable(spec):
    alpha0 = _positive(spec, "alpha0")
    if "tilde_a1" in spec:
        a1 = _matrix(spec["tilde_a1"], "tilde_a1")
    elif "eigenvalues" in spec:
        a1 = np.diag(np.asarray(spec["eigenvalues"], dtype=float)).astype(complex)
    else:
        raise ConfigError("separable model needs 'tilde_a1' or 'eigenvalues'")
    n = a1.shape[0]
    if "coupling" in spec:
        G = _matrix(spec["coupling"], "coupling")
    elif "coupling_seed" in spec:
        rng = np.random.default_rng(int(spec["coupling_seed"]))
        m = int(spec.get("coupling_rank", n))
        G = rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))
        G *= float(spec.get("coupling_scale", 1.0)) / np.linalg.norm(G, 2)
    else:
        G = np.eye(n)
    phi_spec = dict(spec.get("phi", {"kind": "zero"}))
    pk = phi_spec.pop("kind", "exp-decay")
    if pk not in PHI_PRESETS:
        raise ConfigError(f"unknown phi preset {pk!r}; choose from {PHI_PRESETS}")
    unknown = set(phi_spec) - {"amplitude", "scale", "gamma", "center"}
    if unknown:
        raise ConfigError(f"unknown phi keys {sorted(unknown)}")
    phi = PhiProfile(pk, alpha0, **{k: float(v) for k, v in phi_spec.items()})
    return SeparableAnalyticModel(phi, G, a1, spec.get("strip_height"), spec.get("spectral_cutoff"))


def _schroedinger(spec):
    b = dict(spec.get("b", {}))
    a1 = dict(spec.get("a1", {}))
    for name, d in (("b", b), ("a1", a1)):
        k = d.get("kind", "bump" if name == "b" else "constant")
        if k not in SPATIAL_PRESETS:
            raise ConfigError(f"unknown {name} preset {k!r}; choose from {SPATIAL_PRESETS}")
    return SchroedingerExampleModel.from_presets(
        lambda0=_positive(spec, "lambda0", 1.0),
        L=_positive(spec, "L", 10.0),
        N=_positive(spec, "N", 256, int),
        b_kind=b.get("kind", "bump"),
        b_amplitude=float(b.get("amplitude", 0.15)),
        b_width=float(b.get("width", 1.0)),
        a1_kind=a1.get("kind", "constant"),
        a1_base=float(a1.get("base", 2.0)),
        a1_amplitude=float(a1.get("amplitude", 0.0)),
        a1_width=float(a1.get("width", 1.0)),
        decay_alpha=_positive(spec, "alpha", 1.0),
        spectral_cutoff=spec.get("spectral_cutoff"),
    )


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: cannot parse ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    unknown = set(data) - {"model", "contour", "solver", "verify", "sweep", "grid", "seed"}
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    if not isinstance(data.get("model"), dict):
        raise ConfigError("'model' section is required")
    contour = data.get("contour", {}) or {}
    if not isinstance(contour, dict) or set(contour) - _CONTOUR_KEYS:
        raise ConfigError(f"contour keys must be among {sorted(_CONTOUR_KEYS)}")
    if contour.get("l", 1) not in (1, -1):
        raise ConfigError("contour.l must be +1 or -1")
    cfg = RunConfig(
        model=data["model"], contour=contour,
        solver=data.get("solver", {}) or {}, verify=data.get("verify", {}) or {},
        sweep=data.get("sweep", {}) or {}, grid=data.get("grid", {}) or {},
        seed=int(data.get("seed", 0)),
        source_hash=hashlib.sha256(text.encode()).hexdigest(),
    )
    if not cfg.tol > 0:
        raise ConfigError("solver.tol must be positive")
    if cfg.max_iter < 1:
        raise ConfigError("solver.max_iter must be positive")
    # fail early on bad model parameters
    cfg.build_model()
    return cfg


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    return parse_config(text, str(p))


def dump_json(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2, default=_json_default, allow_nan=False)


def _clean(o):
    """Replace non-finite floats by ``None`` so the output is strict JSON."""
    if isinstance(o, dict):
        return {str(k): _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    if isinstance(o, (float, np.floating)):
        return float(o) if np.isfinite(o) else None
    if isinstance(o, np.ndarray):
        return _clean(o.tolist())
    return o


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, complex) or isinstance(o, np.complexfloating):
        return {"re": float(o.real), "im": float(o.imag)}
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")
