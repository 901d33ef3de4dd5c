"""Experiment configuration: JSON schema, defaults and field builders."""

from __future__ import annotations

import copy
import json
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ConfigurationError
from .grid import Grid, RegionMask, build_grid, build_regions

EXPERIMENTS = (
    "forward",
    "dnmap",
    "operator-xcheck",
    "extension-check",
    "decay",
    "gauge-demo",
    "ucp-probe",
    "invert",
)

# Default geometries.  The inversion region holds four nodes: the source map
# loses roughly a factor 40 per singular value, so wider regions cannot be
# resolved at the fixed noiseless weight alpha = 1e-12.
DEFAULT_GEOMETRIES = {
    "inverse-1d": {"grid": {"dim": 1, "L": 1.0, "M": 31}, "regions": {"omega": [[-0.25, -0.05]], "w": [[0.05, 0.8]]}},
    "gauge-1d": {"grid": {"dim": 1, "L": 1.0, "M": 31}, "regions": {"omega": [[-0.55, -0.05]], "w": [[0.05, 0.9]]}},
    "operator-1d": {"grid": {"dim": 1, "L": 1.0, "M": 63}, "regions": {"omega": [[-0.3, -0.15]], "w": [[0.1, 0.8]]}},
    "probe-2d": {
        "grid": {"dim": 2, "L": 1.0, "M": 24},
        "regions": {"omega": [[-0.4, -0.08], [-0.16, 0.16]], "w": [[0.05, 0.7], [-0.5, 0.5]]},
    },
}

_EXPERIMENT_GEOMETRY = {
    "forward": "inverse-1d",
    "dnmap": "inverse-1d",
    "operator-xcheck": "operator-1d",
    "extension-check": "operator-1d",
    "decay": "operator-1d",
    "gauge-demo": "gauge-1d",
    "ucp-probe": "inverse-1d",
    "invert": "inverse-1d",
}

_DEFAULT_PHYSICS = {
    "s": 0.5,
    "lambda": 0.1,
    "sigma": {"kind": "bump", "amplitude": 0.3, "width": 0.1},
    "F": {"kind": "bump", "amplitude": 2.0, "width": 0.12},
    "phi": {"kind": "random", "scale": 1.0},
    "f": {"kind": "bump", "amplitude": 1.0, "width": 0.2},
}

_DEFAULT_SOLVER = {
    "alpha": 1e-12,
    "noise": 0.0,
    "seed": 0,
    "rtol": 1e-5,
    "kernel_rtol": 1e-10,
    "gn": {"max_iter": 50, "grad_tol": 1e-10},
    "s_values": [0.25, 0.5, 0.75],
    "n_random": 10,
    "heights": {"min": 0.1, "max": 10.0, "count": 20},
    "M_sweep": [15, 31, 63],
    "truncation_ladder": [1.0, 1.5, 2.0],
}

_num = {"type": "number"}
_box = {"type": "array", "minItems": 1, "maxItems": 2, "items": {"type": "array", "minItems": 2, "maxItems": 2, "items": _num}}
_field = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["zero", "constant", "bump", "random"]},
        "value": _num,
        "amplitude": _num,
        "center": {"type": "array", "items": _num, "minItems": 1, "maxItems": 2},
        "width": {"type": "number", "exclusiveMinimum": 0},
        "scale": _num,
    },
    "required": ["kind"],
    "additionalProperties": False,
}

SCHEMA = {
    "type": "object",
    "properties": {
        "experiment": {"enum": list(EXPERIMENTS)},
        "geometry": {"enum": list(DEFAULT_GEOMETRIES)},
        "grid": {
            "type": "object",
            "properties": {
                "dim": {"enum": [1, 2]},
                "L": {"type": "number", "exclusiveMinimum": 0},
                "M": {"type": "integer", "minimum": 8},
            },
            "additionalProperties": False,
        },
        "regions": {
            "type": "object",
            "properties": {"omega": _box, "w": _box},
            "additionalProperties": False,
        },
        "physics": {
            "type": "object",
            "properties": {
                "s": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "lambda": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "sigma": _field,
                "F": _field,
                "phi": _field,
                "f": _field,
            },
            "additionalProperties": False,
        },
        "solver": {
            "type": "object",
            "properties": {
                "alpha": {"type": "number", "minimum": 0},
                "noise": {"type": "number", "minimum": 0},
                "seed": {"type": "integer", "minimum": 0},
                "rtol": {"type": "number", "exclusiveMinimum": 0},
                "kernel_rtol": {"type": "number", "exclusiveMinimum": 0},
                "gn": {
                    "type": "object",
                    "properties": {
                        "max_iter": {"type": "integer", "minimum": 0},
                        "grad_tol": {"type": "number", "exclusiveMinimum": 0},
                    },
                    "additionalProperties": False,
                },
                "s_values": {
                    "type": "array",
                    "minItems": 1,
                    "items": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                },
                "n_random": {"type": "integer", "minimum": 1},
                "heights": {
                    "type": "object",
                    "properties": {
                        "min": {"type": "number", "exclusiveMinimum": 0},
                        "max": {"type": "number", "exclusiveMinimum": 0},
                        "count": {"type": "integer", "minimum": 2},
                    },
                    "additionalProperties": False,
                },
                "M_sweep": {"type": "array", "items": {"type": "integer", "minimum": 8}},
                "truncation_ladder": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
            },
            "additionalProperties": False,
        },
        "output": {
            "type": "object",
            "properties": {
                "directory": {"type": "string"},
                "formats": {"type": "array", "items": {"enum": ["csv", "json"]}, "uniqueItems": True},
            },
            "additionalProperties": False,
        },
    },
    "required": ["experiment"],
    "additionalProperties": False,
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def validate(doc) -> dict:
    """Validate a raw config document and fill in defaults.

    Raises
    ------
    ConfigurationError
        With the JSON path of the first offending entry.
    """
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigurationError(f"{where}: {exc.message}") from None
    exp = doc["experiment"]
    geom = DEFAULT_GEOMETRIES[doc.get("geometry", _EXPERIMENT_GEOMETRY[exp])]
    cfg = _merge(
        {
            "experiment": exp,
            "grid": geom["grid"],
            "regions": geom["regions"],
            "physics": _DEFAULT_PHYSICS,
            "solver": _DEFAULT_SOLVER,
            "output": {"directory": "results", "formats": ["csv", "json"]},
        },
        {k: v for k, v in doc.items() if k != "geometry"},
    )
    if "grid" in doc and "regions" not in doc and cfg["grid"]["dim"] != geom["grid"]["dim"]:
        raise ConfigurationError("regions: required when the grid dimension differs from the default geometry")
    dim = cfg["grid"]["dim"]
    for name in ("omega", "w"):
        if len(cfg["regions"][name]) != dim:
            raise ConfigurationError(f"regions/{name}: need one (lo, hi) pair per axis ({dim})")
    h = cfg["solver"]["heights"]
    if h["min"] >= h["max"]:
        raise ConfigurationError("solver/heights: min must be below max")
    return cfg


def load(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigurationError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"<root>: invalid JSON ({exc})") from None
    return validate(doc)


def build_geometry(cfg) -> tuple[Grid, RegionMask]:
    g = cfg["grid"]
    grid = build_grid(g["dim"], g["L"], g["M"])
    reg = cfg["regions"]
    return grid, build_regions(grid, reg["omega"], reg["w"])


def _bump(coords, desc, default_center, default_width):
    c = np.asarray(desc.get("center", default_center), dtype=float)
    w = desc.get("width", default_width)
    return desc.get("amplitude", 1.0) * np.exp(-np.sum((coords - c) ** 2, axis=1) / w**2)


def _box_center(box):
    return np.asarray(box, dtype=float).mean(axis=1)


def conductivity_values(grid: Grid, regions: RegionMask, desc) -> np.ndarray:
    """Nodal conductivity: one off the region, ``1 + bump`` (or constant) on it."""
    sig = np.ones(grid.n_nodes)
    io = regions.idx_omega
    kind = desc["kind"]
    if kind == "constant":
        sig[io] = desc.get("value", 1.0)
    elif kind == "bump":
        sig[io] = 1.0 + _bump(grid.coords[io], desc, _box_center(regions.omega_box), 0.1)
    elif kind != "zero":
        raise ConfigurationError(f"physics/sigma: kind {kind!r} not supported")
    return sig


def region_field(grid: Grid, regions: RegionMask, desc, rng=None) -> np.ndarray:
    """Source-like field on the region nodes (ordered as ``idx_omega``)."""
    io = regions.idx_omega
    kind = desc["kind"]
    if kind == "zero":
        return np.zeros(io.size)
    if kind == "constant":
        return np.full(io.size, float(desc.get("value", 1.0)))
    if kind == "bump":
        return _bump(grid.coords[io], desc, _box_center(regions.omega_box), 0.12)
    rng = rng if rng is not None else np.random.default_rng(0)
    return desc.get("scale", 1.0) * rng.standard_normal(io.size)


def window_field(grid: Grid, regions: RegionMask, desc, rng=None) -> np.ndarray:
    iw = regions.idx_w
    kind = desc["kind"]
    if kind == "zero":
        return np.zeros(iw.size)
    if kind == "constant":
        return np.full(iw.size, float(desc.get("value", 1.0)))
    if kind == "bump":
        return _bump(grid.coords[iw], desc, _box_center(regions.w_box), 0.2)
    rng = rng if rng is not None else np.random.default_rng(0)
    return desc.get("scale", 1.0) * rng.standard_normal(iw.size)


def gauge_function(grid: Grid, regions: RegionMask, desc, rng=None) -> np.ndarray:
    """Admissible gauge function: zero off the region and on its two outer layers."""
    layers = regions.omega_layers()
    support = np.concatenate(layers[2:]) if len(layers) > 2 else np.array([], dtype=int)
    phi = np.zeros(grid.n_nodes)
    kind = desc["kind"]
    if kind == "zero" or support.size == 0:
        return phi
    if kind == "constant":
        phi[support] = desc.get("value", 1.0)
    elif kind == "bump":
        phi[support] = _bump(grid.coords[support], desc, _box_center(regions.omega_box), 0.1)
    else:
        rng = rng if rng is not None else np.random.default_rng(0)
        phi[support] = desc.get("scale", 1.0) * rng.standard_normal(support.size)
    return phi
