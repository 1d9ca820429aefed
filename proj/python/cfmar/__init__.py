"""Consistency-filtered metal artifact reduction for cone-beam CT.

Stacks are numpy arrays shaped (views, rows, cols); volumes are shaped
(nz, ny, nx). Geometries, grids, phantoms and parameter sets are plain
dicts with the same keys as the JSON files used by the command line tool.
"""

import json

import numpy as np

from . import _core

__all__ = [
    "preset_names", "build_preset", "desk_scale_geometry", "desk_scale_grid", "extended_grid",
    "simulate", "line_integrals", "analytic_line_integrals", "metal_trace", "metal_mask_3d",
    "fdk", "to_hounsfield", "heuristic_segment", "perturb_masks", "accumulate_hits",
    "consistency_filter", "threshold_segment_3d", "masked_psnr", "masked_ssim", "mask_prf",
    "roc_auc", "run_experiment",
]


def _j(obj):
    return obj if isinstance(obj, str) else json.dumps(obj)


def preset_names():
    return list(_core.preset_names())


def build_preset(name):
    return json.loads(_core.build_preset(name))


def desk_scale_geometry():
    return json.loads(_core.desk_scale_geometry())


def desk_scale_grid():
    return json.loads(_core.desk_scale_grid())


def extended_grid(grid):
    return json.loads(_core.extended_grid(_j(grid)))


def simulate(phantom, geometry=None, physics=None):
    """Matched (with_metal, metal_free) raw intensities. `phantom` may be a preset name."""
    if isinstance(phantom, str) and not phantom.lstrip().startswith("{"):
        phantom = {"preset": phantom}
    geometry = desk_scale_geometry() if geometry is None else geometry
    return _core.simulate(_j(phantom), _j(geometry), _j(physics or {}))


def line_integrals(raw, geometry, i0):
    return _core.line_integrals(raw, _j(geometry), float(i0))


def analytic_line_integrals(phantom, geometry):
    return _core.analytic_line_integrals(_j(phantom), _j(geometry))


def metal_trace(phantom, geometry):
    return _core.metal_trace(_j(phantom), _j(geometry))


def metal_mask_3d(phantom, grid):
    return _core.metal_mask_3d(_j(phantom), _j(grid))


def fdk(line_integrals, geometry, grid):
    """FDK reconstruction in 1/mm."""
    return _core.fdk(line_integrals, _j(geometry), _j(grid))


def to_hounsfield(mu, mu_water=None):
    return _core.to_hounsfield(mu) if mu_water is None else _core.to_hounsfield(mu, mu_water)


def heuristic_segment(line_integrals, geometry, params=None):
    return _core.heuristic_segment(line_integrals, _j(geometry), _j(params or {}))


def perturb_masks(masks, geometry, spec):
    return _core.perturb_masks(np.asarray(masks, dtype=np.uint8), _j(geometry), _j(spec))


def accumulate_hits(masks, geometry, grid):
    return _core.accumulate_hits(np.asarray(masks, dtype=np.uint8), _j(geometry), _j(grid))


def consistency_filter(masks, geometry, grid, tau=0.96, min_support=-1):
    """Returns (filtered 2D masks, 3D envelope on `grid`)."""
    return _core.consistency_filter(np.asarray(masks, dtype=np.uint8), _j(geometry), _j(grid), tau, min_support)


def threshold_segment_3d(hu, grid, threshold_hu=3000.0, min_component_size=10):
    return _core.threshold_segment_3d(hu, _j(grid), threshold_hu, min_component_size)


def masked_psnr(test, reference, mask, grid, data_range=4096.0):
    return _core.masked_psnr(test, reference, np.asarray(mask, dtype=np.uint8), _j(grid), data_range)


def masked_ssim(test, reference, mask, grid, data_range=4096.0):
    return _core.masked_ssim(test, reference, np.asarray(mask, dtype=np.uint8), _j(grid), data_range)


def mask_prf(pred, truth):
    return _core.mask_prf(np.asarray(pred, dtype=np.uint8), np.asarray(truth, dtype=np.uint8))


def roc_auc(scores, labels):
    return _core.roc_auc(np.asarray(scores, dtype=float).ravel(), np.asarray(labels, dtype=np.uint8).ravel())


def run_experiment(config):
    """Full in-memory experiment; returns volumes and the evaluation summary dict."""
    out = dict(_core.run_experiment(_j(config)))
    out["summary"] = json.loads(out["summary"])
    return out
