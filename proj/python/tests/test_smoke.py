import math

import numpy as np
import pytest

import cfmar


def small_geometry(views=12, size=32, pitch=4.0):
    return {
        "num_views": views,
        "angular_range_deg": 200.0,
        "source_to_isocenter": 300.0,
        "source_to_detector": 600.0,
        "detector": {"rows": size, "cols": size, "pixel_pitch": pitch},
    }


def grid(n, spacing):
    return {"dims": [n, n, n], "spacing": [spacing] * 3}


def test_presets_and_twins():
    names = cfmar.preset_names()
    assert "knee_screws" in names and "towers_heavy_metal" in names
    knee = cfmar.build_preset("knee_screws")
    twin = cfmar.build_preset("metal_free_twin(knee_screws)")
    assert len(twin["primitives"]) < len(knee["primitives"])
    with pytest.raises(ValueError, match="unknown_preset"):
        cfmar.build_preset("nope")


def test_matched_pair_differs_only_on_metal_trace():
    g = small_geometry()
    wm, mf = cfmar.simulate("knee_screws", g, {"i0": 1e5})
    assert wm.shape == (12, 32, 32)
    trace = cfmar.metal_trace({"preset": "knee_screws"}, g).astype(bool)
    assert trace.any()
    assert np.all(wm[trace] < mf[trace])
    assert np.array_equal(wm[~trace], mf[~trace])


def test_fdk_recovers_uniform_cylinder():
    g = small_geometry(views=90, size=64, pitch=2.0)
    phantom = {"name": "cyl", "primitives": [{"shape": "cylinder", "from": [0, 0, -60], "to": [0, 0, 60],
                                              "radius": 20.0,
                                              "material": {"name": "water", "mu": 0.02}}]}
    li = cfmar.analytic_line_integrals(phantom, g)
    vol = cfmar.fdk(li, g, grid(32, 1.5))
    assert vol.shape == (32, 32, 32)
    assert vol[12:20, 12:20, 12:20].mean() == pytest.approx(0.02, rel=0.05)
    hu = cfmar.to_hounsfield(np.full(3, 0.02), 0.02)
    assert np.allclose(hu, 0.0)


def test_consistency_filter_shapes_and_empty_input():
    g = small_geometry()
    gr = grid(12, 3.0)
    masks = np.zeros((12, 32, 32), dtype=np.uint8)
    filtered, env = cfmar.consistency_filter(masks, g, gr, tau=0.9)
    assert filtered.shape == masks.shape and not filtered.any()
    assert env.shape == (12, 12, 12) and not env.any()
    hits, max_hits = cfmar.accumulate_hits(np.ones_like(masks), g, gr)
    assert np.array_equal(hits, max_hits)
    assert max_hits.max() == 12


def test_metrics():
    gr = {"dims": [16, 16, 3], "spacing": [1.0, 1.0, 1.0]}
    rng = np.random.default_rng(0)
    ref = rng.uniform(-1000, 3000, size=(3, 16, 16))
    mask = np.zeros(ref.shape, dtype=np.uint8)
    mask[1, 4:6, 4:6] = 1
    test = ref + 20.0
    psnr = cfmar.masked_psnr(test, ref, mask, gr)
    assert all(v == pytest.approx(20 * math.log10(4096 / 20), abs=1e-9) for v in psnr["slices"])
    assert psnr["aggregated"] == 1
    ssim = cfmar.masked_ssim(ref, ref, mask, gr)
    assert all(v == 1.0 for v in ssim["slices"])
    assert cfmar.roc_auc([0.9, 0.5, 0.3, 0.5, 0.2, 0.1], [1, 1, 1, 0, 0, 0]) == pytest.approx(7.5 / 9)
    assert cfmar.roc_auc([1, 2], [1, 1]) is None
    assert cfmar.mask_prf([1, 1, 0, 0], [1, 0, 1, 0]) == (0.5, 0.5, 0.5)


def test_shape_mismatch_raises():
    g = small_geometry()
    with pytest.raises(ValueError, match="contract"):
        cfmar.heuristic_segment(np.zeros((3, 3, 3)), g)
