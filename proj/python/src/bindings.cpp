// NumPy bindings. Detector stacks are (views, rows, cols) arrays, volumes
// are (nz, ny, nx); geometry, grids, phantoms and parameters travel as
// JSON strings and are wrapped into dicts by the Python package.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <string>

#include "cfmar/consistency_filter.hpp"
#include "cfmar/experiment.hpp"
#include "cfmar/forward_model.hpp"
#include "cfmar/io.hpp"
#include "cfmar/mar_pipeline.hpp"
#include "cfmar/metrics.hpp"
#include "cfmar/recon_fdk.hpp"
#include "cfmar/segmentation_2d.hpp"
#include "cfmar/segmentation_3d.hpp"

namespace py = pybind11;
using namespace cfmar;

namespace {

template <class T>
using In = py::array_t<T, py::array::c_style | py::array::forcecast>;

template <class T>
T parse(const std::string& text) {
  return json::parse(text).get<T>();
}

template <class Stack, class T>
void fill_stack(Stack& s, const In<T>& a) {
  const ScanGeometry& g = s.geometry;
  require(a.ndim() == 3 && a.shape(0) == g.num_views && a.shape(1) == g.detector.rows && a.shape(2) == g.detector.cols,
          ErrorCode::contract, "array shape must be (views, rows, cols) of the geometry");
  std::copy(a.data(), a.data() + a.size(), s.data.begin());
}

template <class Stack>
Stack to_stack(const In<typename decltype(Stack::data)::value_type>& a, const ScanGeometry& g) {
  Stack s(g);
  fill_stack(s, a);
  return s;
}

ProjectionStack to_projection(const In<double>& a, const ScanGeometry& g, ProjectionKind kind, double i0 = 0.0) {
  ProjectionStack s(g, kind, i0);
  fill_stack(s, a);
  return s;
}

template <class T>
py::array_t<T> from_stack(const DetectorStack<T>& s) {
  py::array_t<T> out({s.views(), s.rows(), s.cols()});
  std::copy(s.data.begin(), s.data.end(), out.mutable_data());
  return out;
}

template <class T>
VoxelGrid<T> to_volume(const In<T>& a, const GridSpec& g, ValueUnit unit) {
  require(a.ndim() == 3 && a.shape(0) == g.dims[2] && a.shape(1) == g.dims[1] && a.shape(2) == g.dims[0],
          ErrorCode::contract, "array shape must be (nz, ny, nx) of the grid");
  VoxelGrid<T> v(g, T{}, unit);
  std::copy(a.data(), a.data() + a.size(), v.data.begin());
  return v;
}

template <class T>
py::array_t<T> from_volume(const VoxelGrid<T>& v) {
  py::array_t<T> out({v.grid.dims[2], v.grid.dims[1], v.grid.dims[0]});
  std::copy(v.data.begin(), v.data.end(), out.mutable_data());
  return out;
}

std::vector<double> slice_values(const SliceReport& r) {
  std::vector<double> out;
  for (const auto& s : r.slices) out.push_back(s.value);
  return out;
}

py::dict report_dict(const SliceReport& r) {
  py::dict d;
  d["slices"] = slice_values(r);
  d["mean"] = r.mean;
  d["median"] = r.median;
  d["aggregated"] = r.aggregated;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Consistency-filtered metal artifact reduction for cone-beam CT";

  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetString(PyExc_ValueError, (std::string(e.slug()) + ": " + e.what()).c_str());
    } catch (const json::exception& e) {
      PyErr_SetString(PyExc_ValueError, (std::string("format_error: ") + e.what()).c_str());
    }
  });

  m.def("preset_names", &preset_names);
  m.def("build_preset", [](const std::string& name) { return json(build_preset(name)).dump(); });
  m.def("desk_scale_geometry", [] { return json(desk_scale_geometry()).dump(); });
  m.def("desk_scale_grid", [] { return json(desk_scale_grid()).dump(); });
  m.def("extended_grid", [](const std::string& grid) { return json(extended_grid(parse<GridSpec>(grid))).dump(); });

  m.def(
      "simulate",
      [](const std::string& phantom, const std::string& geometry, const std::string& physics) {
        const MatchedPair p =
            make_matched_pair(phantom_from_json(json::parse(phantom)), parse<ScanGeometry>(geometry),
                              parse<PhysicsParams>(physics));
        return py::make_tuple(from_stack(p.with_metal), from_stack(p.metal_free));
      },
      py::arg("phantom"), py::arg("geometry"), py::arg("physics"));
  m.def("line_integrals", [](const In<double>& raw, const std::string& geometry, double i0) {
    return from_stack(to_line_integrals(to_projection(raw, parse<ScanGeometry>(geometry), ProjectionKind::raw_intensity, i0)));
  });
  m.def("analytic_line_integrals", [](const std::string& phantom, const std::string& geometry) {
    return from_stack(analytic_line_integrals(phantom_from_json(json::parse(phantom)), parse<ScanGeometry>(geometry)));
  });
  m.def("metal_trace", [](const std::string& phantom, const std::string& geometry) {
    return from_stack(metal_trace_stack(phantom_from_json(json::parse(phantom)), parse<ScanGeometry>(geometry)));
  });
  m.def("metal_mask_3d", [](const std::string& phantom, const std::string& grid) {
    return from_volume(metal_mask_3d(phantom_from_json(json::parse(phantom)), parse<GridSpec>(grid)));
  });

  m.def("fdk", [](const In<double>& li, const std::string& geometry, const std::string& grid) {
    const ProjectionStack p = to_projection(li, parse<ScanGeometry>(geometry), ProjectionKind::line_integral);
    const GridSpec g = parse<GridSpec>(grid);
    Volume v;
    {
      py::gil_scoped_release release;
      v = fdk_reconstruct(p, g);
    }
    return from_volume(v);
  }, "FDK reconstruction in 1/mm");
  m.def("to_hounsfield", [](const In<double>& mu, double mu_water) {
    py::array_t<double> out(mu.request().shape);
    for (py::ssize_t n = 0; n < mu.size(); ++n) out.mutable_data()[n] = 1000.0 * (mu.data()[n] - mu_water) / mu_water;
    return out;
  }, py::arg("mu"), py::arg("mu_water") = kMuWater);

  m.def("heuristic_segment", [](const In<double>& li, const std::string& geometry, const std::string& params) {
    const ProjectionStack p = to_projection(li, parse<ScanGeometry>(geometry), ProjectionKind::line_integral);
    return from_stack(heuristic_segment(p, parse<HeuristicParams>(params)));
  });
  m.def("perturb_masks", [](const In<std::uint8_t>& masks, const std::string& geometry, const std::string& spec) {
    return from_stack(perturb_masks(to_stack<MaskStack>(masks, parse<ScanGeometry>(geometry)), parse<PerturbationSpec>(spec)));
  });

  m.def(
      "accumulate_hits",
      [](const In<std::uint8_t>& masks, const std::string& geometry, const std::string& grid) {
        const HitVolumes h = accumulate_hits(to_stack<MaskStack>(masks, parse<ScanGeometry>(geometry)), parse<GridSpec>(grid));
        VoxelGrid<std::uint16_t> hits(h.grid), max_hits(h.grid);
        hits.data = h.hits;
        max_hits.data = h.max_hits;
        return py::make_tuple(from_volume(hits), from_volume(max_hits));
      },
      "Per-voxel (hits, max_hits) counts on the given grid");
  m.def(
      "consistency_filter",
      [](const In<std::uint8_t>& masks, const std::string& geometry, const std::string& grid, double tau,
         int min_support) {
        const MaskStack ms = to_stack<MaskStack>(masks, parse<ScanGeometry>(geometry));
        const ConsistencyResult r = consistency_filter(ms, parse<GridSpec>(grid), tau, min_support);
        return py::make_tuple(from_stack(r.masks), from_volume(r.envelope));
      },
      py::arg("masks"), py::arg("geometry"), py::arg("grid"), py::arg("tau") = 0.96, py::arg("min_support") = -1);
  m.def(
      "threshold_segment_3d",
      [](const In<double>& hu, const std::string& grid, double threshold, int min_size) {
        return from_volume(threshold_segment_3d(to_volume(hu, parse<GridSpec>(grid), ValueUnit::hounsfield), threshold, min_size));
      },
      py::arg("hu"), py::arg("grid"), py::arg("threshold_hu") = 3000.0, py::arg("min_component_size") = 10);

  m.def(
      "masked_psnr",
      [](const In<double>& test, const In<double>& ref, const In<std::uint8_t>& mask, const std::string& grid,
         double data_range) {
        const GridSpec g = parse<GridSpec>(grid);
        return report_dict(masked_psnr(to_volume(test, g, ValueUnit::hounsfield), to_volume(ref, g, ValueUnit::hounsfield),
                                       to_volume(mask, g, ValueUnit::mask), data_range));
      },
      py::arg("test"), py::arg("reference"), py::arg("mask"), py::arg("grid"), py::arg("data_range") = 4096.0);
  m.def(
      "masked_ssim",
      [](const In<double>& test, const In<double>& ref, const In<std::uint8_t>& mask, const std::string& grid,
         double data_range) {
        const GridSpec g = parse<GridSpec>(grid);
        SsimParams p;
        p.data_range = data_range;
        return report_dict(masked_ssim(to_volume(test, g, ValueUnit::hounsfield), to_volume(ref, g, ValueUnit::hounsfield),
                                       to_volume(mask, g, ValueUnit::mask), p));
      },
      py::arg("test"), py::arg("reference"), py::arg("mask"), py::arg("grid"), py::arg("data_range") = 4096.0);
  m.def("mask_prf", [](const In<std::uint8_t>& pred, const In<std::uint8_t>& truth) {
    require(pred.size() == truth.size(), ErrorCode::contract, "mask sizes differ");
    std::size_t tp = 0, fp = 0, fn = 0;
    for (py::ssize_t n = 0; n < pred.size(); ++n) {
      const bool p = pred.data()[n] != 0, t = truth.data()[n] != 0;
      tp += p && t;
      fp += p && !t;
      fn += !p && t;
    }
    const double precision = tp + fp ? static_cast<double>(tp) / (tp + fp) : 0.0;
    const double recall = tp + fn ? static_cast<double>(tp) / (tp + fn) : 0.0;
    const double f = precision + recall > 0.0 ? 2 * precision * recall / (precision + recall) : 0.0;
    return py::make_tuple(precision, recall, f);
  });
  m.def("roc_auc", [](const In<double>& scores, const In<std::uint8_t>& labels) {
    require(scores.size() == labels.size(), ErrorCode::contract, "score and label sizes differ");
    return roc_auc(std::span<const double>(scores.data(), scores.size()),
                   std::span<const std::uint8_t>(labels.data(), labels.size()));
  });

  m.def(
      "run_experiment",
      [](const std::string& config) {
        const ExperimentConfig cfg = parse_config(json::parse(config));
        ExperimentResult r;
        {
          py::gil_scoped_release release;
          r = run_experiment(cfg);
        }
        py::dict out;
        out["summary"] = evaluation_summary(r.metrics, {r.comparison}).dump();
        out["label"] = from_volume(r.label);
        out["nomar"] = from_volume(r.context.uncorrected);
        out["standard"] = from_volume(r.standard.volume);
        out["modified"] = from_volume(r.modified.volume);
        out["joint_mask"] = from_volume(r.joint);
        out["threshold_mask"] = from_volume(r.context.threshold_mask);
        return out;
      },
      "simulate, both MAR variants and evaluation in memory");
}
