#include "voxens/export.hpp"
#include "voxens/pipeline.hpp"
#include "voxens/postprocess.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace voxens;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vector(const Array& a) { return {a.data(), a.data() + a.size()}; }

Array vector_array(std::size_t n) { return Array(std::vector<py::ssize_t>{static_cast<py::ssize_t>(n)}); }

Array from_vector(const std::vector<double>& v) {
  Array a = vector_array(v.size());
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

ImageBuffer image_from_array(const Array& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw py::value_error("image must have shape (H, W, 3)");
  ImageBuffer img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  img.pixels = to_vector(a);
  return img;
}

Array image_to_array(const ImageBuffer& img) {
  Array a({img.height, img.width, 3});
  std::copy(img.pixels.begin(), img.pixels.end(), a.mutable_data());
  return a;
}

py::object json_to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

nlohmann::json py_to_json(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

py::dict points_to_dict(const PointSet& ps) {
  py::array_t<double> pos({static_cast<py::ssize_t>(ps.size()), py::ssize_t{3}});
  Array density = vector_array(ps.size()), uncertainty = vector_array(ps.size());
  auto p = pos.mutable_unchecked<2>();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    for (int a = 0; a < 3; ++a) p(i, a) = ps[i].position[a];
    density.mutable_data()[i] = ps[i].density;
    uncertainty.mutable_data()[i] = ps[i].uncertainty;
  }
  py::dict d;
  d["position"] = pos;
  d["density"] = density;
  d["uncertainty"] = uncertainty;
  return d;
}

PointSet points_from_arrays(const Array& position, const Array& density, const Array& uncertainty) {
  const auto n = density.size();
  if (position.size() != 3 * n || uncertainty.size() != n) throw py::value_error("array lengths disagree");
  PointSet ps(static_cast<std::size_t>(n));
  for (py::ssize_t i = 0; i < n; ++i) {
    ps[i].position = Vec3(position.data()[3 * i], position.data()[3 * i + 1], position.data()[3 * i + 2]);
    ps[i].density = density.data()[i];
    ps[i].uncertainty = uncertainty.data()[i];
  }
  return ps;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Voxel radiance field ensembles with density uncertainty";

  static py::exception<Error> base_error(m, "VoxensError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      switch (e.kind()) {
        case ErrorKind::Invalid:
        case ErrorKind::Config: PyErr_SetString(PyExc_ValueError, e.what()); break;
        case ErrorKind::Io: PyErr_SetString(PyExc_OSError, e.what()); break;
        default: base_error(e.what());
      }
    }
  });

  m.def("synth",
        [](const std::string& out, const std::string& preset, const std::string& rig, int views, double radius,
           int width, int height, int gt_res) {
          SynthOptions o;
          o.preset = preset;
          o.rig = parse_rig_kind(rig);
          o.views = views;
          o.radius = radius;
          o.intrinsics.width = width;
          o.intrinsics.height = height;
          o.render.gt_res = gt_res;
          return cmd_synth(o, out).frames.size();
        },
        py::arg("out"), py::arg("preset") = "sphere", py::arg("rig") = "full_sphere", py::arg("views") = 20,
        py::arg("radius") = 1.5, py::arg("width") = 64, py::arg("height") = 64, py::arg("gt_res") = 128,
        "Render a synthetic dataset; returns the number of views.");

  m.def("default_config", [] { return json_to_py(config_to_json(RunConfig{})); });

  m.def("run",
        [](const py::dict& config, std::optional<std::string> timestamp) {
          const RunConfig cfg = config_from_json(py_to_json(config));
          MetricsReport rep;
          {
            py::gil_scoped_release release;
            rep = cmd_run(cfg, {timestamp, true});
          }
          return json_to_py(report_to_json(rep));
        },
        py::arg("config"), py::arg("timestamp") = py::none(), "Full pipeline; returns the report as a dict.");

  m.def("sweep",
        [](const py::dict& config, const std::string& axis, const std::vector<std::string>& values,
           std::optional<std::string> timestamp) {
          const RunConfig cfg = config_from_json(py_to_json(config));
          const auto rows = cmd_sweep(cfg, parse_sweep_axis(axis), values, {timestamp, true});
          py::list out;
          for (const auto& r : rows) {
            py::dict d;
            d["value"] = r.value;
            d["run_dir"] = r.run_dir;
            d["error"] = r.error;
            d["report"] = r.report ? json_to_py(report_to_json(*r.report)) : py::none();
            out.append(d);
          }
          return out;
        },
        py::arg("config"), py::arg("axis"), py::arg("values"), py::arg("timestamp") = py::none());

  m.def("read_report", [](const std::filesystem::path& p) { return json_to_py(report_to_json(read_report(p))); });

  m.def("psnr", [](const Array& a, const Array& b) { return psnr(image_from_array(a), image_from_array(b)); },
        "PSNR in dB between two (H, W, 3) images in [0, 1].");
  m.def("load_image", [](const std::filesystem::path& p) { return image_to_array(load_image(p)); });

  m.def("ensemble_stats",
        [](const std::vector<Array>& members) {
          std::vector<DensityGrid> grids;
          for (const auto& a : members) {
            DensityGrid g;
            g.values = to_vector(a);
            g.res = static_cast<int>(std::lround(std::cbrt(static_cast<double>(g.values.size()))));
            if (static_cast<std::size_t>(g.res) * g.res * g.res != g.values.size())
              throw py::value_error("member grids must hold res^3 values");
            grids.push_back(std::move(g));
          }
          const auto eg = ensemble_stats(grids);
          return py::make_tuple(from_vector(eg.mean), from_vector(eg.uncertainty));
        },
        "Per-position mean and Bessel-corrected std over member grids of res^3 values.");

  m.def("percentile", [](const Array& v, double p) { return percentile(to_vector(v), p); });

  m.def("percentile_filter",
        [](const Array& uncertainty, double p) {
          PointSet ps(static_cast<std::size_t>(uncertainty.size()));
          for (std::size_t i = 0; i < ps.size(); ++i) ps[i].uncertainty = uncertainty.data()[i];
          const double thr = percentile_filter(ps, p).threshold;
          py::array_t<bool> keep(std::vector<py::ssize_t>{uncertainty.size()});
          for (std::size_t i = 0; i < ps.size(); ++i) keep.mutable_data()[i] = ps[i].uncertainty <= thr;
          return py::make_tuple(keep, thr);
        },
        "Returns (keep mask, threshold) for the p-th percentile filter.");

  m.def("percent_of_circumference", &percent_of_circumference, py::arg("percent"), py::arg("rig_radius"));
  m.def("euler_xyz_from_matrix", &euler_xyz_from_matrix);
  m.def("matrix_from_euler_xyz", &matrix_from_euler_xyz);

  m.def("write_ply",
        [](const std::filesystem::path& path, const Array& position, const Array& density, const Array& uncertainty,
           const std::string& mode) { write_ply(points_from_arrays(position, density, uncertainty), path, parse_ply_mode(mode)); },
        py::arg("path"), py::arg("position"), py::arg("density"), py::arg("uncertainty"), py::arg("mode") = "binary_le");
  m.def("read_ply", [](const std::filesystem::path& p) { return points_to_dict(read_ply(p)); });

  m.def("load_ensemble", [](const std::filesystem::path& p) {
    const auto eg = load_ensemble(p);
    py::dict d;
    d["res"] = eg.res;
    d["members"] = eg.members;
    d["bbox_min"] = eg.bbox.min;
    d["edge"] = eg.bbox.edge;
    d["mean"] = from_vector(eg.mean);
    d["uncertainty"] = from_vector(eg.uncertainty);
    return d;
  });
}
