// Python bindings for the psdl core: numpy-facing wrappers over the stack,
// normal-field and solver types plus the noise/metrics/patch operations.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "psdl/experiment.hpp"
#include "psdl/io.hpp"
#include "psdl/metrics.hpp"
#include "psdl/noise.hpp"
#include "psdl/patch.hpp"
#include "psdl/solvers.hpp"

namespace py = pybind11;
using namespace psdl;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

LightSet lights_from_array(const Array& a) {
  if (a.ndim() != 2 || a.shape(1) != 3) {
    throw ContractError("lights: expected an (d, 3) array");
  }
  const auto r = a.unchecked<2>();
  Eigen::Matrix3Xd dirs(3, a.shape(0));
  for (py::ssize_t k = 0; k < a.shape(0); ++k)
    dirs.col(k) = Eigen::Vector3d(r(k, 0), r(k, 1), r(k, 2));
  return LightSet::normalized(std::move(dirs));
}

py::array_t<double> lights_to_array(const LightSet& lights) {
  py::array_t<double> out({static_cast<py::ssize_t>(lights.count()), py::ssize_t(3)});
  auto w = out.mutable_unchecked<2>();
  for (int k = 0; k < lights.count(); ++k) {
    const Eigen::Vector3d l = lights.direction(k);
    w(k, 0) = l.x();
    w(k, 1) = l.y();
    w(k, 2) = l.z();
  }
  return out;
}

ImageStack stack_from_array(const Array& a, const LightSet& lights) {
  if (a.ndim() != 3) throw ContractError("stack: expected an (m1, m2, d) array");
  const auto r = a.unchecked<3>();
  const int m1 = static_cast<int>(a.shape(0));
  const int m2 = static_cast<int>(a.shape(1));
  const int d = static_cast<int>(a.shape(2));
  Eigen::MatrixXd y(static_cast<Eigen::Index>(m1) * m2, d);
  for (int x = 0; x < m1; ++x)
    for (int yy = 0; yy < m2; ++yy)
      for (int k = 0; k < d; ++k) y(pixel_index(x, yy, m2), k) = r(x, yy, k);
  return ImageStack(m1, m2, std::move(y), lights);
}

py::array_t<double> stack_to_array(const ImageStack& stack) {
  py::array_t<double> out({static_cast<py::ssize_t>(stack.rows()),
                           static_cast<py::ssize_t>(stack.cols()),
                           static_cast<py::ssize_t>(stack.image_count())});
  auto w = out.mutable_unchecked<3>();
  for (int x = 0; x < stack.rows(); ++x)
    for (int yy = 0; yy < stack.cols(); ++yy)
      for (int k = 0; k < stack.image_count(); ++k)
        w(x, yy, k) = stack.matrix()(pixel_index(x, yy, stack.cols()), k);
  return out;
}

NormalField normals_from_array(const Array& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) {
    throw ContractError("normals: expected an (m1, m2, 3) array");
  }
  const auto r = a.unchecked<3>();
  const int m1 = static_cast<int>(a.shape(0));
  const int m2 = static_cast<int>(a.shape(1));
  Eigen::MatrixXd n(static_cast<Eigen::Index>(m1) * m2, 3);
  for (int x = 0; x < m1; ++x)
    for (int yy = 0; yy < m2; ++yy)
      for (int c = 0; c < 3; ++c) n(pixel_index(x, yy, m2), c) = r(x, yy, c);
  return NormalField(m1, m2, std::move(n));
}

py::array_t<double> normals_to_array(const NormalField& field) {
  py::array_t<double> out({static_cast<py::ssize_t>(field.rows()),
                           static_cast<py::ssize_t>(field.cols()), py::ssize_t(3)});
  auto w = out.mutable_unchecked<3>();
  for (int x = 0; x < field.rows(); ++x)
    for (int yy = 0; yy < field.cols(); ++yy)
      for (int c = 0; c < 3; ++c)
        w(x, yy, c) = field.matrix()(pixel_index(x, yy, field.cols()), c);
  return out;
}

Mask mask_from_array(const py::array& a, int m1, int m2) {
  const auto arr = py::array_t<bool, py::array::c_style | py::array::forcecast>(a);
  if (arr.ndim() != 2 || arr.shape(0) != m1 || arr.shape(1) != m2) {
    throw ContractError("mask: expected an (m1, m2) boolean array matching the stack");
  }
  const auto r = arr.unchecked<2>();
  std::vector<std::uint8_t> inside(static_cast<std::size_t>(m1) * m2);
  for (int x = 0; x < m1; ++x)
    for (int yy = 0; yy < m2; ++yy) inside[pixel_index(x, yy, m2)] = r(x, yy) ? 1 : 0;
  return Mask(m1, m2, std::move(inside));
}

py::array_t<bool> mask_to_array(const Mask& mask) {
  py::array_t<bool> out({static_cast<py::ssize_t>(mask.rows()),
                         static_cast<py::ssize_t>(mask.cols())});
  auto w = out.mutable_unchecked<2>();
  for (int x = 0; x < mask.rows(); ++x)
    for (int yy = 0; yy < mask.cols(); ++yy) w(x, yy) = mask.at(x, yy);
  return out;
}

Volume volume_from_array(const Array& a) {
  if (a.ndim() != 3) throw ContractError("volume: expected an (m1, m2, depth) array");
  const auto r = a.unchecked<3>();
  Volume v(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)),
           static_cast<int>(a.shape(2)));
  for (int x = 0; x < v.m1(); ++x)
    for (int yy = 0; yy < v.m2(); ++yy)
      for (int z = 0; z < v.depth(); ++z) v.at(x, yy, z) = r(x, yy, z);
  return v;
}

py::array_t<double> volume_to_array(const Volume& v) {
  py::array_t<double> out({static_cast<py::ssize_t>(v.m1()),
                           static_cast<py::ssize_t>(v.m2()),
                           static_cast<py::ssize_t>(v.depth())});
  auto w = out.mutable_unchecked<3>();
  for (int x = 0; x < v.m1(); ++x)
    for (int yy = 0; yy < v.m2(); ++yy)
      for (int z = 0; z < v.depth(); ++z) w(x, yy, z) = v.at(x, yy, z);
  return out;
}

py::array_t<double> map_to_array(const Eigen::VectorXd& map, int m1, int m2) {
  py::array_t<double> out({static_cast<py::ssize_t>(m1), static_cast<py::ssize_t>(m2)});
  auto w = out.mutable_unchecked<2>();
  for (int x = 0; x < m1; ++x)
    for (int yy = 0; yy < m2; ++yy) w(x, yy) = map[pixel_index(x, yy, m2)];
  return out;
}

PatchGeometry geometry_from_tuples(const std::vector<int>& patch,
                                   const std::vector<int>& stride, int m1, int m2,
                                   int depth) {
  if (patch.size() != 3 || stride.size() != 3) {
    throw ContractError("patch/stride: expected 3 extents");
  }
  return PatchGeometry({patch[0], patch[1], patch[2]}, {stride[0], stride[1], stride[2]},
                       m1, m2, depth);
}

}  // namespace

PYBIND11_MODULE(_psdl, m) {
  m.doc() = "photometric stereo with adaptive dictionary learning";

  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
  py::register_exception<IllPosedError>(m, "IllPosedError", PyExc_RuntimeError);
  py::register_exception<CalibrationError>(m, "CalibrationError", PyExc_RuntimeError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  py::class_<LightSet>(m, "LightSet")
      .def(py::init(&lights_from_array), py::arg("directions"),
           "unit directions, one row per image; renormalized on construction")
      .def_property_readonly("directions", &lights_to_array)
      .def("__len__", &LightSet::count);

  py::class_<ImageStack>(m, "ImageStack")
      .def(py::init(&stack_from_array), py::arg("images"), py::arg("lights"),
           "images as an (m1, m2, d) array of nonnegative intensities")
      .def_property_readonly("array", &stack_to_array)
      .def_property_readonly("lights", &ImageStack::lights)
      .def_property_readonly("shape",
                             [](const ImageStack& s) {
                               return py::make_tuple(s.rows(), s.cols(), s.image_count());
                             })
      .def("subset", &ImageStack::subset, py::arg("indices"));

  py::class_<Mask>(m, "Mask")
      .def(py::init([](const py::array& a) {
             const auto arr =
                 py::array_t<bool, py::array::c_style | py::array::forcecast>(a);
             return mask_from_array(a, static_cast<int>(arr.shape(0)),
                                    static_cast<int>(arr.shape(1)));
           }),
           py::arg("inside"))
      .def_property_readonly("array", &mask_to_array)
      .def_property_readonly("count", &Mask::count);

  py::class_<NormalField>(m, "NormalField")
      .def(py::init(&normals_from_array), py::arg("normals"))
      .def_property_readonly("array", &normals_to_array)
      .def("unit",
           [](const NormalField& f) { return normalize_rows(f).unit; })
      .def("albedo", [](const NormalField& f) {
        const RowNormalization rn = normalize_rows(f);
        return map_to_array(rn.albedo, f.rows(), f.cols());
      });

  py::class_<DictLearnConfig>(m, "DictLearnConfig")
      .def(py::init<>())
      .def_readwrite("atom_count", &DictLearnConfig::atom_count)
      .def_readwrite("mu", &DictLearnConfig::mu)
      .def_readwrite("code_bound", &DictLearnConfig::code_bound)
      .def_readwrite("inner_iterations", &DictLearnConfig::inner_iterations)
      .def_readwrite("seed", &DictLearnConfig::seed);

  py::class_<SolverConfig>(m, "SolverConfig")
      .def(py::init<>())
      .def_readwrite("lambda_", &SolverConfig::lambda)
      .def_readwrite("dict", &SolverConfig::dict)
      .def_property(
          "patch",
          [](const SolverConfig& c) { return py::make_tuple(c.patch.x, c.patch.y, c.patch.z); },
          [](SolverConfig& c, const std::vector<int>& v) {
            if (v.size() != 3) throw ContractError("patch: expected 3 extents");
            c.patch = {v[0], v[1], v[2]};
          })
      .def_property(
          "stride",
          [](const SolverConfig& c) {
            return py::make_tuple(c.stride.x, c.stride.y, c.stride.z);
          },
          [](SolverConfig& c, const std::vector<int>& v) {
            if (v.size() != 3) throw ContractError("stride: expected 3 extents");
            c.stride = {v[0], v[1], v[2]};
          })
      .def_readwrite("outer_iterations", &SolverConfig::outer_iterations)
      .def_readwrite("prox_steps", &SolverConfig::prox_steps)
      .def_readwrite("tau", &SolverConfig::tau)
      .def_readwrite("tolerance", &SolverConfig::tolerance);

  py::class_<SolveReport>(m, "SolveReport")
      .def_readonly("method", &SolveReport::method)
      .def_readonly("objective_trace", &SolveReport::objective_trace)
      .def_readonly("final_relative_change", &SolveReport::final_relative_change)
      .def_readonly("outer_iterations_run", &SolveReport::outer_iterations_run)
      .def_readonly("tau_used", &SolveReport::tau_used)
      .def_readonly("warnings", &SolveReport::warnings)
      .def_readonly("config", &SolveReport::config_echo);

  m.def("least_squares", &least_squares, py::arg("stack"),
        "closed-form normals Y L^+; raises IllPosedError on rank-deficient lights");
  m.def(
      "dlpi",
      [](const ImageStack& s, const SolverConfig& c) { return dlpi(s, c); },
      py::arg("stack"), py::arg("config"),
      "dictionary-learning preprocessing followed by least squares");
  m.def(
      "dlpi_preprocess",
      [](const ImageStack& s, const SolverConfig& c) { return dlpi_preprocess(s, c); },
      py::arg("stack"), py::arg("config"));
  m.def(
      "dlnv",
      [](const ImageStack& s, const SolverConfig& c) { return dlnv(s, c); },
      py::arg("stack"), py::arg("config"),
      "dictionary-regularized normal estimation; rows of the result are unit normals");

  m.def(
      "apply_poisson",
      [](const ImageStack& s, double snr_db, std::uint64_t seed, int realization,
         const std::optional<Mask>& mask) {
        return apply_poisson(s, NoiseSpec{snr_db, seed, realization},
                             mask ? &*mask : nullptr);
      },
      py::arg("stack"), py::arg("snr_db"), py::arg("seed") = 0, py::arg("realization") = 0,
      py::arg("mask") = std::nullopt);
  m.def(
      "calibrate_scale",
      [](const ImageStack& s, double snr_db, const std::optional<Mask>& mask) {
        return calibrate_scale(s, snr_db, mask ? &*mask : nullptr);
      },
      py::arg("stack"), py::arg("snr_db"), py::arg("mask") = std::nullopt);
  m.def(
      "empirical_snr_db",
      [](const ImageStack& clean, const ImageStack& noisy, const std::optional<Mask>& mask) {
        return empirical_snr_db(clean, noisy, mask ? &*mask : nullptr);
      },
      py::arg("clean"), py::arg("noisy"), py::arg("mask") = std::nullopt);

  m.def(
      "angular_error_map",
      [](const NormalField& est, const NormalField& truth, const Mask& mask) {
        return map_to_array(angular_error_map(est, truth, mask), est.rows(), est.cols());
      },
      py::arg("estimate"), py::arg("truth"), py::arg("mask"),
      "per-pixel angle in degrees; NaN outside the mask");
  m.def(
      "mean_angular_error",
      [](const Array& map, const Mask& mask) {
        if (map.ndim() != 2) throw ContractError("error map: expected an (m1, m2) array");
        const auto r = map.unchecked<2>();
        Eigen::VectorXd flat(map.shape(0) * map.shape(1));
        for (py::ssize_t x = 0; x < map.shape(0); ++x)
          for (py::ssize_t yy = 0; yy < map.shape(1); ++yy)
            flat[pixel_index(static_cast<int>(x), static_cast<int>(yy),
                             static_cast<int>(map.shape(1)))] = r(x, yy);
        return mean_angular_error(flat, mask);
      },
      py::arg("error_map"), py::arg("mask"));

  m.def(
      "extract_patches",
      [](const Array& volume, const std::vector<int>& patch, const std::vector<int>& stride) {
        const Volume v = volume_from_array(volume);
        const PatchGeometry g = geometry_from_tuples(patch, stride, v.m1(), v.m2(), v.depth());
        const Eigen::MatrixXd p = extract_patches(v, g);
        py::array_t<double> out({static_cast<py::ssize_t>(p.rows()),
                                 static_cast<py::ssize_t>(p.cols())});
        auto w = out.mutable_unchecked<2>();
        for (Eigen::Index i = 0; i < p.rows(); ++i)
          for (Eigen::Index j = 0; j < p.cols(); ++j) w(i, j) = p(i, j);
        return out;
      },
      py::arg("volume"), py::arg("patch"), py::arg("stride"));
  m.def(
      "adjoint_patches",
      [](const Array& patches, const std::vector<int>& patch, const std::vector<int>& stride,
         const std::vector<int>& volume_shape) {
        if (volume_shape.size() != 3) throw ContractError("volume_shape: expected 3 dims");
        const PatchGeometry g = geometry_from_tuples(patch, stride, volume_shape[0],
                                                     volume_shape[1], volume_shape[2]);
        const auto r = patches.unchecked<2>();
        Eigen::MatrixXd p(patches.shape(0), patches.shape(1));
        for (py::ssize_t i = 0; i < patches.shape(0); ++i)
          for (py::ssize_t j = 0; j < patches.shape(1); ++j) p(i, j) = r(i, j);
        return volume_to_array(adjoint_patches(p, g));
      },
      py::arg("patches"), py::arg("patch"), py::arg("stride"), py::arg("volume_shape"));
  m.def(
      "gram_diagonal",
      [](const std::vector<int>& patch, const std::vector<int>& stride,
         const std::vector<int>& volume_shape) {
        if (volume_shape.size() != 3) throw ContractError("volume_shape: expected 3 dims");
        const PatchGeometry g = geometry_from_tuples(patch, stride, volume_shape[0],
                                                     volume_shape[1], volume_shape[2]);
        return volume_to_array(
            Volume(g.m1(), g.m2(), g.depth(), gram_diagonal(g)));
      },
      py::arg("patch"), py::arg("stride"), py::arg("volume_shape"));

  m.def(
      "generate_sphere",
      [](int resolution, const LightSet& lights, const std::string& albedo, double radius) {
        const Dataset ds = generate_sphere(
            resolution, lights,
            albedo == "rings" ? AlbedoPattern::kRings : AlbedoPattern::kUniform, radius);
        py::dict out;
        out["stack"] = ds.stack;
        out["mask"] = ds.mask;
        out["truth"] = *ds.truth;
        out["clamped_shadow_count"] = ds.clamped_shadow_count;
        return out;
      },
      py::arg("resolution"), py::arg("lights"), py::arg("albedo") = "uniform",
      py::arg("radius") = 1.0);
  m.def("well_spread_lights", &well_spread_lights, py::arg("count"),
        py::arg("max_tilt_deg"), py::arg("seed") = 0);
  m.def(
      "load_dataset",
      [](const std::string& root, bool apply_light_intensities) {
        LoadOptions opt;
        opt.apply_light_intensities = apply_light_intensities;
        const Dataset ds = load_dataset(root, opt);
        py::dict out;
        out["stack"] = ds.stack;
        out["mask"] = ds.mask;
        if (ds.truth) out["truth"] = *ds.truth;
        out["name"] = ds.name;
        out["warnings"] = ds.warnings;
        return out;
      },
      py::arg("root"), py::arg("apply_light_intensities") = false);
  m.def("select_light_subset", &select_light_subset, py::arg("lights"), py::arg("count"),
        py::arg("seed") = 0);
}
