#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "magspec/comparison.hpp"
#include "magspec/experiments.hpp"
#include "magspec/fiber.hpp"
#include "magspec/hamiltonian.hpp"
#include "magspec/lanczos.hpp"
#include "magspec/quasimode.hpp"

namespace py = pybind11;
using namespace magspec;

namespace {

py::dict spectrum_dict(const SpectrumResult& r) {
  py::dict d;
  d["eigenvalues"] = r.eigenvalues;
  d["residuals"] = r.residual_norms;
  d["iterations"] = r.iterations;
  d["converged"] = r.converged;
  d["shift"] = r.shift;
  return d;
}

py::tuple csr_arrays(const SparseHermitian& H) {
  py::array_t<std::int64_t> indptr(static_cast<py::ssize_t>(H.row_ptr.size()));
  py::array_t<std::int32_t> indices(static_cast<py::ssize_t>(H.col.size()));
  py::array_t<std::complex<double>> data(static_cast<py::ssize_t>(H.val.size()));
  auto ip = indptr.mutable_unchecked<1>();
  auto ix = indices.mutable_unchecked<1>();
  auto dv = data.mutable_unchecked<1>();
  for (std::size_t i = 0; i < H.row_ptr.size(); ++i) ip(static_cast<py::ssize_t>(i)) = static_cast<std::int64_t>(H.row_ptr[i]);
  for (std::size_t i = 0; i < H.col.size(); ++i) {
    ix(static_cast<py::ssize_t>(i)) = static_cast<std::int32_t>(H.col[i]);
    dv(static_cast<py::ssize_t>(i)) = H.val[i];
  }
  return py::make_tuple(data, indices, indptr, H.n);
}

}  // namespace

PYBIND11_MODULE(_magspec, m) {
  m.doc() = "Spectral solvers for magnetic Schroedinger operators with a line interaction";

  py::register_exception<Error>(m, "MagspecError");
  m.def("exit_code_for_message", [](const std::string& message) {
    for (int c = 0; c <= static_cast<int>(ErrorCode::IoError); ++c) {
      const auto code = static_cast<ErrorCode>(c);
      const std::string prefix = std::string(to_string(code)) + ":";
      if (message.rfind(prefix, 0) == 0) return exit_code_for(code);
    }
    return 4;
  });

  py::enum_<ModelKind>(m, "ModelKind").value("DeltaLine", ModelKind::DeltaLine).value("RegularV", ModelKind::RegularV);
  py::enum_<BoundaryCondition>(m, "BoundaryCondition")
      .value("Dirichlet", BoundaryCondition::Dirichlet)
      .value("Neumann", BoundaryCondition::Neumann);
  py::enum_<DiscretizationScheme>(m, "DiscretizationScheme")
      .value("Peierls", DiscretizationScheme::Peierls)
      .value("DirectCentral", DiscretizationScheme::DirectCentral);

  py::class_<PotentialSpec>(m, "PotentialSpec")
      .def_static("square_well", &PotentialSpec::square_well, py::arg("half_width"), py::arg("height") = 1.0,
                  py::arg("ramp") = 1e-3)
      .def("__call__", &PotentialSpec::operator())
      .def_property_readonly("s0", &PotentialSpec::s0)
      .def("integral", &PotentialSpec::integral);

  py::class_<ModelParams>(m, "ModelParams")
      .def(py::init([](double omega, double b_field, double lambda_, ModelKind kind,
                       std::optional<PotentialSpec> potential) {
             return ModelParams{omega, b_field, lambda_, kind, std::move(potential)};
           }),
           py::arg("omega") = 1.0, py::arg("b_field") = 1.0, py::arg("lambda_") = -1.0,
           py::arg("kind") = ModelKind::DeltaLine, py::arg("potential") = std::nullopt)
      .def_readwrite("omega", &ModelParams::omega)
      .def_readwrite("b_field", &ModelParams::b_field)
      .def_readwrite("lambda_", &ModelParams::lambda)
      .def_readwrite("kind", &ModelParams::kind)
      .def_readwrite("potential", &ModelParams::potential)
      .def("transverse_frequency", &ModelParams::transverse_frequency);

  py::class_<Grid2D>(m, "Grid2D")
      .def_static("make", &Grid2D::make, py::arg("lx"), py::arg("ly"), py::arg("nx"), py::arg("ny"),
                  py::arg("bc") = BoundaryCondition::Dirichlet, py::arg("x_center") = 0.0,
                  py::arg("y_center") = 0.0)
      .def_static("with_spacing", &Grid2D::with_spacing, py::arg("lx"), py::arg("ly"), py::arg("hx"),
                  py::arg("hy"), py::arg("bc") = BoundaryCondition::Dirichlet, py::arg("x_center") = 0.0,
                  py::arg("y_center") = 0.0)
      .def_readonly("nx", &Grid2D::nx)
      .def_readonly("ny", &Grid2D::ny)
      .def_readonly("hx", &Grid2D::hx)
      .def_readonly("hy", &Grid2D::hy)
      .def("size", &Grid2D::size);

  m.def("exact_inf_L", &exact_inf_L, py::arg("omega"), py::arg("lambda_"));
  m.def("critical_lambda", [](double omega, const PotentialSpec& V) { return critical_lambda(omega, V); },
        py::arg("omega"), py::arg("potential"));
  m.def("square_well_critical_oracle", &square_well_critical_oracle, py::arg("omega"),
        py::arg("half_width"), py::arg("height") = 1.0);
  m.def("discrete_threshold", &discrete_threshold, py::arg("params"), py::arg("h") = 0.05);

  m.def(
      "assemble_csr",
      [](const ModelParams& p, const Grid2D& g, DiscretizationScheme scheme) {
        return csr_arrays(assemble(p, g, scheme));
      },
      py::arg("params"), py::arg("grid"), py::arg("scheme") = DiscretizationScheme::Peierls,
      "(data, indices, indptr, n) of the assembled Hermitian matrix");

  m.def(
      "lowest_eigenvalues",
      [](const ModelParams& p, const Grid2D& g, std::size_t k, double tol, std::uint64_t seed,
         DiscretizationScheme scheme) {
        SolvePolicy pol;
        pol.lanczos.k = k;
        pol.lanczos.tol = tol;
        pol.lanczos.seed = seed;
        SpectrumResult r;
        {
          py::gil_scoped_release release;
          r = solve_lowest(assemble(p, g, scheme), pol);
        }
        return spectrum_dict(r);
      },
      py::arg("params"), py::arg("grid"), py::arg("k") = 4, py::arg("tol") = 1e-8, py::arg("seed") = 1,
      py::arg("scheme") = DiscretizationScheme::Peierls);

  m.def(
      "band_scan",
      [](const ModelParams& p, double n, std::size_t n_xi, double h) {
        const BandFunction b = band_scan(p, n, default_xi_range(p, n), n_xi, h);
        py::dict d;
        d["xi"] = b.xi_samples;
        d["band_min"] = b.band_min;
        d["minimum"] = b.minimum;
        d["argmin"] = b.argmin;
        return d;
      },
      py::arg("params"), py::arg("n"), py::arg("n_xi") = 201, py::arg("h") = 0.05);

  m.def("classify", [](const std::vector<double>& e, double threshold) {
    return std::string(to_string(classify(e, threshold)));
  }, py::arg("ground_by_height"), py::arg("threshold"));

  m.def(
      "run_command",
      [](const std::string& command, const std::string& config_text, const std::filesystem::path& out) {
        const auto c = parse_command(command);
        if (!c) throw Error(ErrorCode::ConfigError, "unknown command '" + command + "'");
        const RunConfig cfg = RunConfig::parse(config_text);
        py::gil_scoped_release release;
        run_command(*c, cfg, out);
      },
      py::arg("command"), py::arg("config_text"), py::arg("out"));

  m.def("resolved_config", [](const std::string& text) {
    return RunConfig::parse(text).values();
  }, py::arg("config_text"));
}
