// Python bindings for the core operations: problem I/O, the rotation-sync
// generator, the certified staircase solver, certification, and LICQ checks.
#include "bmstair/io.hpp"
#include "bmstair/manifold.hpp"
#include "bmstair/rotation_sync.hpp"
#include "bmstair/staircase.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <optional>

namespace py = pybind11;
using namespace bmstair;

namespace {

py::object json_to_py(const Json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

/// Problem handle shared with Python: the serializable data plus the compiled
/// immutable QCQP (constraints synthesized on first use).
struct PyProblem {
  ProblemData data;
  std::shared_ptr<const QcqpProblem> compiled;

  explicit PyProblem(ProblemData d) : data(std::move(d)) {
    compiled = std::make_shared<const QcqpProblem>(make_problem(data));
  }
  const QcqpProblem& problem() const { return *compiled; }
};

StaircaseOptions build_options(Index r0, Index rmax, double tol, double eps_cert,
                               bool precond, std::uint64_t seed) {
  StaircaseOptions opts;
  opts.r0 = r0;
  opts.r_max = rmax;
  opts.eps_cert = eps_cert;
  opts.rtr.grad_tol = tol;
  opts.rtr.use_preconditioner = precond;
  opts.rtr.seed = seed;
  return opts;
}

py::dict certificate_dict(const CertificateResult& cert) {
  py::dict d;
  d["psd"] = cert.psd;
  d["multiplier_rank_deficient"] = cert.multiplier_rank_deficient;
  d["stationarity_residual"] = cert.stationarity_residual;
  d["epsilon_used"] = cert.epsilon_used;
  d["lambda"] = Vector(cert.lambda);
  if (cert.min_eig.has_value()) {
    d["min_eig"] = *cert.min_eig;
    d["min_eigvec"] = *cert.min_eigvec;
  } else {
    d["min_eig"] = py::none();
    d["min_eigvec"] = py::none();
  }
  return d;
}

}  // namespace

PYBIND11_MODULE(_bmstair, m) {
  m.doc() = "Low-rank semidefinite solver with staircase certification";

  py::register_exception<InvalidArgument>(m, "InvalidArgumentError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_RuntimeError);

  py::class_<PyProblem>(m, "Problem")
      .def_property_readonly("n", [](const PyProblem& p) { return p.data.n; })
      .def_property_readonly("k", [](const PyProblem& p) { return p.data.k; })
      .def_property_readonly("m",
                             [](const PyProblem& p) { return p.problem().num_constraints(); })
      .def_property_readonly("blocks",
                             [](const PyProblem& p) {
                               py::list out;
                               for (const Block& b : p.data.blocks)
                                 out.append(py::make_tuple(
                                     b.kind == BlockKind::Stiefel ? "stiefel" : "euclidean",
                                     b.dim));
                               return out;
                             })
      .def_property_readonly("metadata",
                             [](const PyProblem& p) { return json_to_py(p.data.metadata); })
      .def("__repr__", [](const PyProblem& p) {
        return "<bmstair.Problem n=" + std::to_string(p.data.n) +
               " k=" + std::to_string(p.data.k) +
               " m=" + std::to_string(p.problem().num_constraints()) + ">";
      });

  m.def("load_problem",
        [](const std::string& path) { return PyProblem(read_problem(path)); },
        py::arg("path"));
  m.def("save_problem",
        [](const PyProblem& p, const std::string& path) { write_problem(p.data, path); },
        py::arg("problem"), py::arg("path"));
  m.def("read_g2o",
        [](const std::string& path) { return PyProblem(read_g2o_rotations(path)); },
        py::arg("path"));

  m.def(
      "generate_rotation_sync",
      [](int num_rotations, int dim, const std::string& graph, double density,
         double noise_sigma, double weight_spread, std::uint64_t seed) {
        RotationSyncOptions opts;
        opts.num_rotations = num_rotations;
        opts.d = dim;
        opts.graph = graph_kind_from_string(graph);
        opts.density = density;
        opts.noise_sigma = noise_sigma;
        opts.weight_spread = weight_spread;
        opts.seed = seed;
        const RotationSyncInstance inst = generate_rotation_sync(opts);
        py::dict out;
        out["problem"] = PyProblem(inst.problem);
        out["ground_truth"] = inst.ground_truth;
        out["ground_truth_cost"] = inst.ground_truth_cost;
        return out;
      },
      py::arg("num_rotations"), py::arg("dim") = 3, py::arg("graph") = "cycle",
      py::arg("density") = 0.3, py::arg("noise_sigma") = 0.0,
      py::arg("weight_spread") = 1.0, py::arg("seed") = 0);

  m.def(
      "solve",
      [](const PyProblem& p, Index r0, Index rmax, double tol, double eps_cert,
         bool precondition, std::uint64_t seed, std::optional<Matrix> y0) {
        const StaircaseOptions opts =
            build_options(r0, rmax, tol, eps_cert, precondition, seed);
        const StaircaseResult res = [&] {
          py::gil_scoped_release release;
          return run_staircase(p.problem(), opts, y0);
        }();
        py::dict out =
            json_to_py(result_to_json(res, opts, !res.certificate.multiplier_rank_deficient));
        out["Y"] = res.Y_star;
        out["X_rounded"] = res.rounded.X;
        return out;
      },
      py::arg("problem"), py::arg("r0") = 0, py::arg("rmax") = 0, py::arg("tol") = 1e-8,
      py::arg("eps_cert") = 0.0, py::arg("precondition") = true, py::arg("seed") = 0,
      py::arg("y0") = py::none());

  m.def(
      "certify",
      [](const PyProblem& p, const Matrix& Y, double eps) {
        return certificate_dict(certify(p.problem(), Y, eps));
      },
      py::arg("problem"), py::arg("Y"), py::arg("eps") = 0.0);

  m.def(
      "licq_check",
      [](const PyProblem& p, const Matrix& Y, double tol) {
        const LicqReport rep = licq_check(p.problem(), Y, tol);
        py::dict d;
        d["jacobian_rank"] = rep.jacobian_rank;
        d["m"] = rep.m;
        d["holds"] = rep.holds;
        d["singular_values"] = Vector(rep.singular_values);
        d["tolerance_used"] = rep.tolerance_used;
        return d;
      },
      py::arg("problem"), py::arg("Y"), py::arg("tol") = 0.0);

  m.def(
      "objective",
      [](const PyProblem& p, const Matrix& Y) { return objective(p.problem(), Y); },
      py::arg("problem"), py::arg("Y"));

  m.def(
      "constraint_residuals",
      [](const PyProblem& p, const Matrix& Y) {
        return constraint_residuals(p.problem(), Y);
      },
      py::arg("problem"), py::arg("Y"));

  m.def(
      "random_point",
      [](const PyProblem& p, Index r, std::uint64_t seed) {
        return random_point(p.problem().spec(), r, seed);
      },
      py::arg("problem"), py::arg("r"), py::arg("seed") = 0);

  m.def(
      "round_solution",
      [](const PyProblem& p, const Matrix& Y) {
        const RoundedSolution rs = round_solution(p.problem(), Y);
        py::dict d;
        d["X"] = rs.X;
        d["f_qcqp"] = rs.f_qcqp;
        d["gap"] = rs.gap;
        d["gap_relative"] = rs.gap_relative;
        d["exact"] = rs.exact;
        return d;
      },
      py::arg("problem"), py::arg("Y"));
}
