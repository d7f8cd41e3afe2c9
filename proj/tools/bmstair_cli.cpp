// bmstair command-line interface: generate rotation-synchronization
// instances, solve them with the certified staircase, certify externally
// produced candidates, and check LICQ. Machine output is JSON on stdout or
// the -o path; diagnostics go to stderr. Exit codes: 0 success (certified /
// check passed), 2 uncertified or inconclusive, 1 error.
#include "bmstair/io.hpp"
#include "bmstair/manifold.hpp"
#include "bmstair/rotation_sync.hpp"
#include "bmstair/staircase.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

using namespace bmstair;

/// Problem files are JSON by default; a .g2o suffix selects the pose-graph
/// rotation reader.
ProblemData load_problem_file(const std::string& path) {
  if (path.size() > 4 && path.substr(path.size() - 4) == ".g2o")
    return read_g2o_rotations(path);
  return read_problem(path);
}

void emit(const Json& j, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw InvalidArgument("cannot write output file: " + out_path);
  out << j.dump(2) << "\n";
}

Json licq_report_json(const LicqReport& rep) {
  Json j;
  j["jacobian_rank"] = rep.jacobian_rank;
  j["m"] = rep.m;
  j["holds"] = rep.holds;
  j["tolerance_used"] = rep.tolerance_used;
  Json sv = Json::array();
  for (Index i = 0; i < rep.singular_values.size(); ++i)
    sv.push_back(rep.singular_values[i]);
  j["singular_values"] = std::move(sv);
  return j;
}

Json certificate_json(const CertificateResult& cert) {
  Json j;
  j["psd"] = cert.psd;
  j["multiplier_rank_deficient"] = cert.multiplier_rank_deficient;
  j["inconclusive"] = cert.multiplier_rank_deficient && !cert.psd;
  j["stationarity_residual"] = cert.stationarity_residual;
  j["epsilon_used"] = cert.epsilon_used;
  if (cert.min_eig.has_value())
    j["min_eig"] = *cert.min_eig;
  else
    j["min_eig"] = nullptr;
  Json lam = Json::array();
  for (Index i = 0; i < cert.lambda.size(); ++i) lam.push_back(cert.lambda[i]);
  j["lambda"] = std::move(lam);
  return j;
}

struct GenerateArgs {
  std::string type = "rotation-sync";
  int num = 10;
  int dim = 3;
  std::string graph = "cycle";
  double density = 0.3;
  double noise = 0.0;
  double weight_spread = 1.0;
  std::uint64_t seed = 0;
  std::string out;
  std::string g2o_out;
  std::string ground_truth_out;
};

int run_generate(const GenerateArgs& a) {
  if (a.type != "rotation-sync")
    throw InvalidArgument("unknown --type '" + a.type + "' (supported: rotation-sync)");
  RotationSyncOptions opts;
  opts.num_rotations = a.num;
  opts.d = a.dim;
  opts.graph = graph_kind_from_string(a.graph);
  opts.density = a.density;
  opts.noise_sigma = a.noise;
  opts.weight_spread = a.weight_spread;
  opts.seed = a.seed;

  const RotationSyncInstance inst = generate_rotation_sync(opts);
  if (!a.out.empty()) {
    write_problem(inst.problem, a.out);
  } else {
    emit(problem_to_json(inst.problem), "");
  }
  if (!a.g2o_out.empty()) write_g2o(inst, a.g2o_out);
  if (!a.ground_truth_out.empty()) write_factor_csv(inst.ground_truth, a.ground_truth_out);

  std::cerr << "generated " << a.num << " rotations (d=" << a.dim << ", "
            << a.graph << "), " << inst.measurements.size()
            << " edges, ground-truth cost " << inst.ground_truth_cost << "\n";
  return 0;
}

struct SolveArgs {
  std::string problem_path;
  Index r0 = 0;
  Index rmax = 0;
  double tol = 1e-8;
  double eps_cert = 0.0;
  std::string precond = "auto";
  std::uint64_t seed = 0;
  bool deterministic = false;
  std::string out;
  std::string dump_solution;
  std::string y0_path;
};

int run_solve(const SolveArgs& a) {
  if (a.deterministic) set_thread_cap(1);

  const ProblemData data = load_problem_file(a.problem_path);
  if (a.rmax > 0 && a.rmax < data.k)
    throw InvalidArgument("--rmax must be at least the problem rank k = " +
                          std::to_string(data.k));
  QcqpProblem p = make_problem(data);

  StaircaseOptions opts;
  opts.r0 = a.r0;
  opts.r_max = a.rmax;
  opts.eps_cert = a.eps_cert;
  opts.rtr.grad_tol = a.tol;
  opts.rtr.seed = a.seed;
  if (a.precond == "off")
    opts.rtr.use_preconditioner = false;
  else if (a.precond == "on" || a.precond == "auto")
    opts.rtr.use_preconditioner = true;
  else
    throw InvalidArgument("--precond must be one of on|off|auto");

  std::optional<Matrix> Y0;
  if (!a.y0_path.empty()) Y0 = read_factor_csv(a.y0_path);

  const StaircaseResult res = run_staircase(p, opts, Y0);
  const bool licq_holds = !res.certificate.multiplier_rank_deficient;
  emit(result_to_json(res, opts, licq_holds), a.out);
  if (!a.dump_solution.empty()) write_factor_csv(res.Y_star, a.dump_solution);

  std::cerr << (res.certified ? "certified" : "NOT certified") << ": f_bm = " << res.f_bm
            << ", rounded gap = " << res.rounded.gap << " (" << res.stop_reason << ")\n";
  if (res.certificate.multiplier_rank_deficient && !res.certified)
    std::cerr << "warning: multipliers are not unique (LICQ fails at the solution); "
                 "the failed certificate is inconclusive\n";
  return res.certified ? 0 : 2;
}

struct CertifyArgs {
  std::string problem_path;
  std::string point_path;
  double eps = 0.0;
  std::string out;
};

int run_certify(const CertifyArgs& a) {
  const ProblemData data = load_problem_file(a.problem_path);
  QcqpProblem p = make_problem(data);
  const Matrix Y = read_factor_csv(a.point_path);

  const Scalar feas = feasibility_error(p.spec(), Y);
  if (feas > 1e-6)
    std::cerr << "warning: point is infeasible (block error " << feas
              << "); certification assumes feasibility\n";
  const Scalar grad_norm = rgrad(p, Y).norm();
  if (grad_norm > 1e-5 * std::max(1.0, std::abs(objective(p, Y))))
    std::cerr << "warning: point is far from stationary (|rgrad| = " << grad_norm
              << "); multipliers may be meaningless\n";

  const CertificateResult cert = certify(p, Y, a.eps);
  emit(certificate_json(cert), a.out);
  std::cerr << (cert.psd ? "certificate is PSD: candidate is globally optimal"
                         : "certificate is not PSD")
            << "\n";
  return cert.psd ? 0 : 2;
}

struct LicqArgs {
  std::string problem_path;
  std::string point_path;
  int samples = 0;
  std::uint64_t seed = 0;
  double tol = 0.0;
  std::string out;
};

int run_check_licq(const LicqArgs& a) {
  const ProblemData data = load_problem_file(a.problem_path);
  QcqpProblem p = make_problem(data);

  if (!a.point_path.empty()) {
    const Matrix Y = read_factor_csv(a.point_path);
    const Scalar feas = feasibility_error(p.spec(), Y);
    if (feas > 1e-6)
      std::cerr << "warning: point is infeasible (block error " << feas << ")\n";
    const LicqReport rep = licq_check(p, Y, a.tol);
    emit(licq_report_json(rep), a.out);
    std::cerr << "LICQ " << (rep.holds ? "holds" : "FAILS") << " at the given point (rank "
              << rep.jacobian_rank << " of " << rep.m << ")\n";
    return rep.holds ? 0 : 2;
  }

  const int samples = a.samples > 0 ? a.samples : 20;
  Json all = Json::array();
  bool holds = true;
  for (int s = 0; s < samples; ++s) {
    const Matrix Y = random_point(p.spec(), p.intrinsic_rank(), a.seed + static_cast<std::uint64_t>(s));
    const LicqReport rep = licq_check(p, Y, a.tol);
    holds = holds && rep.holds;
    all.push_back(licq_report_json(rep));
  }
  Json j;
  j["samples"] = samples;
  j["all_hold"] = holds;
  j["reports"] = std::move(all);
  emit(j, a.out);
  std::cerr << "LICQ " << (holds ? "holds" : "FAILS") << " across " << samples
            << " random feasible points\n";
  return holds ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Certified low-rank semidefinite solver for rotation synchronization"};
  app.require_subcommand(1);

  GenerateArgs gen;
  CLI::App* cmd_gen = app.add_subcommand("generate", "Generate a synthetic instance");
  cmd_gen->add_option("--type", gen.type, "Instance family (rotation-sync)");
  cmd_gen->add_option("--num", gen.num, "Number of rotations")->required();
  cmd_gen->add_option("--dim", gen.dim, "Rotation dimension (2 or 3)");
  cmd_gen->add_option("--graph", gen.graph, "cycle|chain|complete|random");
  cmd_gen->add_option("--density", gen.density, "Edge density for random graphs");
  cmd_gen->add_option("--noise", gen.noise, "Tangent noise sigma (radians)");
  cmd_gen->add_option("--weight-spread", gen.weight_spread,
                      "Log-uniform edge weights in [1, spread]");
  cmd_gen->add_option("--seed", gen.seed, "Random seed");
  cmd_gen->add_option("-o,--output", gen.out, "Problem JSON path (default: stdout)");
  cmd_gen->add_option("--g2o", gen.g2o_out, "Also write the instance as g2o");
  cmd_gen->add_option("--ground-truth", gen.ground_truth_out,
                      "Also write the ground-truth factor CSV");

  SolveArgs sol;
  CLI::App* cmd_solve = app.add_subcommand("solve", "Run the certified staircase");
  cmd_solve->add_option("problem", sol.problem_path, "Problem JSON file")->required();
  cmd_solve->add_option("--r0", sol.r0, "Starting rank (default: k)");
  cmd_solve->add_option("--rmax", sol.rmax, "Rank cap (default: smallest r with r(r+1)/2 > m)");
  cmd_solve->add_option("--tol", sol.tol, "Gradient tolerance");
  cmd_solve->add_option("--eps-cert", sol.eps_cert, "PSD-test shift (default: scale-relative)");
  cmd_solve->add_option("--precond", sol.precond, "on|off|auto");
  cmd_solve->add_option("--seed", sol.seed, "Random seed");
  cmd_solve->add_flag("--deterministic", sol.deterministic, "Force single-threaded mode");
  cmd_solve->add_option("-o,--output", sol.out, "Result JSON path (default: stdout)");
  cmd_solve->add_option("--dump-solution", sol.dump_solution, "Write Y* as CSV");
  cmd_solve->add_option("--y0", sol.y0_path, "Initial factor CSV (default: random at r0)");

  CertifyArgs cert;
  CLI::App* cmd_cert = app.add_subcommand("certify", "Certify a candidate point");
  cmd_cert->add_option("problem", cert.problem_path, "Problem JSON file")->required();
  cmd_cert->add_option("--point", cert.point_path, "Candidate factor CSV")->required();
  cmd_cert->add_option("--eps", cert.eps, "PSD-test shift (default: scale-relative)");
  cmd_cert->add_option("-o,--output", cert.out, "Certificate JSON path (default: stdout)");

  LicqArgs licq;
  CLI::App* cmd_licq = app.add_subcommand("check-licq", "Check constraint independence");
  cmd_licq->add_option("problem", licq.problem_path, "Problem JSON file")->required();
  cmd_licq->add_option("--point", licq.point_path, "Factor CSV (default: sample)");
  cmd_licq->add_option("--samples", licq.samples, "Random feasible points to sample");
  cmd_licq->add_option("--seed", licq.seed, "Sampling seed");
  cmd_licq->add_option("--tol", licq.tol, "Rank tolerance (default: SVD-relative)");
  cmd_licq->add_option("-o,--output", licq.out, "Report JSON path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // help exits clean; any parse failure is an error
  }

  try {
    if (cmd_gen->parsed()) return run_generate(gen);
    if (cmd_solve->parsed()) return run_solve(sol);
    if (cmd_cert->parsed()) return run_certify(cert);
    if (cmd_licq->parsed()) return run_check_licq(licq);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
