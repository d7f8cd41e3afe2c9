#include "bmstair/io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace bmstair {

namespace {

const char* kind_name(BlockKind k) {
  return k == BlockKind::Stiefel ? "stiefel" : "euclidean";
}

BlockKind kind_from_name(const std::string& name) {
  if (name == "stiefel") return BlockKind::Stiefel;
  if (name == "euclidean") return BlockKind::Euclidean;
  throw InvalidArgument("problem file: unknown block kind '" + name + "'");
}

Json triplets_to_json(const SparseSymMatrix& A) {
  Json arr = Json::array();
  for (const Triplet& t : A.entries()) arr.push_back({t.row, t.col, t.value});
  return arr;
}

SparseSymMatrix triplets_from_json(Index n, const Json& arr, const char* what) {
  if (!arr.is_array()) throw InvalidArgument(std::string("problem file: ") + what +
                                             " triplets must be an array");
  std::vector<Triplet> trips;
  trips.reserve(arr.size());
  for (const Json& e : arr) {
    if (!e.is_array() || e.size() != 3)
      throw InvalidArgument(std::string("problem file: malformed triplet in ") + what);
    trips.push_back({e[0].get<Index>(), e[1].get<Index>(), e[2].get<Scalar>()});
  }
  return SparseSymMatrix::from_triplets(n, trips);
}

}  // namespace

QcqpProblem make_problem(const ProblemData& data) {
  ManifoldSpec spec(data.blocks);
  if (data.constraints.has_value())
    return QcqpProblem(data.Q, std::move(spec), data.k, *data.constraints);
  return QcqpProblem(data.Q, std::move(spec), data.k);
}

Json problem_to_json(const ProblemData& data) {
  Json j;
  j["schema_version"] = data.schema_version;
  j["n"] = data.n;
  j["k"] = data.k;
  Json blocks = Json::array();
  for (const Block& b : data.blocks)
    blocks.push_back({{"kind", kind_name(b.kind)}, {"dim", b.dim}});
  j["blocks"] = std::move(blocks);
  j["Q"] = Json{{"triplets", triplets_to_json(data.Q)}};
  if (data.constraints.has_value()) {
    Json cons = Json::array();
    for (const Constraint& c : *data.constraints)
      cons.push_back({{"A", triplets_to_json(c.A)}, {"b", c.b}});
    j["constraints"] = std::move(cons);
  }
  j["metadata"] = data.metadata;
  return j;
}

ProblemData problem_from_json(const Json& j) {
  ProblemData data;
  data.schema_version = j.at("schema_version").get<int>();
  if (data.schema_version != 1)
    throw InvalidArgument("problem file: unsupported schema_version " +
                          std::to_string(data.schema_version));
  data.n = j.at("n").get<Index>();
  data.k = j.at("k").get<Index>();
  if (data.n < 1) throw InvalidArgument("problem file: n must be >= 1");

  Index total = 0;
  for (const Json& b : j.at("blocks")) {
    Block blk{kind_from_name(b.at("kind").get<std::string>()), b.at("dim").get<Index>()};
    total += blk.dim;
    data.blocks.push_back(blk);
  }
  if (total != data.n)
    throw InvalidArgument("problem file: block dimensions do not sum to n");

  data.Q = triplets_from_json(data.n, j.at("Q").at("triplets"), "Q");

  if (j.contains("constraints") && !j.at("constraints").is_null()) {
    std::vector<Constraint> cons;
    for (const Json& c : j.at("constraints"))
      cons.push_back({triplets_from_json(data.n, c.at("A"), "constraint"),
                      c.at("b").get<Scalar>()});
    data.constraints = std::move(cons);
  }
  if (j.contains("metadata")) data.metadata = j.at("metadata");
  return data;
}

ProblemData read_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open problem file: " + path);
  Json j;
  try {
    in >> j;
  } catch (const Json::parse_error& e) {
    throw InvalidArgument("problem file " + path + ": " + e.what());
  }
  return problem_from_json(j);
}

void write_problem(const ProblemData& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write problem file: " + path);
  out << problem_to_json(data).dump(2) << "\n";
}

Json result_to_json(const StaircaseResult& result, const StaircaseOptions& opts,
                    bool licq_holds) {
  Json j;
  j["schema_version"] = 1;
  j["f_bm"] = result.f_bm;
  j["f_qcqp"] = result.rounded.f_qcqp;
  j["gap"] = result.rounded.gap;
  j["gap_relative"] = result.rounded.gap_relative;
  j["rounding_exact"] = result.rounded.exact;
  j["certified"] = result.certified;
  j["licq_holds"] = licq_holds;
  j["multiplier_rank_deficient"] = result.certificate.multiplier_rank_deficient;
  j["stationarity_residual"] = result.certificate.stationarity_residual;
  j["certificate_epsilon"] = result.certificate.epsilon_used;
  j["final_rank"] = result.numerical_rank;
  j["staircase_rank"] = result.Y_star.cols();
  j["stop_reason"] = result.stop_reason;
  if (result.certificate.min_eig.has_value())
    j["min_eig"] = *result.certificate.min_eig;
  else
    j["min_eig"] = nullptr;

  Json trace = Json::array();
  for (const StageTrace& s : result.rank_trace) {
    trace.push_back({{"rank", s.rank},
                     {"objective", s.objective},
                     {"certified", s.certified},
                     {"outer_iterations", s.outer_iterations},
                     {"tcg_iterations", s.tcg_iterations},
                     {"termination", to_string(s.termination)},
                     {"solve_seconds", s.solve_seconds},
                     {"certify_seconds", s.certify_seconds}});
  }
  j["rank_trace"] = std::move(trace);

  j["options"] = Json{{"r0", opts.r0},
                      {"r_max", opts.r_max},
                      {"eps_cert", opts.eps_cert},
                      {"escape_t0", opts.escape_t0},
                      {"escape_backtracks", opts.escape_backtracks},
                      {"grad_tol", opts.rtr.grad_tol},
                      {"max_outer", opts.rtr.max_outer},
                      {"delta0", opts.rtr.delta0},
                      {"delta_max", opts.rtr.delta_max},
                      {"rho_accept", opts.rtr.rho_accept},
                      {"tcg_kappa", opts.rtr.tcg_kappa},
                      {"tcg_theta", opts.rtr.tcg_theta},
                      {"use_preconditioner", opts.rtr.use_preconditioner},
                      {"threads", thread_cap()}};
  j["seed"] = opts.rtr.seed;
  return j;
}

void write_factor_csv(const Matrix& Y, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write factor file: " + path);
  out << "n,r\n" << Y.rows() << "," << Y.cols() << "\n";
  out << std::setprecision(17);
  for (Index i = 0; i < Y.rows(); ++i) {
    for (Index j = 0; j < Y.cols(); ++j) {
      if (j > 0) out << ",";
      out << Y(i, j);
    }
    out << "\n";
  }
}

Matrix read_factor_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open factor file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("factor file is empty: " + path);
  // optional literal header line
  if (line.find("n,r") != std::string::npos || line.find("n, r") != std::string::npos) {
    if (!std::getline(in, line))
      throw InvalidArgument("factor file has no dimension line: " + path);
  }
  Index n = 0, r = 0;
  {
    std::istringstream dims(line);
    char comma = 0;
    if (!(dims >> n >> comma >> r) || comma != ',' || n < 1 || r < 1)
      throw InvalidArgument("factor file: malformed dimension line '" + line + "'");
  }
  Matrix Y(n, r);
  for (Index i = 0; i < n; ++i) {
    if (!std::getline(in, line))
      throw InvalidArgument("factor file: expected " + std::to_string(n) + " rows");
    std::istringstream row(line);
    std::string cell;
    for (Index j = 0; j < r; ++j) {
      if (!std::getline(row, cell, ','))
        throw InvalidArgument("factor file: row " + std::to_string(i) + " is too short");
      Y(i, j) = std::stod(cell);
    }
  }
  return Y;
}

}  // namespace bmstair
