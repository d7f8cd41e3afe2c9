#pragma once

#include "bmstair/problem.hpp"
#include "bmstair/staircase.hpp"
#include "bmstair/types.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace bmstair {

using Json = nlohmann::json;

/// On-disk problem model (schema_version 1): dimensions, row blocks, the
/// upper-triangle triplets of Q, optional explicit constraints, free-form
/// metadata. When constraints are absent they are synthesized from the
/// blocks at load time.
struct ProblemData {
  int schema_version = 1;
  Index n = 0;
  Index k = 0;
  std::vector<Block> blocks;
  SparseSymMatrix Q;
  std::optional<std::vector<Constraint>> constraints;
  Json metadata = Json::object();
};

QcqpProblem make_problem(const ProblemData& data);

Json problem_to_json(const ProblemData& data);
ProblemData problem_from_json(const Json& j);

ProblemData read_problem(const std::string& path);
void write_problem(const ProblemData& data, const std::string& path);

/// Solver-run report (schema_version 1); wall-clock fields live only inside
/// rank_trace entries so deterministic comparisons can strip them.
Json result_to_json(const StaircaseResult& result, const StaircaseOptions& opts,
                    bool licq_holds);

/// Dense factor CSV: header line "n,r", then the dims, then n rows of r
/// comma-separated values (row-major).
void write_factor_csv(const Matrix& Y, const std::string& path);
Matrix read_factor_csv(const std::string& path);

}  // namespace bmstair
