#include "bmstair/rotation_sync.hpp"

#include "bmstair/rng.hpp"

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <sstream>
#include <tuple>

namespace bmstair {

namespace {

Matrix rot2(Scalar theta) {
  Matrix R(2, 2);
  const Scalar c = std::cos(theta), s = std::sin(theta);
  R << c, -s, s, c;
  return R;
}

Matrix exp_so3(const Eigen::Vector3d& w) {
  const Scalar theta = w.norm();
  Eigen::Matrix3d K;
  K << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  if (theta < 1e-12) {
    R += K;  // first-order term; K^2 is negligible here
  } else {
    R += std::sin(theta) / theta * K +
         (1.0 - std::cos(theta)) / (theta * theta) * (K * K);
  }
  return R;
}

Matrix random_rotation(int d, Rng& rng) {
  if (d == 2) return rot2(2.0 * std::numbers::pi * rng.uniform());
  Eigen::Vector4d q;
  for (int i = 0; i < 4; ++i) q[i] = rng.normal();
  q.normalize();
  return Eigen::Quaterniond(q[0], q[1], q[2], q[3]).toRotationMatrix();
}

Matrix tangent_noise(int d, Scalar sigma, Rng& rng) {
  if (sigma <= 0) return Matrix::Identity(d, d);
  if (d == 2) return rot2(sigma * rng.normal());
  Eigen::Vector3d w;
  for (int i = 0; i < 3; ++i) w[i] = sigma * rng.normal();
  return exp_so3(w);
}

bool connected(int num, const std::vector<std::pair<int, int>>& edges) {
  std::vector<int> parent(num);
  std::iota(parent.begin(), parent.end(), 0);
  const auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  int components = num;
  for (const auto& [i, j] : edges) {
    const int a = find(i), b = find(j);
    if (a != b) {
      parent[a] = b;
      --components;
    }
  }
  return components == 1;
}

std::vector<std::pair<int, int>> sample_edges(const RotationSyncOptions& opts, Rng& rng) {
  const int num = opts.num_rotations;
  std::vector<std::pair<int, int>> edges;
  switch (opts.graph) {
    case GraphKind::Chain:
      for (int i = 0; i + 1 < num; ++i) edges.emplace_back(i, i + 1);
      return edges;
    case GraphKind::Cycle:
      for (int i = 0; i + 1 < num; ++i) edges.emplace_back(i, i + 1);
      if (num > 2) edges.emplace_back(0, num - 1);
      return edges;
    case GraphKind::Complete:
      for (int i = 0; i < num; ++i)
        for (int j = i + 1; j < num; ++j) edges.emplace_back(i, j);
      return edges;
    case GraphKind::Random: {
      for (int attempt = 0; attempt < 200; ++attempt) {
        edges.clear();
        for (int i = 0; i < num; ++i)
          for (int j = i + 1; j < num; ++j)
            if (rng.uniform() < opts.density) edges.emplace_back(i, j);
        if (connected(num, edges)) return edges;
      }
      throw NumericalError(
          "generate_rotation_sync: random graph stayed disconnected; raise the density");
    }
  }
  throw InvalidArgument("generate_rotation_sync: unknown graph kind");
}

}  // namespace

const char* to_string(GraphKind g) {
  switch (g) {
    case GraphKind::Cycle: return "cycle";
    case GraphKind::Chain: return "chain";
    case GraphKind::Complete: return "complete";
    case GraphKind::Random: return "random";
  }
  return "unknown";
}

GraphKind graph_kind_from_string(const std::string& name) {
  if (name == "cycle") return GraphKind::Cycle;
  if (name == "chain") return GraphKind::Chain;
  if (name == "complete") return GraphKind::Complete;
  if (name == "random") return GraphKind::Random;
  throw InvalidArgument("unknown graph kind '" + name + "'");
}

ProblemData assemble_rotation_sync(int num_rotations, int d,
                                   const std::vector<RelativeRotation>& measurements) {
  if (num_rotations < 2)
    throw InvalidArgument("assemble_rotation_sync: need at least two rotations");
  if (d != 2 && d != 3) throw InvalidArgument("assemble_rotation_sync: d must be 2 or 3");
  const Index n = static_cast<Index>(d) * num_rotations;

  std::vector<Triplet> trips;
  trips.reserve(measurements.size() * static_cast<std::size_t>(d * d + 2 * d));
  for (const RelativeRotation& e : measurements) {
    if (e.i < 0 || e.j < 0 || e.i >= num_rotations || e.j >= num_rotations || e.i == e.j)
      throw InvalidArgument("assemble_rotation_sync: edge endpoints out of range");
    if (e.rotation.rows() != d || e.rotation.cols() != d)
      throw InvalidArgument("assemble_rotation_sync: measurement has wrong size");
    if (!(e.weight > 0))
      throw InvalidArgument("assemble_rotation_sync: weights must be positive");
    const int i = std::min(e.i, e.j);
    const int j = std::max(e.i, e.j);
    const Matrix M = e.i < e.j ? e.rotation : Matrix(e.rotation.transpose());
    for (int a = 0; a < d; ++a) {
      trips.push_back({static_cast<Index>(d) * i + a, static_cast<Index>(d) * i + a, e.weight});
      trips.push_back({static_cast<Index>(d) * j + a, static_cast<Index>(d) * j + a, e.weight});
      for (int b = 0; b < d; ++b)
        trips.push_back({static_cast<Index>(d) * i + a, static_cast<Index>(d) * j + b,
                         -e.weight * M(a, b)});
    }
  }

  ProblemData data;
  data.n = n;
  data.k = d;
  data.blocks.assign(static_cast<std::size_t>(num_rotations),
                     Block{BlockKind::Stiefel, d});
  data.Q = SparseSymMatrix::from_triplets(n, trips);
  data.metadata = Json{{"generator", "rotation-sync"},
                       {"num_rotations", num_rotations},
                       {"d", d},
                       {"edges", measurements.size()}};
  return data;
}

RotationSyncInstance generate_rotation_sync(const RotationSyncOptions& opts) {
  if (opts.num_rotations < 2)
    throw InvalidArgument("generate_rotation_sync: need at least two rotations");
  if (opts.d != 2 && opts.d != 3)
    throw InvalidArgument("generate_rotation_sync: d must be 2 or 3");
  if (opts.noise_sigma < 0)
    throw InvalidArgument("generate_rotation_sync: noise_sigma must be nonnegative");
  if (opts.weight_spread < 1)
    throw InvalidArgument("generate_rotation_sync: weight_spread must be >= 1");
  if (opts.graph == GraphKind::Random && !(opts.density > 0 && opts.density <= 1))
    throw InvalidArgument("generate_rotation_sync: density must lie in (0, 1]");

  Rng rng(opts.seed);
  const int num = opts.num_rotations;
  const int d = opts.d;

  std::vector<Matrix> gt(static_cast<std::size_t>(num));
  for (auto& R : gt) R = random_rotation(d, rng);

  const auto edges = sample_edges(opts, rng);

  RotationSyncInstance inst;
  inst.measurements.reserve(edges.size());
  for (const auto& [i, j] : edges) {
    RelativeRotation rel;
    rel.i = i;
    rel.j = j;
    rel.rotation = gt[static_cast<std::size_t>(i)].transpose() *
                   gt[static_cast<std::size_t>(j)] * tangent_noise(d, opts.noise_sigma, rng);
    rel.weight = opts.weight_spread > 1
                     ? std::exp(rng.uniform() * std::log(opts.weight_spread))
                     : 1.0;
    inst.measurements.push_back(std::move(rel));
  }

  inst.problem = assemble_rotation_sync(num, d, inst.measurements);

  inst.ground_truth.resize(static_cast<Index>(d) * num, d);
  for (int i = 0; i < num; ++i)
    inst.ground_truth.middleRows(static_cast<Index>(d) * i, d) =
        gt[static_cast<std::size_t>(i)].transpose();
  inst.ground_truth_cost =
      dot(inst.ground_truth, inst.problem.Q.apply(inst.ground_truth));

  inst.problem.metadata["graph"] = to_string(opts.graph);
  if (opts.graph == GraphKind::Random) inst.problem.metadata["density"] = opts.density;
  inst.problem.metadata["noise_sigma"] = opts.noise_sigma;
  inst.problem.metadata["noise_model"] = "tangent-gaussian";
  inst.problem.metadata["weight_spread"] = opts.weight_spread;
  inst.problem.metadata["seed"] = opts.seed;
  inst.problem.metadata["ground_truth_cost"] = inst.ground_truth_cost;
  return inst;
}

namespace {

struct G2oRecords {
  int dim = 0;  // 2 or 3, set by the first vertex/edge seen
  std::vector<std::pair<long, Matrix>> vertices;  // id, rotation (for reference only)
  std::vector<std::tuple<long, long, Matrix, double>> edges;
  std::size_t skipped = 0;
};

Matrix quat_to_rot(double qx, double qy, double qz, double qw) {
  Eigen::Quaterniond q(qw, qx, qy, qz);
  if (q.norm() <= 0) throw InvalidArgument("zero quaternion");
  q.normalize();
  return q.toRotationMatrix();
}

void require_dim(G2oRecords& rec, int d, std::size_t line_no) {
  if (rec.dim == 0) rec.dim = d;
  if (rec.dim != d)
    throw InvalidArgument("g2o line " + std::to_string(line_no) +
                          ": mixes 2D and 3D records");
}

}  // namespace

ProblemData read_g2o_rotations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open g2o file: " + path);

  G2oRecords rec;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag) || tag.empty() || tag[0] == '#') continue;

    const auto malformed = [&](const std::string& why) -> InvalidArgument {
      return InvalidArgument("g2o line " + std::to_string(line_no) + ": " + why);
    };

    if (tag == "VERTEX_SE2") {
      require_dim(rec, 2, line_no);
      long id;
      double x, y, th;
      if (!(ss >> id >> x >> y >> th)) throw malformed("malformed VERTEX_SE2");
      rec.vertices.emplace_back(id, rot2(th));
    } else if (tag == "EDGE_SE2") {
      require_dim(rec, 2, line_no);
      long i, j;
      double dx, dy, dth;
      if (!(ss >> i >> j >> dx >> dy >> dth)) throw malformed("malformed EDGE_SE2");
      double info[6];
      double weight = 1.0;
      bool has_info = true;
      for (int t = 0; t < 6; ++t)
        if (!(ss >> info[t])) {
          if (t == 0) has_info = false;
          else throw malformed("EDGE_SE2 information block must have 6 values");
          break;
        }
      if (has_info) weight = info[5];  // (theta, theta) entry
      if (!(weight > 0)) throw malformed("non-positive rotational information");
      rec.edges.emplace_back(i, j, rot2(dth), weight);
    } else if (tag == "VERTEX_SE3:QUAT") {
      require_dim(rec, 3, line_no);
      long id;
      double x, y, z, qx, qy, qz, qw;
      if (!(ss >> id >> x >> y >> z >> qx >> qy >> qz >> qw))
        throw malformed("malformed VERTEX_SE3:QUAT");
      rec.vertices.emplace_back(id, quat_to_rot(qx, qy, qz, qw));
    } else if (tag == "EDGE_SE3:QUAT") {
      require_dim(rec, 3, line_no);
      long i, j;
      double dx, dy, dz, qx, qy, qz, qw;
      if (!(ss >> i >> j >> dx >> dy >> dz >> qx >> qy >> qz >> qw))
        throw malformed("malformed EDGE_SE3:QUAT");
      double info[21];
      double weight = 1.0;
      bool has_info = true;
      for (int t = 0; t < 21; ++t)
        if (!(ss >> info[t])) {
          if (t == 0) has_info = false;
          else throw malformed("EDGE_SE3:QUAT information block must have 21 values");
          break;
        }
      if (has_info) weight = info[15];  // leading rotational diagonal, entry (3,3)
      if (!(weight > 0)) throw malformed("non-positive rotational information");
      rec.edges.emplace_back(i, j, quat_to_rot(qx, qy, qz, qw), weight);
    } else {
      ++rec.skipped;
    }
  }

  if (rec.vertices.empty())
    throw InvalidArgument("g2o file " + path + ": no vertices");

  // map (possibly sparse) vertex ids to dense indices by sorted id
  std::vector<long> ids;
  ids.reserve(rec.vertices.size());
  for (const auto& [id, R] : rec.vertices) ids.push_back(id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  const auto index_of = [&](long id) -> int {
    const auto it = std::lower_bound(ids.begin(), ids.end(), id);
    if (it == ids.end() || *it != id)
      throw InvalidArgument("g2o file " + path + ": edge references unknown vertex " +
                            std::to_string(id));
    return static_cast<int>(it - ids.begin());
  };

  std::vector<RelativeRotation> measurements;
  measurements.reserve(rec.edges.size());
  for (const auto& [i, j, R, w] : rec.edges) {
    if (i == j) {
      ++rec.skipped;  // self-loops carry no relative information
      continue;
    }
    RelativeRotation rel;
    rel.i = index_of(i);
    rel.j = index_of(j);
    rel.rotation = R;
    rel.weight = w;
    measurements.push_back(std::move(rel));
  }

  ProblemData data = assemble_rotation_sync(static_cast<int>(ids.size()), rec.dim,
                                            measurements);
  data.metadata["source"] = "g2o";
  data.metadata["file"] = path;
  data.metadata["skipped_records"] = rec.skipped;
  data.metadata["weight_policy"] = "leading rotational information diagonal";
  return data;
}

void write_g2o(const RotationSyncInstance& instance, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write g2o file: " + path);
  out << std::setprecision(17);

  const int d = static_cast<int>(instance.problem.k);
  const int num = static_cast<int>(instance.problem.n) / d;
  for (int i = 0; i < num; ++i) {
    // ground truth stores R_i^T blocks
    const Matrix R = instance.ground_truth.middleRows(static_cast<Index>(d) * i, d).transpose();
    if (d == 2) {
      out << "VERTEX_SE2 " << i << " 0 0 " << std::atan2(R(1, 0), R(0, 0)) << "\n";
    } else {
      const Eigen::Quaterniond q{Eigen::Matrix3d(R)};
      out << "VERTEX_SE3:QUAT " << i << " 0 0 0 " << q.x() << " " << q.y() << " " << q.z()
          << " " << q.w() << "\n";
    }
  }
  for (const RelativeRotation& e : instance.measurements) {
    if (d == 2) {
      out << "EDGE_SE2 " << e.i << " " << e.j << " 0 0 "
          << std::atan2(e.rotation(1, 0), e.rotation(0, 0)) << " 1 0 0 1 0 " << e.weight
          << "\n";
    } else {
      Eigen::Quaterniond q{Eigen::Matrix3d(e.rotation)};
      out << "EDGE_SE3:QUAT " << e.i << " " << e.j << " 0 0 0 " << q.x() << " " << q.y()
          << " " << q.z() << " " << q.w() << " 1 0 0 0 0 0 1 0 0 0 0 1 0 0 0 " << e.weight
          << " 0 0 " << e.weight << " 0 " << e.weight << "\n";
    }
  }
}

}  // namespace bmstair
