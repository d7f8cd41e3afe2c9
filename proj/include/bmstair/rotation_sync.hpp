#pragma once

#include "bmstair/io.hpp"
#include "bmstair/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace bmstair {

enum class GraphKind { Cycle, Chain, Complete, Random };

const char* to_string(GraphKind g);
GraphKind graph_kind_from_string(const std::string& name);

struct RotationSyncOptions {
  int num_rotations = 0;
  int d = 3;  // 2 or 3
  GraphKind graph = GraphKind::Cycle;
  double density = 0.3;        // Random graphs only; resampled until connected
  double noise_sigma = 0.0;    // tangent-space Gaussian, radians
  double weight_spread = 1.0;  // log-uniform edge weights in [1, spread]
  std::uint64_t seed = 0;
};

/// Relative rotation measurement on edge (i, j), i < j: the d x d matrix
/// approximating R_i^T R_j, with a positive information weight.
struct RelativeRotation {
  int i = 0;
  int j = 0;
  Matrix rotation;
  double weight = 1.0;
};

/// A generated instance: the serializable problem, the measurements it was
/// assembled from, and the ground truth (n x d stack of R_i^T blocks).
struct RotationSyncInstance {
  ProblemData problem;
  std::vector<RelativeRotation> measurements;
  Matrix ground_truth;
  Scalar ground_truth_cost = 0.0;
};

/// Samples ground-truth rotations uniformly, perturbs relative measurements
/// in the tangent space, and assembles the chordal cost
/// sum_edges w |R_j - R_i Rtilde_ij|_F^2 as <Q, X X^T> over Stiefel(d) blocks.
/// Q is positive semidefinite by construction; the ground truth has cost 0
/// when noise_sigma = 0.
RotationSyncInstance generate_rotation_sync(const RotationSyncOptions& opts);

/// Builds the chordal-cost problem from an explicit measurement list
/// (shared by the generator and the g2o reader).
ProblemData assemble_rotation_sync(int num_rotations, int d,
                                   const std::vector<RelativeRotation>& measurements);

/// Reads the rotation part of a g2o pose graph (VERTEX_SE2/EDGE_SE2 or
/// VERTEX_SE3:QUAT/EDGE_SE3:QUAT). Translations and information off-blocks
/// are dropped; the rotational weight is the leading rotational diagonal of
/// the information matrix when present, else 1. Unsupported record types are
/// skipped and counted in the metadata.
ProblemData read_g2o_rotations(const std::string& path);

/// Writes an instance in the same g2o subset (vertices from the ground
/// truth, zero translations).
void write_g2o(const RotationSyncInstance& instance, const std::string& path);

}  // namespace bmstair
