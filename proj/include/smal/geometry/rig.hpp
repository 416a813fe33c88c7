#pragma once

#include <string>
#include <utility>
#include <vector>

#include "smal/common.hpp"

namespace smal {

struct PartLabeling {
  std::vector<int> part_of_vertex;
  int part_count = 0;
};

/// Sparse per-vertex skinning weights: at most four (joint, weight) entries,
/// non-negative, summing to one.
struct SkinningWeights {
  std::vector<std::vector<std::pair<int, double>>> rows;

  int vertex_count() const { return static_cast<int>(rows.size()); }
};

struct KinematicTree {
  std::vector<int> parent;  // -1 for the root
  std::vector<Vec3> joint_positions;

  int joint_count() const { return static_cast<int>(parent.size()); }
  int root() const;
  /// Parents before children; throws on cycles or multiple roots.
  std::vector<int> topological_order() const;
};

void validate_labeling(const PartLabeling& labeling, int vertex_count);
void validate_weights(const SkinningWeights& weights, int joint_count);

/// Bundled rig JSON: part_of_vertex, sparse weights, parent, joint_positions.
struct Rig {
  PartLabeling labeling;
  SkinningWeights weights;
  KinematicTree tree;
};

Rig read_rig_json(const std::string& path);
void write_rig_json(const std::string& path, const Rig& rig);

}  // namespace smal
