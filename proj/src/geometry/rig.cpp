#include "smal/geometry/rig.hpp"

#include <fstream>

#include <json.hpp>

namespace smal {

int KinematicTree::root() const {
  int r = -1;
  for (int i = 0; i < joint_count(); ++i) {
    if (parent[i] < 0) {
      if (r >= 0) throw validation_error("kinematic tree has multiple roots");
      r = i;
    }
  }
  if (r < 0) throw validation_error("kinematic tree has no root");
  return r;
}

std::vector<int> KinematicTree::topological_order() const {
  const int n = joint_count();
  std::vector<std::vector<int>> children(n);
  int root_idx = root();
  for (int i = 0; i < n; ++i) {
    if (parent[i] < 0) continue;
    if (parent[i] >= n)
      throw validation_error("joint parent index out of range");
    children[parent[i]].push_back(i);
  }
  std::vector<int> order;
  order.reserve(n);
  std::vector<int> stack{root_idx};
  while (!stack.empty()) {
    const int j = stack.back();
    stack.pop_back();
    order.push_back(j);
    for (auto it = children[j].rbegin(); it != children[j].rend(); ++it)
      stack.push_back(*it);
  }
  if (static_cast<int>(order.size()) != n)
    throw validation_error("kinematic tree contains a cycle or orphan");
  return order;
}

void validate_labeling(const PartLabeling& labeling, int vertex_count) {
  if (static_cast<int>(labeling.part_of_vertex.size()) != vertex_count)
    throw validation_error("part labeling size mismatch");
  std::vector<int> owned(labeling.part_count, 0);
  for (int p : labeling.part_of_vertex) {
    if (p < 0 || p >= labeling.part_count)
      throw validation_error("part label out of range");
    ++owned[p];
  }
  for (int p = 0; p < labeling.part_count; ++p)
    if (owned[p] < 4)
      throw validation_error("part " + std::to_string(p) +
                             " owns fewer than 4 vertices");
}

void validate_weights(const SkinningWeights& weights, int joint_count) {
  for (size_t v = 0; v < weights.rows.size(); ++v) {
    const auto& row = weights.rows[v];
    if (row.empty() || row.size() > 4)
      throw validation_error("weight row " + std::to_string(v) +
                             " must have 1..4 entries");
    double sum = 0.0;
    for (const auto& [j, w] : row) {
      if (j < 0 || j >= joint_count)
        throw validation_error("weight joint index out of range");
      if (w < 0.0) throw validation_error("negative skinning weight");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-6)
      throw validation_error("weight row " + std::to_string(v) +
                             " does not sum to 1");
  }
}

Rig read_rig_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open rig file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw io_error("rig JSON parse error in " + path + ": " + e.what());
  }
  Rig rig;
  rig.labeling.part_of_vertex = j.at("part_of_vertex").get<std::vector<int>>();
  for (const auto& row : j.at("weights")) {
    std::vector<std::pair<int, double>> entries;
    for (const auto& e : row)
      entries.emplace_back(e.at("index").get<int>(), e.at("value").get<double>());
    rig.weights.rows.push_back(std::move(entries));
  }
  rig.tree.parent = j.at("parent").get<std::vector<int>>();
  for (const auto& p : j.at("joint_positions"))
    rig.tree.joint_positions.emplace_back(p.at(0).get<double>(),
                                          p.at(1).get<double>(),
                                          p.at(2).get<double>());
  rig.labeling.part_count = rig.tree.joint_count();
  validate_labeling(rig.labeling,
                    static_cast<int>(rig.labeling.part_of_vertex.size()));
  validate_weights(rig.weights, rig.tree.joint_count());
  return rig;
}

void write_rig_json(const std::string& path, const Rig& rig) {
  nlohmann::json j;
  j["part_of_vertex"] = rig.labeling.part_of_vertex;
  nlohmann::json weights = nlohmann::json::array();
  for (const auto& row : rig.weights.rows) {
    nlohmann::json jr = nlohmann::json::array();
    for (const auto& [idx, val] : row)
      jr.push_back({{"index", idx}, {"value", val}});
    weights.push_back(std::move(jr));
  }
  j["weights"] = std::move(weights);
  j["parent"] = rig.tree.parent;
  nlohmann::json joints = nlohmann::json::array();
  for (const Vec3& p : rig.tree.joint_positions)
    joints.push_back({p.x(), p.y(), p.z()});
  j["joint_positions"] = std::move(joints);
  std::ofstream out(path);
  if (!out) throw io_error("cannot write rig file: " + path);
  out << j.dump(2) << '\n';
}

}  // namespace smal
