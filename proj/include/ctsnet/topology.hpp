#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <string>
#include <vector>

#include "ctsnet/errors.hpp"

namespace ctsnet {

struct Member {
  int tail = 0;
  int head = 0;
  bool operator==(const Member&) const = default;
};

// A clustered cable: members joined over frictionless pulleys, one rest
// length and one tension for the whole group.
struct Cluster {
  std::string name;
  std::vector<int> members;
};

// Node/member incidence, cluster membership and the fixed/free split.
// Call finalize() after editing the public fields.
struct Topology {
  int node_count = 0;
  std::vector<Member> members;
  std::vector<Cluster> clusters;
  std::vector<int> fixed_nodes;

  int member_count() const { return static_cast<int>(members.size()); }
  int cluster_count() const { return static_cast<int>(clusters.size()); }
  int free_count() const { return static_cast<int>(free_nodes_.size()); }

  const std::vector<int>& free_nodes() const { return free_nodes_; }
  // Coordinate indices (3 per node) of free and fixed nodes, node order.
  const std::vector<int>& free_dofs() const { return free_dofs_; }
  const std::vector<int>& fixed_dofs() const { return fixed_dofs_; }
  int cluster_of(int member) const { return member_cluster_[member]; }
  bool is_fixed(int node) const { return fixed_flag_[node]; }

  int cluster_index(const std::string& name) const {
    for (int c = 0; c < cluster_count(); ++c)
      if (clusters[c].name == name) return c;
    throw ValidationError("unknown cluster '" + name + "'");
  }

  // Validates and builds the derived index tables.
  void finalize() {
    if (node_count <= 0) throw ValidationError("topology: node_count must be > 0");
    for (int k = 0; k < member_count(); ++k) {
      const auto& m = members[k];
      const std::string at = "members[" + std::to_string(k) + "]";
      if (m.tail < 0 || m.tail >= node_count || m.head < 0 || m.head >= node_count)
        throw ValidationError(at + ": node index out of range");
      if (m.tail == m.head) throw ValidationError(at + ": tail and head coincide");
    }
    member_cluster_.assign(members.size(), -1);
    for (int c = 0; c < cluster_count(); ++c) {
      if (clusters[c].members.empty())
        throw ValidationError("clusters[" + std::to_string(c) + "]: empty cluster");
      for (int k : clusters[c].members) {
        const std::string at = "clusters[" + std::to_string(c) + "].members";
        if (k < 0 || k >= member_count()) throw ValidationError(at + ": member index out of range");
        if (member_cluster_[k] != -1)
          throw ValidationError(at + ": member " + std::to_string(k) + " is in two clusters");
        member_cluster_[k] = c;
      }
    }
    for (int k = 0; k < member_count(); ++k)
      if (member_cluster_[k] == -1)
        throw ValidationError("members[" + std::to_string(k) + "]: not assigned to a cluster");

    fixed_flag_.assign(node_count, false);
    for (int n : fixed_nodes) {
      if (n < 0 || n >= node_count) throw ValidationError("fixed_nodes: index out of range");
      if (fixed_flag_[n]) throw ValidationError("fixed_nodes: duplicate index " + std::to_string(n));
      fixed_flag_[n] = true;
    }
    std::sort(fixed_nodes.begin(), fixed_nodes.end());
    free_nodes_.clear();
    free_dofs_.clear();
    fixed_dofs_.clear();
    for (int n = 0; n < node_count; ++n) {
      auto& dofs = fixed_flag_[n] ? fixed_dofs_ : free_dofs_;
      if (!fixed_flag_[n]) free_nodes_.push_back(n);
      for (int d = 0; d < 3; ++d) dofs.push_back(3 * n + d);
    }
  }

 private:
  std::vector<int> member_cluster_;
  std::vector<bool> fixed_flag_;
  std::vector<int> free_nodes_;
  std::vector<int> free_dofs_;
  std::vector<int> fixed_dofs_;
};

// Stacked nodal coordinates, 3 entries per node.
struct Configuration {
  Eigen::VectorXd coords;

  Eigen::Vector3d node(int i) const { return coords.segment<3>(3 * i); }
  int node_count() const { return static_cast<int>(coords.size() / 3); }
};

inline Eigen::VectorXd gather(const Eigen::VectorXd& full, const std::vector<int>& idx) {
  Eigen::VectorXd out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = full[idx[i]];
  return out;
}

inline void scatter(const Eigen::VectorXd& part, const std::vector<int>& idx, Eigen::VectorXd& full) {
  for (std::size_t i = 0; i < idx.size(); ++i) full[idx[i]] = part[i];
}

inline Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& m, const std::vector<int>& idx) {
  Eigen::MatrixXd out(idx.size(), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(i) = m.row(idx[i]);
  return out;
}

inline Eigen::MatrixXd gather_block(const Eigen::MatrixXd& m, const std::vector<int>& rows,
                                    const std::vector<int>& cols) {
  Eigen::MatrixXd out(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) out(i, j) = m(rows[i], cols[j]);
  return out;
}

// Free/fixed congruence blocks E_aᵀ X E_a and E_aᵀ X E_b of a nodal matrix.
struct Partitioned {
  Eigen::MatrixXd aa;
  Eigen::MatrixXd ab;
};

inline Partitioned partition(const Topology& topo, const Eigen::MatrixXd& full) {
  return {gather_block(full, topo.free_dofs(), topo.free_dofs()),
          gather_block(full, topo.free_dofs(), topo.fixed_dofs())};
}

inline void check_config(const Topology& topo, const Eigen::VectorXd& coords) {
  if (coords.size() != 3 * topo.node_count)
    throw ValidationError("configuration has " + std::to_string(coords.size()) +
                          " coordinates, expected " + std::to_string(3 * topo.node_count));
}

}  // namespace ctsnet
