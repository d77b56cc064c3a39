#pragma once

// Independent reference computations used only by the tests. Nothing here
// calls into the library's assembly code.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "ctsnet/model.hpp"
#include "ctsnet/topology.hpp"

namespace oracle {

// Random small structure: nodes in the unit cube, the first `fixed` nodes
// supported, a spanning chain plus random extra members, members grouped at
// random into clusters (or one cluster per member when `unclustered`).
inline ctsnet::Model random_structure(std::mt19937_64& rng, int nodes, int extra_members, bool unclustered,
                                      Eigen::VectorXd& coords, int fixed = 2) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  ctsnet::Topology t;
  t.node_count = nodes;
  for (int i = 0; i + 1 < nodes; ++i) t.members.push_back({i, i + 1});
  std::uniform_int_distribution<int> pick(0, nodes - 1);
  while (static_cast<int>(t.members.size()) < nodes - 1 + extra_members) {
    int a = pick(rng), b = pick(rng);
    if (a == b) continue;
    t.members.push_back({a, b});
  }
  const int ne = t.member_count();
  if (unclustered) {
    for (int k = 0; k < ne; ++k) t.clusters.push_back({"c" + std::to_string(k), {k}});
  } else {
    std::vector<int> order(ne);
    for (int k = 0; k < ne; ++k) order[k] = k;
    std::shuffle(order.begin(), order.end(), rng);
    const int nc = std::max(1, ne / 2);
    t.clusters.resize(nc);
    for (int c = 0; c < nc; ++c) t.clusters[c].name = "c" + std::to_string(c);
    for (int i = 0; i < ne; ++i) t.clusters[i < nc ? i : pick(rng) % nc].members.push_back(order[i]);
    for (auto& c : t.clusters) std::sort(c.members.begin(), c.members.end());
  }
  for (int i = 0; i < fixed; ++i) t.fixed_nodes.push_back(i);
  t.finalize();

  coords.resize(3 * nodes);
  for (int i = 0; i < 3 * nodes; ++i) coords[i] = uni(rng);

  ctsnet::Model m;
  m.topology = t;
  const int nc = t.cluster_count();
  m.spec.density = Eigen::VectorXd(ne);
  m.spec.area = Eigen::VectorXd(ne);
  for (int k = 0; k < ne; ++k) {
    m.spec.density[k] = 1000.0 + 7000.0 * uni(rng);
    m.spec.area[k] = 1e-5 * (1.0 + uni(rng));
  }
  m.spec.modulus = Eigen::VectorXd(nc);
  m.spec.cluster_area = Eigen::VectorXd(nc);
  m.spec.rest_length = Eigen::VectorXd(nc);
  for (int c = 0; c < nc; ++c) {
    double area = 0.0;
    for (int k : t.clusters[c].members) area += m.spec.area[k];
    m.spec.cluster_area[c] = area / static_cast<double>(t.clusters[c].members.size());
    m.spec.modulus[c] = 1e9 * (1.0 + uni(rng));
    double lc = 0.0;
    for (int k : t.clusters[c].members) {
      const auto& mb = t.members[k];
      lc += (coords.segment<3>(3 * mb.head) - coords.segment<3>(3 * mb.tail)).norm();
    }
    m.spec.rest_length[c] = lc / (1.0 + 0.01 * (1.0 + uni(rng)));
  }
  m.spec.damping_coeff = 0.05;
  m.spec.gravity = Eigen::Vector3d(0.0, 0.0, -9.81);
  m.point_mass = Eigen::VectorXd(nodes);
  for (int i = 0; i < nodes; ++i) m.point_mass[i] = 0.1 * uni(rng);
  return m;
}

// Classical (one tension per member) truss/cable assembly by element loop.
struct Classical {
  Eigen::VectorXd tension;
  Eigen::VectorXd internal_force;
  Eigen::MatrixXd A;  // equilibrium, 3n x ne
  Eigen::MatrixXd B;  // compatibility, ne x 3n
  Eigen::MatrixXd KG, KE, KT, M, D;
  Eigen::VectorXd gravity;
};

inline Classical classical_assembly(const ctsnet::Model& model, const Eigen::VectorXd& x) {
  const auto& topo = model.topology;
  const auto& s = model.spec;
  const int n3 = 3 * topo.node_count, ne = topo.member_count();
  Classical r;
  r.tension = Eigen::VectorXd(ne);
  r.internal_force = Eigen::VectorXd::Zero(n3);
  r.A = Eigen::MatrixXd::Zero(n3, ne);
  r.B = Eigen::MatrixXd::Zero(ne, n3);
  r.KG = r.KE = r.M = r.D = Eigen::MatrixXd::Zero(n3, n3);
  r.gravity = Eigen::VectorXd::Zero(n3);
  const Eigen::Matrix3d I = Eigen::Matrix3d::Identity();
  for (int k = 0; k < ne; ++k) {
    // member k is its own cluster k
    const int a = topo.members[k].tail, b = topo.members[k].head;
    const Eigen::Vector3d d = x.segment<3>(3 * b) - x.segment<3>(3 * a);
    const double l = d.norm();
    const Eigen::Vector3d u = d / l;
    const double ea = s.modulus[k] * s.cluster_area[k], l0 = s.rest_length[k];
    const double t = ea * (l - l0) / l0;
    r.tension[k] = t;
    r.internal_force.segment<3>(3 * a) -= t * u;
    r.internal_force.segment<3>(3 * b) += t * u;
    r.A.block<3, 1>(3 * a, k) = -u;
    r.A.block<3, 1>(3 * b, k) = u;
    r.B.block<1, 3>(k, 3 * a) = -u.transpose();
    r.B.block<1, 3>(k, 3 * b) = u.transpose();
    const Eigen::Matrix3d g = t / l * (I - u * u.transpose());
    const Eigen::Matrix3d e = ea / l0 * u * u.transpose();
    const double mass = s.density[k] * s.area[k] * l0;
    const Eigen::Matrix3d mm = mass / 6.0 * I;
    const double dc = 2.0 / std::sqrt(3.0) * std::pow(s.density[k], model.options.damping_exponent) *
                      s.cluster_area[k] * std::pow(s.modulus[k], model.options.damping_exponent);
    const Eigen::Matrix3d dd = s.damping_coeff * dc * u * u.transpose();
    for (auto [i, j, sign] : {std::tuple{a, a, 1.0}, {b, b, 1.0}, {a, b, -1.0}, {b, a, -1.0}}) {
      r.KG.block<3, 3>(3 * i, 3 * j) += sign * g;
      r.KE.block<3, 3>(3 * i, 3 * j) += sign * e;
      r.D.block<3, 3>(3 * i, 3 * j) += sign * dd;
      r.M.block<3, 3>(3 * i, 3 * j) += (i == j ? 2.0 : 1.0) * mm;
    }
    r.gravity.segment<3>(3 * a) += 0.5 * mass * s.gravity;
    r.gravity.segment<3>(3 * b) += 0.5 * mass * s.gravity;
  }
  for (int i = 0; i < topo.node_count; ++i) {
    r.M.block<3, 3>(3 * i, 3 * i) += model.point_mass[i] * I;
    r.gravity.segment<3>(3 * i) += model.point_mass[i] * s.gravity;
  }
  r.KT = r.KG + r.KE;
  return r;
}

// Internal nodal force of a clustered net written directly from member
// geometry: each member of cluster c pulls its ends together with t_c.
inline Eigen::VectorXd clustered_internal_force(const ctsnet::Model& model, const Eigen::VectorXd& x) {
  const auto& topo = model.topology;
  Eigen::VectorXd lc = Eigen::VectorXd::Zero(topo.cluster_count());
  for (int k = 0; k < topo.member_count(); ++k) {
    const auto& mb = topo.members[k];
    lc[topo.cluster_of(k)] += (x.segment<3>(3 * mb.head) - x.segment<3>(3 * mb.tail)).norm();
  }
  Eigen::VectorXd f = Eigen::VectorXd::Zero(x.size());
  for (int k = 0; k < topo.member_count(); ++k) {
    const int c = topo.cluster_of(k);
    const auto& mb = topo.members[k];
    const double ea = model.spec.modulus[c] * model.spec.cluster_area[c];
    const double t = ea * (lc[c] - model.spec.rest_length[c]) / model.spec.rest_length[c];
    const Eigen::Vector3d d = x.segment<3>(3 * mb.head) - x.segment<3>(3 * mb.tail);
    const Eigen::Vector3d u = d / d.norm();
    f.segment<3>(3 * mb.tail) -= t * u;
    f.segment<3>(3 * mb.head) += t * u;
  }
  return f;
}

// Central-difference Jacobian-vector product.
inline Eigen::VectorXd directional_derivative(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                              const Eigen::VectorXd& x, const Eigen::VectorXd& dir, double h) {
  return (f(x + h * dir) - f(x - h * dir)) / (2.0 * h);
}

// Rank by Gaussian elimination with complete pivoting.
inline int elimination_rank(Eigen::MatrixXd a, double rel_tol = 1e-10) {
  const Eigen::Index rows = a.rows(), cols = a.cols();
  const double scale = a.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0;
  int rank = 0;
  for (Eigen::Index k = 0; k < std::min(rows, cols); ++k) {
    Eigen::Index pr = k, pc = k;
    double best = 0.0;
    for (Eigen::Index i = k; i < rows; ++i)
      for (Eigen::Index j = k; j < cols; ++j)
        if (std::abs(a(i, j)) > best) best = std::abs(a(i, j)), pr = i, pc = j;
    if (best <= rel_tol * scale) break;
    a.row(k).swap(a.row(pr));
    a.col(k).swap(a.col(pc));
    for (Eigen::Index i = k + 1; i < rows; ++i) {
      const double f = a(i, k) / a(k, k);
      a.row(i).tail(cols - k) -= f * a.row(k).tail(cols - k);
    }
    ++rank;
  }
  return rank;
}

// Constrained clustered equilibrium matrix built column by column from unit
// vectors, free-node rows only.
inline Eigen::MatrixXd constrained_equilibrium(const ctsnet::Model& model, const Eigen::VectorXd& x) {
  const auto& topo = model.topology;
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(x.size(), topo.cluster_count());
  for (int k = 0; k < topo.member_count(); ++k) {
    const auto& mb = topo.members[k];
    const Eigen::Vector3d d = x.segment<3>(3 * mb.head) - x.segment<3>(3 * mb.tail);
    const Eigen::Vector3d u = d / d.norm();
    full.block<3, 1>(3 * mb.tail, topo.cluster_of(k)) -= u;
    full.block<3, 1>(3 * mb.head, topo.cluster_of(k)) += u;
  }
  Eigen::MatrixXd out(topo.free_dofs().size(), topo.cluster_count());
  for (std::size_t i = 0; i < topo.free_dofs().size(); ++i) out.row(i) = full.row(topo.free_dofs()[i]);
  return out;
}

inline double rel_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double scale = std::max({a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff(), 1e-300});
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

}  // namespace oracle
