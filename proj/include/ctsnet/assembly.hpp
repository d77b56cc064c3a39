#pragma once

// Lengths, tensions, equilibrium/compatibility matrices, stiffness, mass,
// damping, gravity and rest-length sensitivities of a clustered cable
// structure. Nodal matrices are 3n_n x 3n_n with coordinates stacked per node.

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "ctsnet/errors.hpp"
#include "ctsnet/model.hpp"
#include "ctsnet/topology.hpp"

namespace ctsnet {

struct MemberGeometry {
  Eigen::VectorXd l;   // member lengths
  Eigen::VectorXd lc;  // cluster lengths (sum over members)
  Eigen::Matrix3Xd H;  // column k: head minus tail
};

inline double bounding_diagonal(const Eigen::VectorXd& coords) {
  const auto pts = coords.reshaped(3, coords.size() / 3);
  return (pts.rowwise().maxCoeff() - pts.rowwise().minCoeff()).norm();
}

inline MemberGeometry member_lengths(const Topology& topo, const Eigen::VectorXd& coords) {
  check_config(topo, coords);
  MemberGeometry g;
  const int ne = topo.member_count();
  g.H.resize(3, ne);
  g.l.resize(ne);
  const double min_len = 1e-9 * bounding_diagonal(coords);
  for (int k = 0; k < ne; ++k) {
    const auto& m = topo.members[k];
    g.H.col(k) = coords.segment<3>(3 * m.head) - coords.segment<3>(3 * m.tail);
    g.l[k] = g.H.col(k).norm();
    if (!(g.l[k] > min_len))
      throw DegenerateGeometryError("member " + std::to_string(k) + " has zero length", k);
  }
  g.lc = Eigen::VectorXd::Zero(topo.cluster_count());
  for (int c = 0; c < topo.cluster_count(); ++c)
    for (int k : topo.clusters[c].members) g.lc[c] += g.l[k];
  return g;
}

// C: signed member-node incidence, -1 at tail and +1 at head.
inline Eigen::MatrixXd connectivity_matrix(const Topology& topo) {
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(topo.member_count(), topo.node_count);
  for (int k = 0; k < topo.member_count(); ++k) {
    C(k, topo.members[k].tail) = -1.0;
    C(k, topo.members[k].head) = 1.0;
  }
  return C;
}

// S: 0/1 cluster membership, S * l sums member lengths per cluster.
inline Eigen::MatrixXd clustering_matrix(const Topology& topo) {
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(topo.cluster_count(), topo.member_count());
  for (int c = 0; c < topo.cluster_count(); ++c)
    for (int k : topo.clusters[c].members) S(c, k) = 1.0;
  return S;
}

inline Eigen::MatrixXd kron_i3(const Eigen::MatrixXd& a) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(3 * a.rows(), 3 * a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      if (a(i, j) != 0.0)
        for (int d = 0; d < 3; ++d) out(3 * i + d, 3 * j + d) = a(i, j);
  return out;
}

// ---------------------------------------------------------------------------
// Constitutive law

// Linear elastic cluster tensions, sign unchecked.
inline Eigen::VectorXd elastic_tensions(const Eigen::VectorXd& lc, const MemberSpec& spec) {
  const Eigen::VectorXd ea = spec.axial_stiffness();
  return ea.cwiseProduct(lc - spec.rest_length).cwiseQuotient(spec.rest_length);
}

inline Eigen::VectorXd apply_tension_model(Eigen::VectorXd t, TensionModel model) {
  for (Eigen::Index c = 0; c < t.size(); ++c) {
    if (t[c] >= 0) continue;
    if (model == TensionModel::kSlack) {
      t[c] = 0.0;
    } else {
      throw CompressionError("cluster " + std::to_string(c) + " is in compression (t = " +
                                 std::to_string(t[c]) + " N)",
                             static_cast<int>(c));
    }
  }
  return t;
}

inline Eigen::VectorXd cluster_tensions(const Eigen::VectorXd& lc, const MemberSpec& spec,
                                        TensionModel model = TensionModel::kTaut) {
  for (Eigen::Index c = 0; c < spec.rest_length.size(); ++c)
    if (!(spec.rest_length[c] > 0))
      throw ValidationError("rest_length[" + std::to_string(c) + "]: must be > 0");
  return apply_tension_model(elastic_tensions(lc, spec), model);
}

// Rest lengths that produce tensions t at cluster lengths lc.
inline Eigen::VectorXd rest_length_for(const Eigen::VectorXd& t, const Eigen::VectorXd& lc,
                                       const MemberSpec& spec) {
  const Eigen::VectorXd ea = spec.axial_stiffness();
  Eigen::VectorXd l0(t.size());
  for (Eigen::Index c = 0; c < t.size(); ++c) {
    if (!(t[c] > -ea[c]))
      throw ValidationError("tension " + std::to_string(t[c]) + " on cluster " +
                            std::to_string(c) + " is at or below -EA");
    l0[c] = ea[c] * lc[c] / (t[c] + ea[c]);
  }
  return l0;
}

// Clusters whose material stiffness is active (all, unless slack and unstretched).
inline Eigen::VectorXd effective_axial_stiffness(const Eigen::VectorXd& lc, const MemberSpec& spec,
                                                 TensionModel model) {
  Eigen::VectorXd ea = spec.axial_stiffness();
  if (model == TensionModel::kSlack)
    for (Eigen::Index c = 0; c < ea.size(); ++c)
      if (lc[c] < spec.rest_length[c]) ea[c] = 0.0;
  return ea;
}

// ---------------------------------------------------------------------------
// Equilibrium and compatibility

// A_2c: 3n_n x n_ec, maps cluster tensions to internal nodal forces.
inline Eigen::MatrixXd equilibrium_matrix(const Topology& topo, const MemberGeometry& g) {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(3 * topo.node_count, topo.cluster_count());
  for (int c = 0; c < topo.cluster_count(); ++c) {
    for (int k : topo.clusters[c].members) {
      const auto& m = topo.members[k];
      for (int d = 0; d < 3; ++d) {
        A(3 * m.tail + d, c) += (-1.0 * g.H(d, k)) / g.l[k];
        A(3 * m.head + d, c) += (1.0 * g.H(d, k)) / g.l[k];
      }
    }
  }
  return A;
}

// B_lc: n_ec x 3n_n, B_lc dn = dl_c. Same arithmetic as equilibrium_matrix.
inline Eigen::MatrixXd compatibility_matrix(const Topology& topo, const MemberGeometry& g) {
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(topo.cluster_count(), 3 * topo.node_count);
  for (int c = 0; c < topo.cluster_count(); ++c) {
    for (int k : topo.clusters[c].members) {
      const auto& m = topo.members[k];
      for (int d = 0; d < 3; ++d) {
        B(c, 3 * m.tail + d) += (-1.0 * g.H(d, k)) / g.l[k];
        B(c, 3 * m.head + d) += (1.0 * g.H(d, k)) / g.l[k];
      }
    }
  }
  return B;
}

// A_2: the equilibrium matrix before clustering (3n_n x n_e).
inline Eigen::MatrixXd unclustered_equilibrium_matrix(const Topology& topo, const MemberGeometry& g) {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(3 * topo.node_count, topo.member_count());
  for (int k = 0; k < topo.member_count(); ++k) {
    const auto& m = topo.members[k];
    for (int d = 0; d < 3; ++d) {
      A(3 * m.tail + d, k) = -g.H(d, k) / g.l[k];
      A(3 * m.head + d, k) = g.H(d, k) / g.l[k];
    }
  }
  return A;
}

// Ā_2c = E_aᵀ A_2c.
inline Eigen::MatrixXd constrained_equilibrium_matrix(const Topology& topo, const Eigen::MatrixXd& a2c) {
  return gather_rows(a2c, topo.free_dofs());
}

inline Eigen::VectorXd member_tensions(const Topology& topo, const Eigen::VectorXd& tc) {
  Eigen::VectorXd t(topo.member_count());
  for (int k = 0; k < topo.member_count(); ++k) t[k] = tc[topo.cluster_of(k)];
  return t;
}

// ---------------------------------------------------------------------------
// Stiffness

struct StiffnessMatrices {
  Eigen::MatrixXd K;   // force-density stiffness, K n = A_2c t_c
  Eigen::MatrixXd KG;  // geometric
  Eigen::MatrixXd KE;  // material
  Eigen::MatrixXd KT;  // tangent, KG + KE
};

inline StiffnessMatrices stiffness_matrices(const Topology& topo, const MemberGeometry& g,
                                            const MemberSpec& spec, const Eigen::VectorXd& tc,
                                            TensionModel model = TensionModel::kTaut) {
  const Eigen::MatrixXd C = connectivity_matrix(topo);
  const Eigen::VectorXd density = member_tensions(topo, tc).cwiseQuotient(g.l);
  StiffnessMatrices s;
  s.K = kron_i3(C.transpose() * density.asDiagonal() * C);
  const Eigen::MatrixXd A2 = unclustered_equilibrium_matrix(topo, g);
  s.KG = s.K - A2 * density.asDiagonal() * A2.transpose();
  const Eigen::MatrixXd A2c = equilibrium_matrix(topo, g);
  const Eigen::VectorXd kc =
      effective_axial_stiffness(g.lc, spec, model).cwiseQuotient(spec.rest_length);
  s.KE = A2c * kc.asDiagonal() * A2c.transpose();
  s.KT = s.KG + s.KE;
  return s;
}

// ---------------------------------------------------------------------------
// Mass, damping, gravity

// Per-member rest lengths: each cluster's rest length split in proportion to
// the current member lengths (uniform strain along a frictionless cable).
inline Eigen::VectorXd member_rest_lengths(const Topology& topo, const MemberGeometry& g,
                                           const Eigen::VectorXd& rest_length) {
  Eigen::VectorXd l0(topo.member_count());
  for (int k = 0; k < topo.member_count(); ++k) {
    const int c = topo.cluster_of(k);
    l0[k] = g.l[k] * rest_length[c] / g.lc[c];
  }
  return l0;
}

inline Eigen::VectorXd member_masses(const MemberSpec& spec, const Eigen::VectorXd& member_l0) {
  return spec.density.cwiseProduct(spec.area).cwiseProduct(member_l0);
}

// Consistent bar mass plus point masses on the diagonal.
inline Eigen::MatrixXd mass_matrix(const Topology& topo, const Eigen::VectorXd& m,
                                   const Eigen::VectorXd& point_mass) {
  const Eigen::MatrixXd absC = connectivity_matrix(topo).cwiseAbs();
  Eigen::MatrixXd P = absC.transpose() * m.asDiagonal() * absC;
  P.diagonal() *= 2.0;
  P /= 6.0;
  P.diagonal() += point_mass;
  return kron_i3(P);
}

// Nodal gravity load: half of each member's weight to each end, plus point masses.
inline Eigen::VectorXd gravity_vector(const Topology& topo, const Eigen::VectorXd& m,
                                      const Eigen::VectorXd& point_mass, const Eigen::Vector3d& g0) {
  Eigen::VectorXd w = point_mass;
  for (int k = 0; k < topo.member_count(); ++k) {
    w[topo.members[k].tail] += 0.5 * m[k];
    w[topo.members[k].head] += 0.5 * m[k];
  }
  Eigen::VectorXd g(3 * topo.node_count);
  for (int i = 0; i < topo.node_count; ++i) g.segment<3>(3 * i) = w[i] * g0;
  return g;
}

// Per-cluster critical damping coefficient 2/sqrt(3) rho^e A E^e, with rho the
// mean member density of the cluster.
inline Eigen::VectorXd critical_damping(const Topology& topo, const MemberSpec& spec, double exponent) {
  Eigen::VectorXd d(topo.cluster_count());
  for (int c = 0; c < topo.cluster_count(); ++c) {
    double rho = 0.0;
    for (int k : topo.clusters[c].members) rho += spec.density[k];
    rho /= static_cast<double>(topo.clusters[c].members.size());
    d[c] = 2.0 * std::sqrt(3.0) / 3.0 * std::pow(rho, exponent) * spec.cluster_area[c] *
           std::pow(spec.modulus[c], exponent);
  }
  return d;
}

inline Eigen::MatrixXd damping_matrix(const Topology& topo, const Eigen::MatrixXd& a2c,
                                      const MemberSpec& spec, double exponent) {
  if (spec.damping_coeff == 0.0)
    return Eigen::MatrixXd::Zero(3 * topo.node_count, 3 * topo.node_count);
  const Eigen::VectorXd d = spec.damping_coeff * critical_damping(topo, spec, exponent);
  return a2c * d.asDiagonal() * a2c.transpose();
}

// Derivative of the gravity load with respect to the coordinates. Nonzero
// because member masses follow the length-proportional rest-length split.
inline Eigen::MatrixXd gravity_jacobian(const Topology& topo, const MemberGeometry& g,
                                        const MemberSpec& spec) {
  const int n = 3 * topo.node_count;
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  if (spec.gravity.isZero(0.0)) return J;
  const Eigen::MatrixXd A2 = unclustered_equilibrium_matrix(topo, g);
  const Eigen::MatrixXd A2c = equilibrium_matrix(topo, g);
  for (int k = 0; k < topo.member_count(); ++k) {
    const int c = topo.cluster_of(k);
    const double coef = spec.density[k] * spec.area[k] * spec.rest_length[c] / g.lc[c];
    // dm_k/dn = coef * (dl_k/dn - l_k/L_c dL_c/dn)
    const Eigen::RowVectorXd dm =
        coef * (A2.col(k).transpose() - (g.l[k] / g.lc[c]) * A2c.col(c).transpose());
    for (int node : {topo.members[k].tail, topo.members[k].head})
      for (int d = 0; d < 3; ++d) J.row(3 * node + d) += 0.5 * spec.gravity[d] * dm;
  }
  return J;
}

// ---------------------------------------------------------------------------
// Sensitivities

struct Sensitivities {
  Eigen::MatrixXd K_l0c;     // d(internal force)/d l0c, 3n_n x n_ec
  Eigen::MatrixXd K_na_l0c;  // d n_a / d l0c, n_a x n_ec
  Eigen::MatrixXd K_na_w;    // d n_a / d w, n_a x 3n_n
  Eigen::MatrixXd K_tc_l0c;  // d t_c / d l0c, n_ec x n_ec
  Eigen::MatrixXd K_tc_w;    // d t_c / d w, n_ec x 3n_n
};

// Number of eigenvalues of a symmetric matrix with |lambda| <= rel * max|lambda|.
inline int null_dimension(const Eigen::MatrixXd& sym, double rel = 1e-10) {
  if (sym.size() == 0) return 0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd lam = es.eigenvalues();
  const double cut = rel * lam.cwiseAbs().maxCoeff();
  int count = 0;
  for (Eigen::Index i = 0; i < lam.size(); ++i)
    if (std::abs(lam[i]) <= cut) ++count;
  return count;
}

inline Sensitivities sensitivity_matrices(const Topology& topo, const MemberGeometry& g,
                                          const MemberSpec& spec, const Eigen::MatrixXd& a2c,
                                          const Eigen::MatrixXd& KT,
                                          TensionModel model = TensionModel::kTaut) {
  const Eigen::VectorXd ea = effective_axial_stiffness(g.lc, spec, model);
  const Eigen::VectorXd& l0 = spec.rest_length;
  const Eigen::MatrixXd KTaa = partition(topo, KT).aa;
  if (const int nd = null_dimension(KTaa); nd > 0)
    throw SingularStiffnessError(
        "tangent stiffness of free nodes is singular (null space dimension " + std::to_string(nd) + ")",
        nd);
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(KTaa);

  const int na = topo.free_count() * 3;
  Eigen::MatrixXd select = Eigen::MatrixXd::Zero(na, 3 * topo.node_count);
  for (int i = 0; i < na; ++i) select(i, topo.free_dofs()[i]) = 1.0;
  const Eigen::MatrixXd Aa = gather_rows(a2c, topo.free_dofs());

  Sensitivities s;
  const Eigen::VectorXd dt_dl0 = ea.cwiseProduct(g.lc).cwiseQuotient(l0.cwiseProduct(l0));
  s.K_l0c = -a2c * dt_dl0.asDiagonal();
  s.K_na_l0c = -lu.solve(gather_rows(s.K_l0c, topo.free_dofs()));
  s.K_na_w = lu.solve(select);
  const Eigen::VectorXd kc = ea.cwiseQuotient(l0);
  Eigen::MatrixXd inner = Aa.transpose() * s.K_na_l0c;
  inner.diagonal() -= g.lc.cwiseQuotient(l0);
  s.K_tc_l0c = kc.asDiagonal() * inner;
  s.K_tc_w = kc.asDiagonal() * (Aa.transpose() * s.K_na_w);
  return s;
}

// ---------------------------------------------------------------------------
// Everything at one configuration.

struct AssembledSystem {
  MemberGeometry geometry;
  Eigen::VectorXd tensions;  // t_c after the tension model
  Eigen::MatrixXd eq_matrix;
  Eigen::MatrixXd compat_matrix;
  StiffnessMatrices stiffness;
  Eigen::VectorXd member_rest_length;
  Eigen::VectorXd member_mass;
  Eigen::MatrixXd mass;
  Eigen::MatrixXd damping;
  Eigen::VectorXd gravity_force;
};

inline AssembledSystem assemble(const Model& model, const Eigen::VectorXd& coords) {
  const Topology& topo = model.topology;
  AssembledSystem sys;
  sys.geometry = member_lengths(topo, coords);
  sys.tensions = cluster_tensions(sys.geometry.lc, model.spec, model.options.tension_model);
  sys.eq_matrix = equilibrium_matrix(topo, sys.geometry);
  sys.compat_matrix = compatibility_matrix(topo, sys.geometry);
  sys.stiffness = stiffness_matrices(topo, sys.geometry, model.spec, sys.tensions,
                                     model.options.tension_model);
  sys.member_rest_length = member_rest_lengths(topo, sys.geometry, model.spec.rest_length);
  sys.member_mass = member_masses(model.spec, sys.member_rest_length);
  sys.mass = mass_matrix(topo, sys.member_mass, model.point_mass);
  sys.damping = damping_matrix(topo, sys.eq_matrix, model.spec, model.options.damping_exponent);
  sys.gravity_force = gravity_vector(topo, sys.member_mass, model.point_mass, model.spec.gravity);
  return sys;
}

inline Sensitivities sensitivity_matrices(const Model& model, const AssembledSystem& sys) {
  return sensitivity_matrices(model.topology, sys.geometry, model.spec, sys.eq_matrix,
                              sys.stiffness.KT, model.options.tension_model);
}

}  // namespace ctsnet
