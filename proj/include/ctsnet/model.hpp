#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "ctsnet/errors.hpp"
#include "ctsnet/topology.hpp"

namespace ctsnet {

// Taut: negative cable tension is an error. Slack: clamp to zero and drop the
// cluster's material stiffness.
enum class TensionModel { kTaut, kSlack };

struct MemberSpec {
  Eigen::VectorXd density;       // per member, kg/m^3
  Eigen::VectorXd area;          // per member, m^2
  Eigen::VectorXd modulus;       // per cluster, Pa
  Eigen::VectorXd cluster_area;  // per cluster, m^2
  Eigen::VectorXd rest_length;   // per cluster, m
  double damping_coeff = 0.0;
  Eigen::Vector3d gravity = Eigen::Vector3d::Zero();  // m/s^2

  Eigen::VectorXd axial_stiffness() const {
    return modulus.cwiseProduct(cluster_area);
  }
};

struct AssemblyOptions {
  TensionModel tension_model = TensionModel::kTaut;
  // Exponent on density and modulus in the critical damping coefficient.
  double damping_exponent = 0.5;
};

struct Model {
  Topology topology;
  MemberSpec spec;
  Eigen::VectorXd point_mass;  // per node, kg (pulleys)
  AssemblyOptions options;

  void validate() const;
};

namespace detail {

inline void require_size(const Eigen::VectorXd& v, int n, const std::string& field) {
  if (v.size() != n)
    throw ValidationError(field + ": expected " + std::to_string(n) + " entries, got " +
                          std::to_string(v.size()));
}

inline void require_positive(const Eigen::VectorXd& v, const std::string& field) {
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (!(v[i] > 0) || !std::isfinite(v[i]))
      throw ValidationError(field + "[" + std::to_string(i) + "]: must be > 0");
}

}  // namespace detail

inline void validate_spec(const Topology& topo, const MemberSpec& s) {
  detail::require_size(s.density, topo.member_count(), "materials.density");
  detail::require_size(s.area, topo.member_count(), "materials.area");
  detail::require_size(s.modulus, topo.cluster_count(), "materials.modulus");
  detail::require_size(s.cluster_area, topo.cluster_count(), "materials.cluster_area");
  detail::require_size(s.rest_length, topo.cluster_count(), "materials.rest_length");
  detail::require_positive(s.density, "materials.density");
  detail::require_positive(s.area, "materials.area");
  detail::require_positive(s.modulus, "materials.modulus");
  detail::require_positive(s.cluster_area, "materials.cluster_area");
  detail::require_positive(s.rest_length, "materials.rest_length");
  if (!(s.damping_coeff >= 0)) throw ValidationError("materials.damping: must be >= 0");
  if (!s.gravity.allFinite()) throw ValidationError("gravity: must be finite");
}

inline void Model::validate() const {
  validate_spec(topology, spec);
  detail::require_size(point_mass, topology.node_count, "point_masses");
  for (Eigen::Index i = 0; i < point_mass.size(); ++i)
    if (!(point_mass[i] >= 0))
      throw ValidationError("point_masses[" + std::to_string(i) + "]: must be >= 0");
  if (!(options.damping_exponent > 0))
    throw ValidationError("options.damping_exponent: must be > 0");
}

// Uniform material across every member and cluster.
inline MemberSpec uniform_spec(const Topology& topo, double density, double modulus, double area,
                               const Eigen::VectorXd& rest_length) {
  MemberSpec s;
  s.density = Eigen::VectorXd::Constant(topo.member_count(), density);
  s.area = Eigen::VectorXd::Constant(topo.member_count(), area);
  s.modulus = Eigen::VectorXd::Constant(topo.cluster_count(), modulus);
  s.cluster_area = Eigen::VectorXd::Constant(topo.cluster_count(), area);
  s.rest_length = rest_length;
  return s;
}

}  // namespace ctsnet
