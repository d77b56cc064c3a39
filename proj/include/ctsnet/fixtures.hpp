#pragma once

// The two shipped models: the large-span p=20, q=2 saddle net and the
// desk-scale p=12, q=1 laboratory net.

#include <Eigen/Dense>

#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "ctsnet/assembly.hpp"
#include "ctsnet/geometry.hpp"
#include "ctsnet/model.hpp"
#include "ctsnet/statics.hpp"

namespace ctsnet {

inline constexpr double kStandardGravity = 9.81;

struct Fixture {
  std::string name;
  std::optional<CableNetParams> params;
  Model model;
  Configuration config;
};

// Prestressed equilibrium of a generated net: rest lengths shortened by a
// uniform strain, form-found, then re-tensioned so `designed` carries
// `target` and the rest lengths recomputed for that prestress.
inline Fixture prestressed_net(std::string name, const CableNetParams& prm, Model model,
                               double shape_strain, int designed, double target) {
  CableNet net = build_topology(prm);
  model.topology = net.topology;
  model.spec.rest_length = member_lengths(model.topology, net.config.coords).lc / (1.0 + shape_strain);
  const FormFindResult ff = form_find(model, net.config);
  const PrestressSolution sol =
      prestress_design(model, ff.config.coords, {}, {designed}, Eigen::VectorXd::Constant(1, target));
  model.spec.rest_length =
      rest_length_for(sol.tensions, member_lengths(model.topology, ff.config.coords).lc, model.spec);
  return {std::move(name), prm, std::move(model), ff.config};
}

inline Fixture saddle_paper() {
  CableNetParams prm;
  prm.p = 20;
  prm.q = 2;
  prm.rx = 67.6577;
  prm.ry = 47.8161;
  prm.a = 27.2424;
  prm.b = 62.3442;
  prm.c = 0.253214;
  const Topology topo = build_topology(prm).topology;
  Model model;
  model.spec = uniform_spec(topo, 7850.0, 2.0e11, 2.0e-4, Eigen::VectorXd::Ones(topo.cluster_count()));
  model.spec.damping_coeff = 0.02;
  model.point_mass = Eigen::VectorXd::Zero(topo.node_count);
  return prestressed_net("saddle-paper", prm, std::move(model), 0.1, 0, 1.0e4);
}

inline Fixture saddle_lab() {
  CableNetParams prm;
  prm.p = 12;
  prm.q = 1;
  prm.rx = 0.525;
  prm.ry = 0.525;
  prm.a = 1.05;
  prm.b = 1.05;
  prm.c = 0.15 / 0.525;
  const Topology topo = build_topology(prm).topology;
  const double area = std::numbers::pi * 0.3e-3 * 0.3e-3;  // 0.6 mm rope
  const double modulus = 3000.0 / area;                     // EA = 3000 N
  Model model;
  model.spec = uniform_spec(topo, 1150.0, modulus, area, Eigen::VectorXd::Ones(topo.cluster_count()));
  model.spec.damping_coeff = 0.02;
  model.point_mass = Eigen::VectorXd::Zero(topo.node_count);
  for (int n = 0; n < topo.node_count; ++n)
    model.point_mass[n] = (topo.is_fixed(n) ? 0.5 : 1.6) / kStandardGravity;
  return prestressed_net("saddle-lab", prm, std::move(model), 0.05, 0, 20.0);
}

inline Fixture fixture_by_name(const std::string& name) {
  if (name == "saddle-paper") return saddle_paper();
  if (name == "saddle-lab") return saddle_lab();
  throw ValidationError("unknown fixture '" + name + "' (expected saddle-paper or saddle-lab)");
}

}  // namespace ctsnet
