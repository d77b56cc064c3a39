#pragma once

// Explicit Runge-Kutta integration of the constrained equations of motion
// with time-varying cluster rest lengths.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "ctsnet/assembly.hpp"
#include "ctsnet/errors.hpp"
#include "ctsnet/model.hpp"

namespace ctsnet {

// Free-node coordinates and velocities.
struct DynamicState {
  Eigen::VectorXd coords;
  Eigen::VectorXd velocity;
  double time = 0.0;
};

// Piecewise-linear per-cluster rest lengths; held constant outside the knots.
struct ActuationSchedule {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> rest_lengths;

  static ActuationSchedule constant(const Eigen::VectorXd& l0) { return {{0.0}, {l0}}; }

  void validate() const {
    if (times.empty() || times.size() != rest_lengths.size())
      throw ValidationError("actuation schedule: need one rest-length vector per knot");
    for (std::size_t i = 1; i < times.size(); ++i)
      if (!(times[i] > times[i - 1]))
        throw ValidationError("actuation schedule: knot times must be strictly increasing");
    for (const auto& l0 : rest_lengths)
      if (!(l0.minCoeff() > 0)) throw ValidationError("actuation schedule: rest lengths must be > 0");
  }

  Eigen::VectorXd at(double t) const {
    if (t <= times.front()) return rest_lengths.front();
    if (t >= times.back()) return rest_lengths.back();
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    const std::size_t i = static_cast<std::size_t>(it - times.begin());
    const double s = (t - times[i - 1]) / (times[i] - times[i - 1]);
    return (1.0 - s) * rest_lengths[i - 1] + s * rest_lengths[i];
  }
};

// Prescribed motion of the fixed coordinates (fixed-dof order). Only used to
// exercise the boundary coupling terms; supports are otherwise motionless.
struct BoundaryMotion {
  Eigen::VectorXd velocity;
  Eigen::VectorXd acceleration;
};

struct EnergyBreakdown {
  double kinetic = 0.0;
  double elastic = 0.0;
  double gravity = 0.0;
  double total() const { return kinetic + elastic + gravity; }
};

// Equations of motion of one model with its supports at the positions of a
// reference configuration.
class StructureDynamics {
 public:
  StructureDynamics(Model model, Eigen::VectorXd reference_coords)
      : model_(std::move(model)), base_(std::move(reference_coords)) {
    model_.validate();
    check_config(model_.topology, base_);
  }

  const Model& model() const { return model_; }
  const Eigen::VectorXd& reference() const { return base_; }
  int free_dof() const { return static_cast<int>(model_.topology.free_dofs().size()); }

  Eigen::VectorXd full_coords(const Eigen::VectorXd& free_coords) const {
    Eigen::VectorXd n = base_;
    scatter(free_coords, model_.topology.free_dofs(), n);
    return n;
  }

  DynamicState rest_state(const Eigen::VectorXd& coords) const {
    return {gather(coords, model_.topology.free_dofs()), Eigen::VectorXd::Zero(free_dof()), 0.0};
  }

  // Free-node accelerations with mass, damping and tensions reassembled at the
  // current coordinates and rest lengths.
  Eigen::VectorXd acceleration(const DynamicState& s, const Eigen::VectorXd& rest_length,
                               const Eigen::VectorXd& f_ex = {}, const BoundaryMotion* boundary = nullptr,
                               Eigen::VectorXd* tensions_out = nullptr) const {
    const Topology& topo = model_.topology;
    MemberSpec spec = model_.spec;
    spec.rest_length = rest_length;
    const Eigen::VectorXd n = full_coords(s.coords);
    const MemberGeometry g = member_lengths(topo, n);
    const Eigen::VectorXd t = cluster_tensions(g.lc, spec, model_.options.tension_model);
    const Eigen::MatrixXd a2c = equilibrium_matrix(topo, g);
    const Eigen::VectorXd m = member_masses(spec, member_rest_lengths(topo, g, rest_length));
    const Partitioned M = partition(topo, mass_matrix(topo, m, model_.point_mass));

    Eigen::VectorXd force = gravity_vector(topo, m, model_.point_mass, spec.gravity) - a2c * t;
    if (f_ex.size()) force += f_ex;
    Eigen::VectorXd rhs = gather(force, topo.free_dofs());
    if (spec.damping_coeff > 0) {
      const Partitioned D = partition(topo, damping_matrix(topo, a2c, spec, model_.options.damping_exponent));
      rhs -= D.aa * s.velocity;
      if (boundary && boundary->velocity.size()) rhs -= D.ab * boundary->velocity;
    }
    if (boundary && boundary->acceleration.size()) rhs -= M.ab * boundary->acceleration;
    Eigen::LLT<Eigen::MatrixXd> llt(M.aa);
    if (llt.info() != Eigen::Success)
      throw ValidationError("mass matrix of the free nodes is not positive definite");
    if (tensions_out) *tensions_out = t;
    return llt.solve(rhs);
  }

  EnergyBreakdown energy(const DynamicState& s, const Eigen::VectorXd& rest_length) const {
    const Topology& topo = model_.topology;
    const Eigen::VectorXd n = full_coords(s.coords);
    const MemberGeometry g = member_lengths(topo, n);
    const Eigen::VectorXd m = member_masses(model_.spec, member_rest_lengths(topo, g, rest_length));
    const Partitioned M = partition(topo, mass_matrix(topo, m, model_.point_mass));
    EnergyBreakdown e;
    e.kinetic = 0.5 * s.velocity.dot(M.aa * s.velocity);
    const Eigen::VectorXd ea = model_.spec.axial_stiffness();
    for (Eigen::Index c = 0; c < g.lc.size(); ++c) {
      const double stretch = g.lc[c] - rest_length[c];
      if (stretch < 0 && model_.options.tension_model == TensionModel::kSlack) continue;
      e.elastic += 0.5 * ea[c] / rest_length[c] * stretch * stretch;
    }
    e.gravity = -gravity_vector(topo, m, model_.point_mass, model_.spec.gravity).dot(n);
    return e;
  }

 private:
  Model model_;
  Eigen::VectorXd base_;
};

inline Eigen::VectorXd dynamics_rhs(const StructureDynamics& dyn, const DynamicState& s,
                                    const Eigen::VectorXd& rest_length, const Eigen::VectorXd& f_ex = {}) {
  return dyn.acceleration(s, rest_length, f_ex);
}

struct HistoryRecord {
  std::size_t step = 0;
  double time = 0.0;
  Eigen::VectorXd coords;  // all nodes
  Eigen::VectorXd velocity;  // free coordinates
  Eigen::VectorXd tensions;
  Eigen::VectorXd rest_lengths;
  Eigen::VectorXd cluster_lengths;
};

struct IntegrateOptions {
  std::size_t record_every = 1;
  Eigen::VectorXd f_ex;  // constant external load, empty for none
  std::function<void(const HistoryRecord&)> on_record;
};

// Largest natural frequency (Hz) at a configuration.
inline double highest_frequency(const Model& model, const Eigen::VectorXd& coords) {
  const AssembledSystem sys = assemble(model, coords);
  const Eigen::MatrixXd K = partition(model.topology, sys.stiffness.KT).aa;
  const Eigen::MatrixXd M = partition(model.topology, sys.mass).aa;
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> gs(K, M, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(gs.eigenvalues().maxCoeff(), 0.0)) / (2.0 * std::numbers::pi);
}

// One fiftieth of the period of the stiffest mode.
inline double default_time_step(const Model& model, const Eigen::VectorXd& coords) {
  return 1.0 / (50.0 * highest_frequency(model, coords));
}

// Classical fourth-order Runge-Kutta with fixed step. The record for step 0 is
// the initial state; records follow every `record_every` steps and at t_end.
inline std::vector<HistoryRecord> integrate(const StructureDynamics& dyn, DynamicState state,
                                            const ActuationSchedule& schedule, double dt, double t_end,
                                            const IntegrateOptions& opt = {}) {
  if (!(dt > 0)) throw ValidationError("time step must be > 0");
  if (!(t_end >= state.time)) throw ValidationError("end time precedes the initial time");
  schedule.validate();
  const int nf = dyn.free_dof();
  if (state.coords.size() != nf || state.velocity.size() != nf)
    throw ValidationError("dynamic state size does not match the free coordinates");

  const Topology& topo = dyn.model().topology;
  const double limit = 1e6 * std::max(bounding_diagonal(dyn.reference()), 1e-300);
  const auto steps = static_cast<std::size_t>(std::ceil((t_end - state.time) / dt - 1e-9));
  const double t0 = state.time;

  std::vector<HistoryRecord> history;
  auto record = [&](std::size_t step) {
    HistoryRecord r;
    r.step = step;
    r.time = state.time;
    r.coords = dyn.full_coords(state.coords);
    r.velocity = state.velocity;
    r.rest_lengths = schedule.at(state.time);
    MemberSpec spec = dyn.model().spec;
    spec.rest_length = r.rest_lengths;
    r.cluster_lengths = member_lengths(topo, r.coords).lc;
    r.tensions = cluster_tensions(r.cluster_lengths, spec, dyn.model().options.tension_model);
    if (opt.on_record) opt.on_record(r);
    history.push_back(std::move(r));
  };

  auto accel = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& v, double t) {
    return dyn.acceleration({x, v, t}, schedule.at(t), opt.f_ex);
  };

  record(0);
  for (std::size_t step = 1; step <= steps; ++step) {
    const double t = state.time;
    const double h = std::min(dt, t_end - t);
    const Eigen::VectorXd& x = state.coords;
    const Eigen::VectorXd& v = state.velocity;
    const Eigen::VectorXd a1 = accel(x, v, t);
    const Eigen::VectorXd v2 = v + 0.5 * h * a1;
    const Eigen::VectorXd a2 = accel(x + 0.5 * h * v, v2, t + 0.5 * h);
    const Eigen::VectorXd v3 = v + 0.5 * h * a2;
    const Eigen::VectorXd a3 = accel(x + 0.5 * h * v2, v3, t + 0.5 * h);
    const Eigen::VectorXd v4 = v + h * a3;
    const Eigen::VectorXd a4 = accel(x + h * v3, v4, t + h);
    state.coords = x + h / 6.0 * (v + 2.0 * v2 + 2.0 * v3 + v4);
    state.velocity = v + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
    state.time = (step == steps) ? t_end : t0 + static_cast<double>(step) * dt;
    if (!state.coords.allFinite() || state.coords.lpNorm<Eigen::Infinity>() > limit)
      throw IntegrationError("integration became unstable at step " + std::to_string(step), step);
    if (step % opt.record_every == 0 || step == steps) record(step);
  }
  return history;
}

}  // namespace ctsnet
