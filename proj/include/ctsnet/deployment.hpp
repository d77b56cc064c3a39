#pragma once

// Deployment trajectory over equilibrium states, prestress redesign along the
// trajectory, and open-loop / hoop-tension feedback deployment simulations.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ctsnet/assembly.hpp"
#include "ctsnet/dynamics.hpp"
#include "ctsnet/errors.hpp"
#include "ctsnet/model.hpp"
#include "ctsnet/statics.hpp"

namespace ctsnet {

struct PlanState {
  Eigen::VectorXd rest_lengths;
  Eigen::VectorXd tensions;
  Eigen::VectorXd coords;
  Eigen::VectorXd cluster_lengths;
  double residual = 0.0;
};

struct DeploymentPlan {
  PlanState initial;
  std::vector<PlanState> substeps;  // after each rest-length decrement
  std::vector<int> actuated;
  std::vector<int> designed;        // empty before redesign
  Eigen::VectorXd targets;
};

class TrajectoryError : public Error {
 public:
  TrajectoryError(const std::string& what, int substep, DeploymentPlan partial, ExitCode code)
      : Error(what, code), substep_(substep), partial_(std::move(partial)) {}
  int substep() const noexcept { return substep_; }
  const DeploymentPlan& partial_plan() const noexcept { return partial_; }

 private:
  int substep_;
  DeploymentPlan partial_;
};

namespace detail {

inline double free_residual(const Model& model, const Eigen::VectorXd& coords) {
  const auto s = evaluate_static(model, coords, {});
  return s.residual.lpNorm<Eigen::Infinity>();
}

inline PlanState plan_state(const Model& model, const FormFindResult& ff) {
  PlanState s;
  s.rest_lengths = model.spec.rest_length;
  s.tensions = ff.tensions;
  s.coords = ff.config.coords;
  s.cluster_lengths = member_lengths(model.topology, s.coords).lc;
  s.residual = ff.residual;
  return s;
}

}  // namespace detail

// Shortens the actuated clusters by total_delta in n_substeps equal decrements,
// form-finding each state warm-started from the previous one. Other clusters
// keep their rest length.
inline DeploymentPlan design_trajectory(Model model, const Eigen::VectorXd& start_coords,
                                        const std::vector<int>& actuated, double total_delta,
                                        int n_substeps, const FormFindOptions& ff_opt = {}) {
  if (n_substeps < 1) throw ValidationError("substeps must be >= 1");
  for (int c : actuated)
    if (c < 0 || c >= model.topology.cluster_count())
      throw ValidationError("actuated cluster index out of range");
  DeploymentPlan plan;
  plan.actuated = actuated;
  const Eigen::VectorXd l0_start = model.spec.rest_length;
  FormFindResult ff = form_find(model, {start_coords}, {}, ff_opt);
  plan.initial = detail::plan_state(model, ff);
  for (int k = 1; k <= n_substeps; ++k) {
    Eigen::VectorXd l0 = l0_start;
    for (int c : actuated) l0[c] -= total_delta * k / n_substeps;
    try {
      model.spec.rest_length = l0;
      ff = form_find(model, ff.config, {}, ff_opt);
    } catch (const Error& e) {
      throw TrajectoryError("trajectory substep " + std::to_string(k) + ": " + e.what(), k, plan, e.code());
    }
    plan.substeps.push_back(detail::plan_state(model, ff));
  }
  return plan;
}

// Replaces each state's tensions by the designed prestress at that geometry
// and recomputes the rest lengths that realize them.
inline DeploymentPlan redesign_plan_prestress(const Model& model, const DeploymentPlan& plan,
                                              const std::vector<int>& designed,
                                              const Eigen::VectorXd& targets) {
  DeploymentPlan out = plan;
  out.designed = designed;
  out.targets = targets;
  auto redesign = [&](PlanState& s) {
    const PrestressSolution sol = prestress_design(model, s.coords, {}, designed, targets);
    s.tensions = sol.tensions;
    s.rest_lengths = rest_length_for(sol.tensions, s.cluster_lengths, model.spec);
    Model m = model;
    m.spec.rest_length = s.rest_lengths;
    s.residual = detail::free_residual(m, s.coords);
  };
  redesign(out.initial);
  for (auto& s : out.substeps) redesign(s);
  return out;
}

// ---------------------------------------------------------------------------
// Model error injection

struct ErrorModel {
  // Per-cluster multiplicative drift of the spooled rest-length change
  // (commanded minus initial); empty means none.
  Eigen::VectorXd rest_length_bias;
  // Std-dev of a per-step random rest-length perturbation, relative to the
  // commanded rest length.
  double rest_length_noise = 0.0;
  // Uniform random offset of the free-node start coordinates, relative to
  // the bounding-box diagonal.
  double initial_offset = 0.0;
  std::uint64_t seed = 0;

  void validate(int clusters) const {
    if (rest_length_bias.size() && rest_length_bias.size() != clusters)
      throw ValidationError("error model: one bias per cluster required");
    if (!(rest_length_noise >= 0) || !(initial_offset >= 0))
      throw ValidationError("error model: magnitudes must be >= 0");
  }
  bool is_zero() const {
    return (rest_length_bias.size() == 0 || rest_length_bias.isZero(0.0)) && rest_length_noise == 0 &&
           initial_offset == 0;
  }
};

// Actuator realization of commanded rest lengths for one substep. The noise
// draw is fixed when the substep begins so that repeated commands within a
// feedback loop see the same disturbance.
class Actuator {
 public:
  Actuator(const ErrorModel& em, Eigen::VectorXd initial_rest)
      : em_(em), initial_(std::move(initial_rest)), rng_(em.seed),
        noise_(Eigen::VectorXd::Zero(initial_.size())) {}

  void begin_substep() {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index c = 0; c < noise_.size(); ++c)
      noise_[c] = em_.rest_length_noise > 0 ? em_.rest_length_noise * normal(rng_) : 0.0;
  }

  Eigen::VectorXd realize(const Eigen::VectorXd& commanded) const {
    Eigen::VectorXd actual = commanded;
    for (Eigen::Index c = 0; c < actual.size(); ++c) {
      const double bias = em_.rest_length_bias.size() ? em_.rest_length_bias[c] : 0.0;
      actual[c] = initial_[c] + (commanded[c] - initial_[c]) * (1.0 + bias) + noise_[c] * commanded[c];
    }
    return actual;
  }

  Eigen::VectorXd offset_coords(const Topology& topo, Eigen::VectorXd coords) {
    if (em_.initial_offset == 0) return coords;
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    const double scale = em_.initial_offset * bounding_diagonal(coords);
    for (int i : topo.free_dofs()) coords[i] += scale * uni(rng_);
    return coords;
  }

 private:
  ErrorModel em_;
  Eigen::VectorXd initial_;
  std::mt19937_64 rng_;
  Eigen::VectorXd noise_;
};

// ---------------------------------------------------------------------------
// Deployment histories

struct DeployRecord {
  std::size_t step = 0;
  double time = 0.0;     // substep index (pseudo-static) or seconds (dynamic)
  double progress = 0.0; // fraction of the plan completed
  Eigen::VectorXd coords;
  Eigen::VectorXd cluster_lengths;
  Eigen::VectorXd rest_lengths;      // realized by the actuators
  Eigen::VectorXd commanded;         // sent to the actuators
  Eigen::VectorXd tensions;
  double residual = 0.0;
  int corrections = 0;
};

struct DeployMode {
  enum class Kind { kPseudoStatic, kDynamic } kind = Kind::kPseudoStatic;
  double duration = 0.0;       // seconds, dynamic only
  double dt = 0.0;             // <= 0 selects default_time_step()
  std::size_t record_every = 1;

  static DeployMode pseudo_static() { return {}; }
  static DeployMode dynamic(double duration, double dt = 0.0, std::size_t record_every = 1) {
    return {Kind::kDynamic, duration, dt, record_every};
  }
};

namespace detail {

inline DeployRecord static_record(std::size_t k, std::size_t n, const Model& model, const FormFindResult& ff,
                                  const Eigen::VectorXd& commanded, int corrections = 0) {
  DeployRecord r;
  r.step = k;
  r.time = static_cast<double>(k);
  r.progress = static_cast<double>(k) / static_cast<double>(n);
  r.coords = ff.config.coords;
  r.cluster_lengths = member_lengths(model.topology, r.coords).lc;
  r.rest_lengths = model.spec.rest_length;
  r.commanded = commanded;
  r.tensions = ff.tensions;
  r.residual = ff.residual;
  r.corrections = corrections;
  return r;
}

}  // namespace detail

// Applies the plan's rest lengths without feedback, either as a sequence of
// equilibria or as a linear-in-time actuation integrated dynamically.
inline std::vector<DeployRecord> open_loop_deploy(Model model, const DeploymentPlan& plan,
                                                  const DeployMode& mode, const ErrorModel& em,
                                                  const FormFindOptions& ff_opt = {}) {
  em.validate(model.topology.cluster_count());
  const std::size_t n = plan.substeps.size();
  Actuator act(em, plan.initial.rest_lengths);
  const Eigen::VectorXd start = act.offset_coords(model.topology, plan.initial.coords);
  std::vector<DeployRecord> out;

  if (mode.kind == DeployMode::Kind::kPseudoStatic) {
    model.spec.rest_length = plan.initial.rest_lengths;
    FormFindResult ff = form_find(model, {start}, {}, ff_opt);
    out.push_back(detail::static_record(0, n, model, ff, plan.initial.rest_lengths));
    for (std::size_t k = 1; k <= n; ++k) {
      const Eigen::VectorXd& cmd = plan.substeps[k - 1].rest_lengths;
      act.begin_substep();
      model.spec.rest_length = act.realize(cmd);
      ff = form_find(model, ff.config, {}, ff_opt);
      out.push_back(detail::static_record(k, n, model, ff, cmd));
    }
    return out;
  }

  if (!(mode.duration > 0)) throw ValidationError("dynamic deployment needs a positive duration");
  ActuationSchedule commanded, realized;
  for (std::size_t k = 0; k <= n; ++k) {
    const double t = mode.duration * static_cast<double>(k) / static_cast<double>(n);
    const Eigen::VectorXd& cmd = k == 0 ? plan.initial.rest_lengths : plan.substeps[k - 1].rest_lengths;
    if (k > 0) act.begin_substep();
    commanded.times.push_back(t);
    commanded.rest_lengths.push_back(cmd);
    realized.times.push_back(t);
    realized.rest_lengths.push_back(k == 0 ? cmd : act.realize(cmd));
  }
  model.spec.rest_length = plan.initial.rest_lengths;
  const double dt = mode.dt > 0 ? mode.dt : default_time_step(model, plan.initial.coords);
  StructureDynamics dyn(model, plan.initial.coords);
  IntegrateOptions iopt;
  iopt.record_every = mode.record_every;
  const auto hist = integrate(dyn, dyn.rest_state(start), realized, dt, mode.duration, iopt);
  for (const auto& h : hist) {
    DeployRecord r;
    r.step = h.step;
    r.time = h.time;
    r.progress = h.time / mode.duration;
    r.coords = h.coords;
    r.cluster_lengths = h.cluster_lengths;
    r.rest_lengths = h.rest_lengths;
    r.commanded = commanded.at(h.time);
    r.tensions = h.tensions;
    out.push_back(std::move(r));
  }
  return out;
}

struct GainPolicy {
  bool iterate = true;       // false: one correction per substep
  int max_iterations = 10;
  double tolerance = 1e-3;   // relative to the target tension
  bool relinearize = true;   // false: hold the start-state sensitivity
};

// Diagonal clusters follow the plan; the feedback cluster's rest length is
// corrected from its tension error through the scalar rest-length-to-tension
// sensitivity evaluated at the planned state of the substep. The measured
// shape is not paired with commanded rest lengths: under actuator error the
// two are inconsistent and can imply spurious compression.
inline std::vector<DeployRecord> closed_loop_deploy(Model model, const DeploymentPlan& plan, int feedback,
                                                    const ErrorModel& em, const GainPolicy& gain = {},
                                                    const FormFindOptions& ff_opt = {}) {
  em.validate(model.topology.cluster_count());
  if (feedback < 0 || feedback >= model.topology.cluster_count())
    throw ValidationError("feedback cluster index out of range");
  const std::size_t n = plan.substeps.size();
  Actuator act(em, plan.initial.rest_lengths);
  const Eigen::VectorXd start = act.offset_coords(model.topology, plan.initial.coords);

  auto sensitivity = [&](const Eigen::VectorXd& coords, const Eigen::VectorXd& commanded) {
    Model m = model;
    m.spec.rest_length = commanded;
    const AssembledSystem sys = assemble(m, coords);
    const double s = sensitivity_matrices(m, sys).K_tc_l0c(feedback, feedback);
    if (!std::isfinite(s) || std::abs(s) < 1e-12 * m.spec.axial_stiffness()[feedback] / commanded[feedback])
      throw ControlError("feedback sensitivity of cluster '" + m.topology.clusters[feedback].name +
                         "' is zero; control is singular");
    return s;
  };
  const double held = gain.relinearize ? 0.0 : sensitivity(plan.initial.coords, plan.initial.rest_lengths);

  std::vector<DeployRecord> out;
  model.spec.rest_length = plan.initial.rest_lengths;
  FormFindResult ff = form_find(model, {start}, {}, ff_opt);
  out.push_back(detail::static_record(0, n, model, ff, plan.initial.rest_lengths));
  double carried = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    const PlanState& target = plan.substeps[k - 1];
    const double goal = target.tensions[feedback];
    Eigen::VectorXd cmd = target.rest_lengths;
    cmd[feedback] += carried;
    act.begin_substep();
    model.spec.rest_length = act.realize(cmd);
    ff = form_find(model, ff.config, {}, ff_opt);
    double err = goal - ff.tensions[feedback];
    const int cap = gain.iterate ? gain.max_iterations : 1;
    int used = 0;
    while (std::abs(err) > gain.tolerance * std::abs(goal) && used < cap) {
      const double s = gain.relinearize ? sensitivity(target.coords, target.rest_lengths) : held;
      cmd[feedback] += err / s;
      if (!(cmd[feedback] > 0))
        throw ControlError("feedback drove the rest length of '" + model.topology.clusters[feedback].name +
                           "' non-positive");
      model.spec.rest_length = act.realize(cmd);
      ff = form_find(model, ff.config, {}, ff_opt);
      const double next = goal - ff.tensions[feedback];
      ++used;
      if (next * err < 0 && std::abs(next) > std::abs(err))
        throw ControlError("feedback on '" + model.topology.clusters[feedback].name + "' diverges at substep " +
                           std::to_string(k));
      err = next;
    }
    carried = cmd[feedback] - target.rest_lengths[feedback];
    out.push_back(detail::static_record(k, n, model, ff, cmd, used));
  }
  return out;
}

// Pseudo-static tension at a fraction of the plan: equilibrium under rest
// lengths interpolated linearly between plan states.
inline std::vector<Eigen::VectorXd> static_tension_curve(Model model, const DeploymentPlan& plan,
                                                         const std::vector<double>& progress,
                                                         const FormFindOptions& ff_opt = {}) {
  ActuationSchedule sched;
  const std::size_t n = plan.substeps.size();
  for (std::size_t k = 0; k <= n; ++k) {
    sched.times.push_back(static_cast<double>(k) / static_cast<double>(n));
    sched.rest_lengths.push_back(k == 0 ? plan.initial.rest_lengths : plan.substeps[k - 1].rest_lengths);
  }
  std::vector<Eigen::VectorXd> out;
  Configuration cfg{plan.initial.coords};
  for (double s : progress) {
    model.spec.rest_length = sched.at(s);
    FormFindResult ff = form_find(model, cfg, {}, ff_opt);
    cfg = ff.config;
    out.push_back(ff.tensions);
  }
  return out;
}

}  // namespace ctsnet
