#include <gtest/gtest.h>

#include <cmath>

#include "ctsnet/dynamics.hpp"
#include "ctsnet/fixtures.hpp"

using namespace ctsnet;

namespace {

Fixture lab_undamped() {
  Fixture fx = saddle_lab();
  fx.model.spec.damping_coeff = 0.0;
  return fx;
}

// Free-node state displaced along a smooth pattern.
DynamicState kicked(const StructureDynamics& dyn, const Eigen::VectorXd& coords, double amp) {
  DynamicState s = dyn.rest_state(coords);
  for (Eigen::Index i = 0; i < s.coords.size(); ++i) s.coords[i] += amp * std::sin(1.7 * static_cast<double>(i) + 0.3);
  return s;
}

}  // namespace

TEST(Dynamics, EquilibriumHasNoAcceleration) {
  const Fixture fx = saddle_lab();
  const StructureDynamics dyn(fx.model, fx.config.coords);
  const Eigen::VectorXd a = dyn.acceleration(dyn.rest_state(fx.config.coords), fx.model.spec.rest_length);
  EXPECT_LT(a.lpNorm<Eigen::Infinity>(), 1e-6);
}

TEST(Dynamics, FreeFall) {
  Fixture fx = saddle_lab();
  fx.model.spec.gravity = Eigen::Vector3d(0, 0, -9.81);
  fx.model.spec.damping_coeff = 0.0;
  fx.model.options.tension_model = TensionModel::kSlack;
  const StructureDynamics dyn(fx.model, fx.config.coords);
  const Eigen::VectorXd slack = 10.0 * member_lengths(fx.model.topology, fx.config.coords).lc;
  const Eigen::VectorXd a = dyn.acceleration(dyn.rest_state(fx.config.coords), slack);
  // Consistent mass couples free nodes to the supports, so only M_aa a = g_a holds exactly.
  Model m = fx.model;
  m.spec.rest_length = slack;  // member masses follow the rest lengths
  const AssembledSystem sys = assemble(m, fx.config.coords);
  const Eigen::MatrixXd Maa = partition(fx.model.topology, sys.mass).aa;
  const Eigen::VectorXd ga = gather(sys.gravity_force, fx.model.topology.free_dofs());
  EXPECT_LT((Maa * a - ga).norm(), 1e-12 * ga.norm());
  double mean_z = 0.0;
  for (Eigen::Index i = 2; i < a.size(); i += 3) mean_z += a[i] / (a.size() / 3);
  EXPECT_NEAR(mean_z, -9.81, 0.05);
}

TEST(Dynamics, StationaryAtEquilibrium) {
  const Fixture fx = saddle_lab();
  const StructureDynamics dyn(fx.model, fx.config.coords);
  const auto hist = integrate(dyn, dyn.rest_state(fx.config.coords), ActuationSchedule::constant(fx.model.spec.rest_length),
                              1e-4, 1.0, {1000});
  const double scale = bounding_diagonal(fx.config.coords);
  EXPECT_EQ(hist.back().step, 10000u);
  EXPECT_LT((hist.back().coords - fx.config.coords).cwiseAbs().maxCoeff(), 1e-9 * scale);
}

TEST(Dynamics, EnergyConservedWithoutDamping) {
  const Fixture fx = lab_undamped();
  const StructureDynamics dyn(fx.model, fx.config.coords);
  const Eigen::VectorXd l0 = fx.model.spec.rest_length;
  const DynamicState s0 = kicked(dyn, fx.config.coords, 2e-3);
  const EnergyBreakdown e0 = dyn.energy(s0, l0);
  double worst = 0.0;
  IntegrateOptions opt;
  opt.record_every = 100;
  opt.on_record = [&](const HistoryRecord& r) {
    const DynamicState s{gather(r.coords, fx.model.topology.free_dofs()), r.velocity, r.time};
    worst = std::max(worst, std::abs(dyn.energy(s, l0).total() - e0.total()));
  };
  integrate(dyn, s0, ActuationSchedule::constant(l0), 1e-4, 1.0, opt);
  EXPECT_LE(worst, 1e-4 * e0.elastic);
}

TEST(Dynamics, DampingDissipates) {
  const Fixture fx = saddle_lab();
  const StructureDynamics dyn(fx.model, fx.config.coords);
  const Eigen::VectorXd l0 = fx.model.spec.rest_length;
  const DynamicState s0 = kicked(dyn, fx.config.coords, 2e-3);
  std::vector<double> e;
  IntegrateOptions opt;
  opt.record_every = 50;
  opt.on_record = [&](const HistoryRecord& r) {
    e.push_back(dyn.energy({gather(r.coords, fx.model.topology.free_dofs()), r.velocity, r.time}, l0).total());
  };
  integrate(dyn, s0, ActuationSchedule::constant(l0), 2e-4, 1.0, opt);
  for (std::size_t i = 1; i < e.size(); ++i) EXPECT_LE(e[i], e[i - 1] + 1e-9 * std::abs(e[0]));
  EXPECT_LT(e.back(), e.front());
}

TEST(Dynamics, FourthOrderConvergence) {
  const Fixture fx = lab_undamped();
  const StructureDynamics dyn(fx.model, fx.config.coords);
  const auto sched = ActuationSchedule::constant(fx.model.spec.rest_length);
  const DynamicState s0 = kicked(dyn, fx.config.coords, 2e-3);
  const double dt = 1e-3, t_end = 0.2;
  auto end_state = [&](double h) { return integrate(dyn, s0, sched, h, t_end, {1000000}).back().coords; };
  const Eigen::VectorXd ref = end_state(dt / 8);
  const double e1 = (end_state(dt) - ref).norm();
  const double e2 = (end_state(dt / 2) - ref).norm();
  const double ratio = e1 / e2;
  EXPECT_GT(ratio, 12.0);
  EXPECT_LT(ratio, 20.0);
}

TEST(Dynamics, ScheduleInterpolation) {
  ActuationSchedule s;
  s.times = {0.0, 1.0, 3.0};
  s.rest_lengths = {Eigen::VectorXd::Constant(1, 2.0), Eigen::VectorXd::Constant(1, 1.0),
                    Eigen::VectorXd::Constant(1, 2.0)};
  EXPECT_DOUBLE_EQ(s.at(-1.0)[0], 2.0);
  EXPECT_DOUBLE_EQ(s.at(0.5)[0], 1.5);
  EXPECT_DOUBLE_EQ(s.at(2.0)[0], 1.5);
  EXPECT_DOUBLE_EQ(s.at(5.0)[0], 2.0);
  s.times = {0.0, 0.0, 1.0};
  EXPECT_THROW(s.validate(), ValidationError);
}

TEST(Dynamics, DefaultTimeStepResolvesStiffestMode) {
  const Fixture fx = saddle_lab();
  const double f = highest_frequency(fx.model, fx.config.coords);
  EXPECT_GT(f, 0.0);
  EXPECT_NEAR(default_time_step(fx.model, fx.config.coords) * f, 1.0 / 50.0, 1e-15);
}

TEST(Dynamics, BoundaryAccelerationThroughCouplingMass) {
  const Fixture fx = saddle_lab();
  const StructureDynamics dyn(fx.model, fx.config.coords);
  const DynamicState s = dyn.rest_state(fx.config.coords);
  BoundaryMotion bm;
  bm.velocity = Eigen::VectorXd::Zero(fx.model.topology.fixed_dofs().size());
  bm.acceleration = Eigen::VectorXd::Zero(bm.velocity.size());
  for (Eigen::Index i = 2; i < bm.acceleration.size(); i += 3) bm.acceleration[i] = 1.0;
  const Eigen::VectorXd a0 = dyn.acceleration(s, fx.model.spec.rest_length);
  const Eigen::VectorXd a = dyn.acceleration(s, fx.model.spec.rest_length, {}, &bm);
  const Partitioned M = partition(fx.model.topology, assemble(fx.model, fx.config.coords).mass);
  const Eigen::VectorXd expect = a0 - M.aa.llt().solve(M.ab * bm.acceleration);
  EXPECT_LT((a - expect).norm(), 1e-10 * expect.norm());
}
