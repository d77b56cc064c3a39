#pragma once

// Newton-Raphson form-finding, SVD prestress design and eigen-analysis.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "ctsnet/assembly.hpp"
#include "ctsnet/errors.hpp"
#include "ctsnet/model.hpp"

namespace ctsnet {

struct FormFindOptions {
  double tol_force = 0.0;  // <= 0 selects default_force_tolerance()
  int max_iter = 100;
  int max_halvings = 20;
  bool load_stiffness = true;  // include d(gravity)/dn in the Newton Jacobian
};

struct IterationRecord {
  int iteration = 0;
  double residual = 0.0;   // infinity norm of the free-node unbalanced force
  double step_norm = 0.0;  // infinity norm of the accepted coordinate update
  double step_scale = 1.0; // backtracking factor; 0 marks a damped Gauss-Newton step
};

struct FormFindResult {
  Configuration config;
  Eigen::VectorXd tensions;
  double residual = 0.0;
  double tolerance = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<IterationRecord> log;
};

inline double default_force_tolerance(const Model& model, const Eigen::VectorXd& gravity_force,
                                      const Eigen::VectorXd& f_ex) {
  double scale = 1e-6 * model.spec.axial_stiffness().maxCoeff();
  if (gravity_force.size()) scale = std::max(scale, gravity_force.lpNorm<Eigen::Infinity>());
  if (f_ex.size()) scale = std::max(scale, f_ex.lpNorm<Eigen::Infinity>());
  return 1e-8 * scale;
}

namespace detail {

struct StaticState {
  MemberGeometry geometry;
  Eigen::VectorXd tensions;
  Eigen::MatrixXd a2c;
  Eigen::VectorXd gravity_force;
  Eigen::VectorXd residual;  // free rows of A_2c t_c - f_ex - g
};

// Tensions are left signed in taut mode so Newton can pass through
// transient compression; the sign is checked once converged.
inline StaticState evaluate_static(const Model& model, const Eigen::VectorXd& coords,
                                   const Eigen::VectorXd& f_ex) {
  const Topology& topo = model.topology;
  StaticState s;
  s.geometry = member_lengths(topo, coords);
  s.tensions = elastic_tensions(s.geometry.lc, model.spec);
  if (model.options.tension_model == TensionModel::kSlack)
    s.tensions = apply_tension_model(s.tensions, TensionModel::kSlack);
  s.a2c = equilibrium_matrix(topo, s.geometry);
  const Eigen::VectorXd m = member_masses(
      model.spec, member_rest_lengths(topo, s.geometry, model.spec.rest_length));
  s.gravity_force = gravity_vector(topo, m, model.point_mass, model.spec.gravity);
  Eigen::VectorXd full = s.a2c * s.tensions - s.gravity_force;
  if (f_ex.size()) full -= f_ex;
  s.residual = gather(full, topo.free_dofs());
  return s;
}

}  // namespace detail

// Equilibrium configuration for the model's rest lengths under external
// nodal load f_ex (3n_n, or empty for none) plus gravity.
inline FormFindResult form_find(const Model& model, const Configuration& initial,
                                const Eigen::VectorXd& f_ex = {}, const FormFindOptions& opt = {},
                                const std::function<void(const IterationRecord&)>& on_iteration = {}) {
  model.validate();
  const Topology& topo = model.topology;
  check_config(topo, initial.coords);
  if (f_ex.size() && f_ex.size() != 3 * topo.node_count)
    throw ValidationError("external force must have 3 entries per node");

  Eigen::VectorXd coords = initial.coords;
  detail::StaticState state = detail::evaluate_static(model, coords, f_ex);
  const double tol =
      opt.tol_force > 0 ? opt.tol_force : default_force_tolerance(model, state.gravity_force, f_ex);

  FormFindResult result;
  result.tolerance = tol;
  std::vector<double> history;
  IterationRecord rec;
  for (int it = 0;; ++it) {
    rec.iteration = it;
    rec.residual = state.residual.lpNorm<Eigen::Infinity>();
    result.log.push_back(rec);
    history.push_back(rec.residual);
    if (on_iteration) on_iteration(rec);
    if (rec.residual <= tol) {
      result.iterations = it;
      break;
    }
    if (it >= opt.max_iter)
      throw NonConvergenceError("form-finding did not converge in " + std::to_string(opt.max_iter) +
                                    " iterations (residual " + std::to_string(rec.residual) + " N)",
                                history);

    const StiffnessMatrices k = stiffness_matrices(topo, state.geometry, model.spec, state.tensions,
                                                   model.options.tension_model);
    Eigen::MatrixXd J = partition(topo, k.KT).aa;
    if (opt.load_stiffness)
      J -= partition(topo, gravity_jacobian(topo, state.geometry, model.spec)).aa;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
    lu.setThreshold(1e-13);
    if (!lu.isInvertible())
      throw SingularStiffnessError("tangent stiffness singular during form-finding (rank " +
                                       std::to_string(lu.rank()) + " of " + std::to_string(J.rows()) + ")",
                                   static_cast<int>(J.rows() - lu.rank()));
    const Eigen::VectorXd dn = -lu.solve(state.residual);

    const double merit = state.residual.norm();
    double alpha = 1.0;
    bool accepted = false;
    for (int h = 0; h <= opt.max_halvings; ++h, alpha *= 0.5) {
      Eigen::VectorXd trial = coords;
      Eigen::VectorXd free = gather(coords, topo.free_dofs()) + alpha * dn;
      scatter(free, topo.free_dofs(), trial);
      try {
        detail::StaticState next = detail::evaluate_static(model, trial, f_ex);
        if (next.residual.allFinite() && next.residual.norm() <= merit) {
          coords = std::move(trial);
          state = std::move(next);
          accepted = true;
          break;
        }
      } catch (const DegenerateGeometryError&) {
      }
    }
    // Newton direction gave no decrease: damped Gauss-Newton steps on the
    // residual norm, stiffening the damping until one is accepted.
    if (!accepted) {
      const Eigen::MatrixXd JtJ = J.transpose() * J;
      const Eigen::VectorXd grad = J.transpose() * state.residual;
      double mu = 1e-8 * JtJ.diagonal().maxCoeff();
      for (int h = 0; h < 2 * opt.max_halvings && !accepted; ++h, mu *= 4.0) {
        Eigen::MatrixXd reg = JtJ;
        reg.diagonal().array() += mu;
        const Eigen::VectorXd step = -reg.llt().solve(grad);
        Eigen::VectorXd trial = coords;
        scatter(gather(coords, topo.free_dofs()) + step, topo.free_dofs(), trial);
        try {
          detail::StaticState next = detail::evaluate_static(model, trial, f_ex);
          if (next.residual.allFinite() && next.residual.norm() < merit) {
            coords = std::move(trial);
            state = std::move(next);
            accepted = true;
            alpha = 0.0;
            rec.step_norm = step.lpNorm<Eigen::Infinity>();
          }
        } catch (const DegenerateGeometryError&) {
        }
      }
      if (accepted) {
        rec.step_scale = 0.0;
        continue;
      }
    }
    if (!accepted)
      throw NonConvergenceError("form-finding line search failed at iteration " + std::to_string(it) +
                                    " (residual " + std::to_string(rec.residual) + " N)",
                                history);
    rec.step_norm = alpha * dn.lpNorm<Eigen::Infinity>();
    rec.step_scale = alpha;
  }

  if (model.options.tension_model == TensionModel::kTaut) {
    for (Eigen::Index c = 0; c < state.tensions.size(); ++c)
      if (state.tensions[c] < 0)
        throw CompressionError("equilibrium puts cluster '" + topo.clusters[c].name +
                                   "' in compression (t = " + std::to_string(state.tensions[c]) + " N)",
                               static_cast<int>(c));
  }
  result.config.coords = coords;
  result.tensions = state.tensions;
  result.residual = result.log.back().residual;
  result.converged = true;
  return result;
}

// Rest lengths giving every cluster the same tension at the given coordinates.
inline Eigen::VectorXd uniform_prestress_rest_lengths(const Model& model, const Eigen::VectorXd& coords,
                                                      double tension) {
  const MemberGeometry g = member_lengths(model.topology, coords);
  return rest_length_for(Eigen::VectorXd::Constant(model.topology.cluster_count(), tension), g.lc,
                         model.spec);
}

// ---------------------------------------------------------------------------
// Prestress design

struct PrestressSolution {
  int rank = 0;
  Eigen::VectorXd singular_values;
  Eigen::MatrixXd self_stress_modes;  // V_2, n_ec x (n_ec - r)
  Eigen::MatrixXd mechanism_modes;    // U_2, n_a x (n_a - r)
  Eigen::VectorXd coefficients;       // z
  Eigen::VectorXd tensions;           // designed t_c
  std::vector<std::string> warnings;
};

inline constexpr double kRankCutoff = 1e-10;

struct SubspaceDecomposition {
  int rank = 0;
  Eigen::VectorXd singular_values;
  Eigen::MatrixXd U;
  Eigen::MatrixXd V;
};

// Full SVD of the constrained equilibrium matrix with the rank decision.
inline SubspaceDecomposition decompose(const Eigen::MatrixXd& abar) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(abar, Eigen::ComputeFullU | Eigen::ComputeFullV);
  SubspaceDecomposition d;
  d.singular_values = svd.singularValues();
  d.U = svd.matrixU();
  d.V = svd.matrixV();
  const double smax = d.singular_values.size() ? d.singular_values[0] : 0.0;
  for (Eigen::Index i = 0; i < d.singular_values.size(); ++i)
    if (d.singular_values[i] > kRankCutoff * smax) ++d.rank;
  return d;
}

inline int self_stress_count(const Model& model, const Eigen::VectorXd& coords) {
  const MemberGeometry g = member_lengths(model.topology, coords);
  const Eigen::MatrixXd abar =
      constrained_equilibrium_matrix(model.topology, equilibrium_matrix(model.topology, g));
  return model.topology.cluster_count() - decompose(abar).rank;
}

// Tensions t_c = Ā⁺ w_a + V_2 z with z chosen so the designed clusters carry
// the target tensions. w_a is the free-node load (empty for zero).
inline PrestressSolution prestress_design(const Model& model, const Eigen::VectorXd& coords,
                                          const Eigen::VectorXd& w_a, const std::vector<int>& designed,
                                          const Eigen::VectorXd& targets) {
  const Topology& topo = model.topology;
  const int nec = topo.cluster_count();
  const int na = 3 * topo.free_count();
  if (static_cast<Eigen::Index>(designed.size()) != targets.size())
    throw ValidationError("prestress design: one target per designed cluster required");
  for (int c : designed)
    if (c < 0 || c >= nec) throw ValidationError("prestress design: cluster index out of range");
  Eigen::VectorXd w = w_a.size() ? w_a : Eigen::VectorXd::Zero(na);
  if (w.size() != na) throw ValidationError("prestress design: w_a must have one entry per free coordinate");

  const MemberGeometry g = member_lengths(topo, coords);
  const Eigen::MatrixXd abar = constrained_equilibrium_matrix(topo, equilibrium_matrix(topo, g));
  const SubspaceDecomposition d = decompose(abar);

  PrestressSolution sol;
  sol.rank = d.rank;
  sol.singular_values = d.singular_values;
  sol.self_stress_modes = d.V.rightCols(nec - d.rank);
  sol.mechanism_modes = d.U.rightCols(na - d.rank);
  if (!w.isZero(0.0))
    sol.warnings.push_back("w_a is nonzero; a zero free-node load is required for a feasible prestress");

  const int modes = nec - d.rank;
  if (static_cast<int>(designed.size()) != modes)
    throw PrestressError("designed members (" + std::to_string(designed.size()) +
                         ") must equal the number of self-stress modes (" + std::to_string(modes) + ")");

  // Particular solution Ā⁺ w_a.
  Eigen::VectorXd particular = Eigen::VectorXd::Zero(nec);
  for (int i = 0; i < d.rank; ++i)
    particular += d.V.col(i) * (d.U.col(i).dot(w) / d.singular_values[i]);

  Eigen::MatrixXd edV(modes, modes);
  Eigen::VectorXd rhs(modes);
  for (int i = 0; i < modes; ++i) {
    edV.row(i) = sol.self_stress_modes.row(designed[i]);
    rhs[i] = targets[i] - particular[designed[i]];
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(edV);
  lu.setThreshold(1e-10);
  if (modes > 0 && !lu.isInvertible())
    throw PrestressError("designed members do not span the prestress modes");
  sol.coefficients = modes > 0 ? Eigen::VectorXd(lu.solve(rhs)) : Eigen::VectorXd();
  sol.tensions = particular;
  if (modes > 0) sol.tensions += sol.self_stress_modes * sol.coefficients;

  if (model.options.tension_model == TensionModel::kTaut)
    for (int c = 0; c < nec; ++c)
      if (sol.tensions[c] < 0)
        throw PrestressError("infeasible prestress: cluster '" + topo.clusters[c].name +
                             "' would carry " + std::to_string(sol.tensions[c]) + " N");
  return sol;
}

// ---------------------------------------------------------------------------
// Modal and stiffness eigen-analysis

struct ModalResult {
  Eigen::VectorXd frequencies;           // Hz, ascending
  Eigen::VectorXd omega_squared;         // generalized eigenvalues
  Eigen::MatrixXd mode_shapes;           // M_aa-orthonormal columns
  Eigen::VectorXd stiffness_eigenvalues; // K_Taa eigenvalues, ascending, N/m
  Eigen::MatrixXd stiffness_modes;
};

inline ModalResult modal_analysis(const Model& model, const Eigen::VectorXd& coords, int mode_count) {
  model.validate();
  const Topology& topo = model.topology;
  const AssembledSystem sys = assemble(model, coords);
  const Eigen::MatrixXd K = partition(topo, sys.stiffness.KT).aa;
  const Eigen::MatrixXd M = partition(topo, sys.mass).aa;
  const int n = static_cast<int>(K.rows());
  const int k = std::clamp(mode_count, 0, n);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ks(K);
  const Eigen::VectorXd lam = ks.eigenvalues();
  const double cut = 1e-10 * lam.cwiseAbs().maxCoeff();
  int negative = 0;
  for (Eigen::Index i = 0; i < lam.size(); ++i)
    if (lam[i] < -cut) ++negative;
  if (negative > 0)
    throw UnstableStructureError("tangent stiffness has " + std::to_string(negative) +
                                     " negative eigenvalue(s): structure is unstable",
                                 negative);

  if (Eigen::LLT<Eigen::MatrixXd>(M).info() != Eigen::Success)
    throw ValidationError("mass matrix of the free nodes is not positive definite");
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> gs(K, M);

  ModalResult r;
  r.omega_squared = gs.eigenvalues().head(k);
  r.frequencies = r.omega_squared.cwiseMax(0.0).cwiseSqrt() / (2.0 * std::numbers::pi);
  r.mode_shapes = gs.eigenvectors().leftCols(k);
  r.stiffness_eigenvalues = lam.head(k);
  r.stiffness_modes = ks.eigenvectors().leftCols(k);
  return r;
}

}  // namespace ctsnet
