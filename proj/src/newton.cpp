#include "dwr/newton.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "dwr/linear_solver.hpp"

namespace dwr {

double sigma(double norm_prev, double norm_prev2) {
  if (!(norm_prev2 > 0.0)) return 0.0;
  const double r = norm_prev / norm_prev2;
  const double d = 1.0 - r * r;
  if (d == 0.0) return std::numeric_limits<double>::infinity();
  return norm_prev / d;
}

namespace {

double free_residual_norm(const Problem& pb, const Assembler& as, const FeFunction& u) {
  const Eigen::VectorXd r = as.residual(pb, u);
  return r.size() ? r.lpNorm<Eigen::Infinity>() : 0.0;
}

}  // namespace

LineSearchResult line_search(const Problem& pb, const Assembler& as, const FeFunction& u, const Eigen::VectorXd& du,
                             double residual_norm, int max_halvings) {
  FeFunction trial = u;
  double alpha = 1.0;
  for (int j = 0; j <= max_halvings; ++j, alpha *= 0.5) {
    trial.coefficients() = u.coefficients() + alpha * du;
    const double r = free_residual_norm(pb, as, trial);
    if (r < residual_norm) return {alpha, false, r};
  }
  trial.coefficients() = u.coefficients() + du;
  return {1.0, true, free_residual_norm(pb, as, trial)};
}

Eigen::VectorXd newton_update(const Problem& pb, const Assembler& as, const FeFunction& u) {
  const Eigen::VectorXd r = as.residual(pb, u);
  if (r.size() == 0) return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(as.space().n_dofs()));
  const Eigen::VectorXd x = sparse_solve(as.jacobian(pb, u), -r);
  return as.space().expand(x);
}

namespace {

void log_step(const NewtonOptions& opt, int k, double norm, double sig, double alpha) {
  if (opt.log) *opt.log << "newton " << k << " |du|=" << norm << " sigma=" << sig << " alpha=" << alpha << '\n';
}

}  // namespace

std::pair<FeFunction, NewtonReport> newton_solve(const Problem& pb, const Assembler& as, FeFunction u,
                                                 const NewtonOptions& opt) {
  NewtonReport rep;
  const Space& space = as.space();
  double prev2 = 1.0, prev = 0.99;
  for (;;) {
    const double sig = sigma(prev, prev2);
    const double threshold = opt.tol * (space.max_norm(u.coefficients()) + prev);
    if (!(sig > threshold || sig < 0.0)) {
      rep.stop = NewtonStop::sigma_criterion;
      break;
    }
    if (rep.iterations >= opt.max_iter) {
      rep.final_residual = free_residual_norm(pb, as, u);
      throw NewtonError("newton_solve: no convergence within " + std::to_string(opt.max_iter) + " iterations",
                        rep);
    }
    rep.sigmas.push_back(sig);
    const double r0 = free_residual_norm(pb, as, u);
    const Eigen::VectorXd du = newton_update(pb, as, u);
    const double norm = space.max_norm(du);
    const auto ls = line_search(pb, as, u, du, r0, opt.max_halvings);
    u.coefficients() += ls.alpha * du;
    rep.update_norms.push_back(norm);
    rep.alphas.push_back(ls.alpha);
    rep.line_search_failures += ls.failed ? 1 : 0;
    ++rep.iterations;
    log_step(opt, rep.iterations, norm, sig, ls.alpha);
    prev2 = prev;
    prev = norm;
  }
  rep.final_residual = free_residual_norm(pb, as, u);
  return {std::move(u), std::move(rep)};
}

std::pair<FeFunction, NewtonReport> newton_solve_goal(
    const Problem& pb, const Assembler& as, FeFunction u,
    const std::function<LinearFunctional(const FeFunction&)>& goal_derivative, double eta_prev,
    const NewtonOptions& opt) {
  NewtonReport rep;
  const Space& space = as.space();
  const double threshold = 1e-2 * std::abs(eta_prev);
  for (;;) {
    const Eigen::VectorXd du = newton_update(pb, as, u);
    const FeFunction du_f(u.space_ptr(), du);
    const double jd = std::abs(goal_derivative(u).apply(du_f));
    rep.update_norms.push_back(space.max_norm(du));
    rep.goal_updates.push_back(jd);
    // The last computed update only serves the stopping test.
    if (!(jd > threshold)) {
      rep.stop = NewtonStop::goal_criterion;
      break;
    }
    if (rep.iterations >= opt.max_iter) {
      rep.final_residual = free_residual_norm(pb, as, u);
      throw NewtonError("newton_solve_goal: no convergence within " + std::to_string(opt.max_iter) +
                            " iterations",
                        rep);
    }
    const double r0 = free_residual_norm(pb, as, u);
    const auto ls = line_search(pb, as, u, du, r0, opt.max_halvings);
    u.coefficients() += ls.alpha * du;
    rep.alphas.push_back(ls.alpha);
    rep.line_search_failures += ls.failed ? 1 : 0;
    ++rep.iterations;
    if (opt.log) *opt.log << "goal-newton " << rep.iterations << " |J'(du)|=" << jd << " alpha=" << ls.alpha << '\n';
  }
  rep.final_residual = free_residual_norm(pb, as, u);
  return {std::move(u), std::move(rep)};
}

}  // namespace dwr
