#pragma once

#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "dwr/forms.hpp"

namespace dwr {

enum class NewtonStop { sigma_criterion, goal_criterion, max_iter };

struct NewtonReport {
  int iterations = 0;                 // accepted updates
  std::vector<double> update_norms;   // max-norm of every computed update, unscaled
  std::vector<double> sigmas;         // sigma value tested before each update
  std::vector<double> alphas;         // damping of every accepted update
  std::vector<double> goal_updates;   // |J'(du)| tested by the goal-balanced variant
  int line_search_failures = 0;
  double final_residual = 0.0;        // max-norm of the free residual at the returned iterate
  NewtonStop stop = NewtonStop::max_iter;
};

class NewtonError : public std::runtime_error {
 public:
  NewtonError(const std::string& what, NewtonReport report)
      : std::runtime_error(what), report_(std::move(report)) {}
  const NewtonReport& report() const { return report_; }

 private:
  NewtonReport report_;
};

struct NewtonOptions {
  double tol = 1e-8;
  int max_iter = 50;
  /// Largest j tried for alpha = 2^-j. Starting a degenerate problem (tiny
  /// eps, zero guess) needs far more than a handful of halvings.
  int max_halvings = 100;
  std::ostream* log = nullptr;
};

/// |du^{k-1}| / (1 - (|du^{k-1}| / |du^{k-2}|)^2); +inf when the ratio is exactly 1.
double sigma(double norm_prev, double norm_prev2);

struct LineSearchResult {
  double alpha = 1.0;
  bool failed = false;  // no halving decreased the residual; alpha = 1 is returned
  double residual = 0.0;
};

/// Backtracking on the max-norm of the free residual.
LineSearchResult line_search(const Problem& pb, const Assembler& as, const FeFunction& u, const Eigen::VectorXd& du,
                             double residual_norm, int max_halvings = 100);

/// Newton update du on the full dof vector: A'(u)(du, v) = -A(u)(v) for all free v.
Eigen::VectorXd newton_update(const Problem& pb, const Assembler& as, const FeFunction& u);

/// Adaptive Newton with the sigma stopping rule. The initial guess must carry
/// the Dirichlet values.
std::pair<FeFunction, NewtonReport> newton_solve(const Problem& pb, const Assembler& as, FeFunction initial,
                                                 const NewtonOptions& opt = {});

/// Goal-balanced Newton: iterate while |J'(du^k)| > 1e-2 |eta_prev|, where
/// goal_derivative(u^k) rebuilds J' at the current iterate.
std::pair<FeFunction, NewtonReport> newton_solve_goal(
    const Problem& pb, const Assembler& as, FeFunction initial,
    const std::function<LinearFunctional(const FeFunction&)>& goal_derivative, double eta_prev,
    const NewtonOptions& opt = {});

}  // namespace dwr
