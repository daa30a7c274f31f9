#pragma once

#include <stdexcept>
#include <vector>

#include "dwr/forms.hpp"

namespace dwr {

class CombinationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MultiGoalConfig {
  std::vector<Goal> goals;
  std::vector<double> weights;  // omega_i > 0; empty means all 1

  double weight(std::size_t i) const { return weights.empty() ? 1.0 : weights.at(i); }
  void validate() const;
};

/// Weighted relative sum E(x, J(u~)) = sum omega_i x_i / |J_i(u~)|.
double error_weighting(const MultiGoalConfig& cfg, const std::vector<double>& x,
                       const std::vector<double>& J_tilde);

/// J_c = sum_i omega_i sign(J_i(u2) - J_i(u~)) / |J_i(u~)| J_i with frozen signs.
struct CombinedGoal {
  Goal goal;
  std::vector<double> signed_weights;
  std::vector<int> signs;
};

/// Throws CombinationError naming the goal whose denominator vanishes. A zero
/// difference gets sign +1. Denominators default to J_tilde.
CombinedGoal combine(const MultiGoalConfig& cfg, const std::vector<double>& J_enriched,
                     const std::vector<double>& J_tilde, const std::vector<double>* denominators = nullptr);
CombinedGoal combine(const MultiGoalConfig& cfg, const FeFunction& u2, const FeFunction& ut);

std::vector<double> goal_values(const MultiGoalConfig& cfg, const FeFunction& u);

struct NoCancellationReport {
  std::vector<bool> outside;     // J_i(u2) outside both closed intervals
  std::vector<bool> degenerate;  // J_i(u~1) = J_i(u~2)
  bool all = true;
};

/// Checks J_i(u2) not in [J_i(u~1), J_i(u~2)] (closed, either order) for every i.
NoCancellationReport check_no_cancellation(const std::vector<double>& J_enriched, const std::vector<double>& J_t1,
                                           const std::vector<double>& J_t2);

}  // namespace dwr
