#include "dwr/multigoal.hpp"

#include <algorithm>
#include <cmath>

namespace dwr {

void MultiGoalConfig::validate() const {
  if (goals.empty()) throw std::invalid_argument("multigoal: no goals");
  if (!weights.empty() && weights.size() != goals.size())
    throw std::invalid_argument("multigoal: weight count does not match goal count");
  for (double w : weights)
    if (!(w > 0.0)) throw std::invalid_argument("multigoal: weights must be positive");
}

double error_weighting(const MultiGoalConfig& cfg, const std::vector<double>& x,
                       const std::vector<double>& J_tilde) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += cfg.weight(i) * x[i] / std::abs(J_tilde.at(i));
  return s;
}

CombinedGoal combine(const MultiGoalConfig& cfg, const std::vector<double>& J_enriched,
                     const std::vector<double>& J_tilde, const std::vector<double>* denominators) {
  const auto& den = denominators ? *denominators : J_tilde;
  cfg.validate();
  if (J_enriched.size() != cfg.goals.size() || J_tilde.size() != cfg.goals.size())
    throw std::invalid_argument("combine: value count does not match goal count");
  CombinedGoal c;
  c.goal.name = "combined";
  for (std::size_t i = 0; i < cfg.goals.size(); ++i) {
    if (den.at(i) == 0.0)
      throw CombinationError("combine: goal '" + cfg.goals[i].name + "' vanishes at the base solution");
    const int sign = J_enriched[i] - J_tilde[i] < 0.0 ? -1 : 1;
    const double w = cfg.weight(i) * sign / std::abs(den[i]);
    c.signs.push_back(sign);
    c.signed_weights.push_back(w);
    c.goal += cfg.goals[i].scaled(w);
  }
  return c;
}

std::vector<double> goal_values(const MultiGoalConfig& cfg, const FeFunction& u) {
  std::vector<double> v;
  for (const auto& g : cfg.goals) v.push_back(g.value(u));
  return v;
}

CombinedGoal combine(const MultiGoalConfig& cfg, const FeFunction& u2, const FeFunction& ut) {
  return combine(cfg, goal_values(cfg, u2), goal_values(cfg, ut));
}

NoCancellationReport check_no_cancellation(const std::vector<double>& J_enriched, const std::vector<double>& J_t1,
                                           const std::vector<double>& J_t2) {
  NoCancellationReport r;
  for (std::size_t i = 0; i < J_enriched.size(); ++i) {
    const double lo = std::min(J_t1.at(i), J_t2.at(i)), hi = std::max(J_t1.at(i), J_t2.at(i));
    const bool outside = J_enriched[i] < lo || J_enriched[i] > hi;
    r.outside.push_back(outside);
    r.degenerate.push_back(J_t1[i] == J_t2[i]);
    r.all = r.all && outside;
  }
  return r;
}

}  // namespace dwr
