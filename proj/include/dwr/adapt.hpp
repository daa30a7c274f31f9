#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dwr/estimator.hpp"
#include "dwr/multigoal.hpp"
#include "dwr/newton.hpp"

namespace dwr {

struct MarkingParams {
  double refine_fraction = 0.1;  // X
  double coarsen_fraction = 0.0; // Y, accepted but unused
};

/// Positions (into the indicator vector) of the cells to refine: the
/// ceil(X N) largest, one more, and every cell tied with the smallest marked value.
std::vector<int> mark_fixed_rate(const std::vector<double>& indicators, const MarkingParams& params);

struct LevelRecord {
  int level = 0;
  std::size_t dofs = 0;       // Q1 dofs
  std::size_t cells = 0;
  double J_tilde = 0.0;       // goal (combined goal for several) at u~
  double J_enriched = 0.0;    // same at u2
  double eta2 = 0.0, eta_h2 = 0.0, eta_k = 0.0, eta_R = 0.0;
  double primal_part = 0.0, adjoint_part = 0.0;
  double I_eff = 0.0, I_eff_gamma = 0.0, I_eff_p = 0.0, I_eff_a = 0.0;
  double b_h_hat = 0.0, gamma_hat = 0.0;
  int newton_base = 0, newton_enriched = 0;
  int newton_base_sigma = -1;  // Algorithm-1 count on the same level, when requested
  double exact_error = 0.0;    // NaN without a reference
  std::vector<double> goal_tilde, goal_enriched, goal_error;  // per goal
  bool no_cancellation = true;
};

struct AdaptOptions {
  double tol_dis = 1e-10;
  std::size_t max_dofs = 100000;
  int max_levels = 200;
  bool uniform = false;
  MarkingParams marking;
  EstimateOptions estimator;
  NewtonOptions newton;
  double eta_initial = 1e-8;       // eta_h on level 0
  bool compare_sigma_newton = false;
  std::vector<double> J_ref;       // per goal; empty when unknown
  std::ostream* log = nullptr;
};

/// Everything needed to continue the loop at the next level.
struct AdaptState {
  std::shared_ptr<const Mesh> mesh;
  Eigen::VectorXd u2;   // on the Q2 space of mesh
  Eigen::VectorXd ut;   // on the Q1 space of mesh
  double eta_prev = 1e-8;
  int level = 1;

  void save(std::ostream& out) const;
  static AdaptState load(std::istream& in);
};

struct LevelData {
  const LevelRecord& record;
  const FeFunction& ut;
  const FeFunction& u2;
  const Estimate& estimate;
};

struct AdaptResult {
  std::vector<LevelRecord> records;
  bool failed = false;
  std::string failure;
};

/// The adaptive loop. Single goals are used as given; several goals are
/// merged into the sign-weighted relative combination each level.
AdaptResult run_adaptive(const Problem& pb, const MultiGoalConfig& goals, std::shared_ptr<const Mesh> initial,
                         const AdaptOptions& opt, const std::optional<AdaptState>& resume = std::nullopt,
                         const std::function<void(const LevelData&)>& on_level = {},
                         const std::function<void(const AdaptState&)>& on_state = {});

}  // namespace dwr
