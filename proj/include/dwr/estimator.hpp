#pragma once

#include <Eigen/Core>

#include <optional>
#include <vector>

#include "dwr/forms.hpp"

namespace dwr {

struct Estimate {
  double eta2 = 0.0;          // eta_h2 + eta_k + eta_R
  double eta_h2 = 0.0;        // primal_part + adjoint_part
  double eta_k = 0.0;         // rho(u~)(z~), the iteration error part
  double eta_R = 0.0;         // remainder
  double primal_part = 0.0;   // 1/2 rho(u~)(z2 - z~)
  double adjoint_part = 0.0;  // 1/2 rho*(u~,z~)(u2 - u~)
  Eigen::VectorXd node_indicators;          // per Q1 dof, after hanging-node redistribution
  std::vector<double> remainder_per_cell;   // per active cell index
  std::vector<double> element_indicators;   // per active cell index
};

struct EstimateOptions {
  int s_points = 5;
  /// Composite s-rule: s_points Gauss points on each of s_panels equal panels.
  int s_panels = 1;
  /// Use the closed-form remainder when p = 4.
  bool closed_form_when_cubic = false;
};

/// Discrete adjoint: A'(ubar)(v, z) = J'(ubar)(v) for all v of the space, z = 0 on the boundary.
FeFunction solve_adjoint(const Problem& pb, const Assembler& as, const FeFunction& ubar, const Goal& goal);

/// 1/2 int_0^1 [-A'''(u~+se)(e,e,e,z~+se*) - 3A''(u~+se)(e,e,e*)] s(s-1) ds with e = u2 - u~,
/// e* = z2 - z~ (the goal's third derivative vanishes). All four functions share one Q2 space.
double remainder_quadrature(const Problem& pb, const FeFunction& ut, const FeFunction& zt, const FeFunction& u2,
                            const FeFunction& z2, int s_points, std::vector<double>* per_cell = nullptr,
                            int s_panels = 1);

/// Same quantity for p = 4, where A'' = B(u) is linear in u:
/// (1/24)(3 B(u2+u~)(e,e,e*) + B(e)(e,e,z2+z~)).
double remainder_closed_form(const Problem& pb, const FeFunction& ut, const FeFunction& zt, const FeFunction& u2,
                             const FeFunction& z2, std::vector<double>* per_cell = nullptr);

/// ut, zt on the Q1 space; u2, z2 on the Q2 space of the same mesh.
Estimate estimate(const Problem& pb, const Goal& goal, const FeFunction& ut, const FeFunction& zt,
                  const FeFunction& u2, const FeFunction& z2, const EstimateOptions& opt = {});

/// eta_i = 1/2 rho(u~)((z2-z~) psi_i) + 1/2 rho*(u~,z~)((u2-u~) psi_i) for the
/// unconstrained Q1 hats psi_i; inputs already embedded in the Q2 space.
Eigen::VectorXd localize_pu(const Problem& pb, const Goal& goal, const FeFunction& ut2, const FeFunction& zt2,
                            const FeFunction& u2, const FeFunction& z2, const Space& pu);

/// Moves each hanging node's value in equal halves to the coarse-edge endpoints.
void redistribute_hanging(const Mesh& mesh, Eigen::VectorXd& node_values);

/// eta_K = sum over corners i of |eta_i| / (cells at i) + |R_K|.
std::vector<double> element_indicators(const Mesh& mesh, const Space& pu, const Eigen::VectorXd& node_values,
                                       const std::vector<double>& remainder_per_cell);

/// J'(u~)(du~) for the next Newton update du~; equals -A(u~)(z^) without an adjoint solve.
double iteration_error_via_update(const Goal& goal, const FeFunction& ut, const FeFunction& du);

/// Effectivity and saturation quantities. Indices are NaN when J_ref = J(u~).
struct SaturationReport {
  double error = 0.0;              // |J_ref - J(u~)|
  double enriched_error = 0.0;     // |J_ref - J(u2)|
  double b_h_hat = 0.0;
  double gamma_measurable = 0.0;   // |eta_k| + |eta_R|
  double gamma_hat = 0.0;          // gamma_measurable + |J_ref - J(u2)|
  double I_eff = 0.0;
  double I_eff_gamma = 0.0;
  double I_eff_p = 0.0;
  double I_eff_a = 0.0;
  bool defined = false;
};
SaturationReport diagnostics(const Estimate& est, double J_ref, double J_tilde, double J_enriched);
/// Same, from the true errors |J(u) - J(u~)| and |J(u) - J(u2)|.
SaturationReport diagnostics_from_errors(const Estimate& est, double error, double enriched_error);

}  // namespace dwr
