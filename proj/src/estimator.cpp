#include "dwr/estimator.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "dwr/linear_solver.hpp"

namespace dwr {

FeFunction solve_adjoint(const Problem& pb, const Assembler& as, const FeFunction& ubar, const Goal& goal) {
  const Space& s = as.space();
  const Eigen::VectorXd rhs = s.restrict_dual(goal.derivative(ubar).full_vector(s));
  if (rhs.size() == 0 || rhs.lpNorm<Eigen::Infinity>() == 0.0) return FeFunction(ubar.space_ptr());
  // The Jacobian is symmetric, so the transposed system is the same matrix.
  const Eigen::VectorXd z = sparse_solve(as.jacobian(pb, ubar), rhs);
  return FeFunction(ubar.space_ptr(), s.expand(z));
}

namespace {

FeFunction difference(const FeFunction& a, const FeFunction& b) {
  if (&a.space() != &b.space()) throw std::invalid_argument("difference: functions on different spaces");
  return FeFunction(a.space_ptr(), a.coefficients() - b.coefficients());
}

FeFunction sum(const FeFunction& a, const FeFunction& b) {
  if (&a.space() != &b.space()) throw std::invalid_argument("sum: functions on different spaces");
  return FeFunction(a.space_ptr(), a.coefficients() + b.coefficients());
}

}  // namespace

double remainder_quadrature(const Problem& pb, const FeFunction& ut, const FeFunction& zt, const FeFunction& u2,
                            const FeFunction& z2, int s_points, std::vector<double>* per_cell, int s_panels) {
  if (s_points < 1) throw std::invalid_argument("remainder_quadrature: need at least one s point");
  if (s_panels < 1) throw std::invalid_argument("remainder_quadrature: need at least one s panel");
  const FeFunction e = difference(u2, ut);
  const FeFunction es = difference(z2, zt);
  std::vector<std::pair<double, double>> srule;
  for (const auto& [x, w] : gauss_legendre_unit(s_points))
    for (int k = 0; k < s_panels; ++k) srule.emplace_back((k + x) / s_panels, w / s_panels);
  const FeFunction* fs[] = {&ut, &e, &zt, &es};
  const int nq = default_quadrature(u2.space().order());
  return integrate(
      fs, nq,
      [&](const Point&, std::span<const ValueGrad> v) {
        const Vec2 &gu = v[0].grad, &ge = v[1].grad, &gz = v[2].grad, &ges = v[3].grad;
        double acc = 0.0;
        for (const auto& [s, w] : srule) {
          const Vec2 g{gu[0] + s * ge[0], gu[1] + s * ge[1]};
          const Vec2 zz{gz[0] + s * ges[0], gz[1] + s * ges[1]};
          const auto c = coefficient(pb, dot(g, g));
          const double integrand = -pointwise_d3(c, g, ge, ge, ge, zz) - 3.0 * pointwise_d2(c, g, ge, ge, ges);
          acc += w * s * (s - 1.0) * integrand;
        }
        return 0.5 * acc;
      },
      per_cell);
}

double remainder_closed_form(const Problem& pb, const FeFunction& ut, const FeFunction& zt, const FeFunction& u2,
                             const FeFunction& z2, std::vector<double>* per_cell) {
  if (pb.p != 4.0) throw std::invalid_argument("remainder_closed_form: only available for p = 4");
  const FeFunction e = difference(u2, ut);
  const FeFunction es = difference(z2, zt);
  const FeFunction us = sum(u2, ut);
  const FeFunction zs = sum(z2, zt);
  const int nq = default_quadrature(u2.space().order());
  std::vector<double> c1, c2;
  const double t1 = cubic_b_form(us, e, e, es, nq, per_cell ? &c1 : nullptr);
  const double t2 = cubic_b_form(e, e, e, zs, nq, per_cell ? &c2 : nullptr);
  if (per_cell) {
    per_cell->resize(c1.size());
    for (std::size_t k = 0; k < c1.size(); ++k) (*per_cell)[k] = pb.scale * (3.0 * c1[k] + c2[k]) / 24.0;
  }
  return pb.scale * (3.0 * t1 + t2) / 24.0;
}

Eigen::VectorXd localize_pu(const Problem& pb, const Goal& goal, const FeFunction& ut2, const FeFunction& zt2,
                            const FeFunction& u2, const FeFunction& z2, const Space& pu) {
  const Space& s2 = u2.space();
  const Mesh& mesh = s2.mesh();
  if (&pu.mesh() != &mesh && !(pu.mesh() == mesh)) throw std::invalid_argument("localize_pu: mesh mismatch");
  const FeFunction e = difference(u2, ut2);
  const FeFunction es = difference(z2, zt2);
  const int nq = default_quadrature(2);
  const auto& t2 = shape_table(2, nq);
  const auto& t1 = shape_table(1, nq);
  const auto active = mesh.active_cells();

  Eigen::VectorXd eta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(pu.n_dofs()));
  // J'(u~)(e psi_i)
  eta += 0.5 * goal.derivative(ut2).localize(e, pu);

  auto eval = [](const ShapeValues& sv, std::span<const int> dofs, const Eigen::VectorXd& c, double sx, double sy) {
    ValueGrad out;
    for (std::size_t a = 0; a < dofs.size(); ++a) {
      out.value += c[dofs[a]] * sv.values[a];
      out.grad[0] += c[dofs[a]] * sv.gradients[a][0];
      out.grad[1] += c[dofs[a]] * sv.gradients[a][1];
    }
    out.grad[0] *= sx;
    out.grad[1] *= sy;
    return out;
  };

  for (std::size_t k = 0; k < active.size(); ++k) {
    const Rect& b = mesh.cell(active[k]).box;
    const double sx = 2.0 / (b.x1 - b.x0), sy = 2.0 / (b.y1 - b.y0);
    const double jac = 0.25 * b.area();
    const auto d2 = s2.cell_dofs(static_cast<int>(k));
    const auto d1 = pu.cell_dofs(static_cast<int>(k));
    for (std::size_t q = 0; q < t2.rule.points.size(); ++q) {
      const double w = t2.rule.weights[q] * jac;
      const ValueGrad u = eval(t2.at[q], d2, ut2.coefficients(), sx, sy);
      const ValueGrad z = eval(t2.at[q], d2, zt2.coefficients(), sx, sy);
      const ValueGrad ev = eval(t2.at[q], d2, e.coefficients(), sx, sy);
      const ValueGrad esv = eval(t2.at[q], d2, es.coefficients(), sx, sy);
      const auto c = coefficient(pb, dot(u.grad, u.grad));
      const double fx = pb.scale * pb.f(to_physical(b, t2.rule.points[q]));
      const auto& psi = t1.at[q];
      for (std::size_t a = 0; a < 4; ++a) {
        const double p = psi.values[a];
        const Vec2 gp{psi.gradients[a][0] * sx, psi.gradients[a][1] * sy};
        // rho(u~)(e* psi) = -A(u~)(e* psi)
        const Vec2 g_es_psi{p * esv.grad[0] + esv.value * gp[0], p * esv.grad[1] + esv.value * gp[1]};
        const double rho = -(c.a * dot(u.grad, g_es_psi) - fx * esv.value * p);
        // -A'(u~)(e psi, z~)
        const Vec2 g_e_psi{p * ev.grad[0] + ev.value * gp[0], p * ev.grad[1] + ev.value * gp[1]};
        const double adj = -pointwise_d1(c, u.grad, g_e_psi, z.grad);
        eta[d1[a]] += 0.5 * w * (rho + adj);
      }
    }
  }
  return eta;
}

void redistribute_hanging(const Mesh& mesh, Eigen::VectorXd& eta) {
  const auto hanging = mesh.hanging_nodes();
  // An endpoint may itself hang on a coarser edge; repeat until settled.
  for (std::size_t pass = 0; pass <= hanging.size(); ++pass) {
    bool moved = false;
    for (const auto& h : hanging) {
      const double v = eta[h.node];
      if (v == 0.0) continue;
      eta[h.endpoints[0]] += 0.5 * v;
      eta[h.endpoints[1]] += 0.5 * v;
      eta[h.node] = 0.0;
      moved = true;
    }
    if (!moved) break;
  }
}

std::vector<double> element_indicators(const Mesh& mesh, const Space& pu, const Eigen::VectorXd& eta,
                                       const std::vector<double>& remainder_per_cell) {
  const auto n = mesh.n_active();
  std::vector<double> out(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    for (int dof : pu.cell_dofs(static_cast<int>(k))) out[k] += std::abs(eta[dof]) / mesh.cells_at_vertex(dof);
    if (!remainder_per_cell.empty()) out[k] += std::abs(remainder_per_cell[k]);
  }
  return out;
}

Estimate estimate(const Problem& pb, const Goal& goal, const FeFunction& ut, const FeFunction& zt,
                  const FeFunction& u2, const FeFunction& z2, const EstimateOptions& opt) {
  if (&u2.space() != &z2.space()) throw std::invalid_argument("estimate: enriched functions on different spaces");
  if (&ut.space() != &zt.space()) throw std::invalid_argument("estimate: base functions on different spaces");
  const auto& s2 = u2.space_ptr();
  const FeFunction ut2 = embed(ut, s2);
  const FeFunction zt2 = embed(zt, s2);
  const FeFunction e = difference(u2, ut2);
  const FeFunction es = difference(z2, zt2);

  const Assembler as(s2, default_quadrature(2));
  const Eigen::VectorXd a_full = as.residual_full(pb, ut2);  // A(u~)(phi_i)

  Estimate est;
  est.primal_part = -0.5 * a_full.dot(es.coefficients());
  est.adjoint_part =
      0.5 * (goal.derivative(ut2).apply(e) - form_d1(pb, ut2, e, zt2, default_quadrature(2)));
  est.eta_k = -a_full.dot(zt2.coefficients());
  if (opt.closed_form_when_cubic && pb.p == 4.0)
    est.eta_R = remainder_closed_form(pb, ut2, zt2, u2, z2, &est.remainder_per_cell);
  else
    est.eta_R = remainder_quadrature(pb, ut2, zt2, u2, z2, opt.s_points, &est.remainder_per_cell, opt.s_panels);
  est.eta_h2 = est.primal_part + est.adjoint_part;
  est.eta2 = est.eta_h2 + est.eta_k + est.eta_R;

  const Space pu(s2->mesh_ptr(), 1);
  est.node_indicators = localize_pu(pb, goal, ut2, zt2, u2, z2, pu);
  redistribute_hanging(pu.mesh(), est.node_indicators);
  est.element_indicators = element_indicators(pu.mesh(), pu, est.node_indicators, est.remainder_per_cell);
  return est;
}

double iteration_error_via_update(const Goal& goal, const FeFunction& ut, const FeFunction& du) {
  return goal.derivative(ut).apply(du);
}

SaturationReport diagnostics(const Estimate& est, double J_ref, double J_tilde, double J_enriched) {
  return diagnostics_from_errors(est, std::abs(J_ref - J_tilde), std::abs(J_ref - J_enriched));
}

SaturationReport diagnostics_from_errors(const Estimate& est, double error, double enriched_error) {
  SaturationReport r;
  r.error = error;
  r.enriched_error = enriched_error;
  r.gamma_measurable = std::abs(est.eta_k) + std::abs(est.eta_R);
  r.gamma_hat = r.gamma_measurable + r.enriched_error;
  r.defined = r.error > 0.0;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double inv = r.defined ? 1.0 / r.error : nan;
  r.b_h_hat = r.enriched_error * inv;
  r.I_eff = std::abs(est.eta2) * inv;
  r.I_eff_gamma = std::abs(est.eta_h2) * inv;
  r.I_eff_p = std::abs(2.0 * est.primal_part) * inv;
  r.I_eff_a = std::abs(2.0 * est.adjoint_part) * inv;
  return r;
}

}  // namespace dwr
