#include "dwr/adapt.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <ostream>
#include <istream>
#include <sstream>

namespace dwr {

std::vector<int> mark_fixed_rate(const std::vector<double>& eta, const MarkingParams& params) {
  if (params.refine_fraction < 0.0 || params.refine_fraction > 1.0)
    throw std::invalid_argument("refine fraction must lie in [0,1]");
  const auto n = eta.size();
  if (n == 0) return {};
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return eta[a] > eta[b]; });
  const double x = params.refine_fraction * static_cast<double>(n);
  auto k = static_cast<std::size_t>(std::ceil(x - 1e-12 * std::max(1.0, x)));
  k = std::min(n, k + 1);
  const double smallest = eta[order[k - 1]];
  while (k < n && eta[order[k]] == smallest) ++k;
  std::vector<int> marked(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(marked.begin(), marked.end());
  return marked;
}

namespace {

struct LevelGoal {
  Goal goal;
  std::vector<double> weights;  // signed weight per component
  std::vector<double> denominators;
};

// Several goals: signs from J(u2) - J(u~), denominators |J_i(u~)| with |J_i(u2)|
// standing in when the base value is exactly zero.
LevelGoal level_goal(const MultiGoalConfig& cfg, const std::vector<double>& J2, const std::vector<double>& Jt) {
  if (cfg.goals.size() == 1) return {cfg.goals[0], {cfg.weight(0)}, {1.0}};
  std::vector<double> den = Jt;
  for (std::size_t i = 0; i < den.size(); ++i)
    if (den[i] == 0.0) den[i] = J2[i];
  auto c = combine(cfg, J2, Jt, &den);
  return {std::move(c.goal), std::move(c.signed_weights), std::move(den)};
}

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

}  // namespace

AdaptResult run_adaptive(const Problem& pb, const MultiGoalConfig& goals, std::shared_ptr<const Mesh> initial,
                         const AdaptOptions& opt, const std::optional<AdaptState>& resume,
                         const std::function<void(const LevelData&)>& on_level,
                         const std::function<void(const AdaptState&)>& on_state) {
  pb.validate();
  goals.validate();
  if (!(opt.tol_dis > 0.0)) throw std::invalid_argument("tol_dis must be positive");
  const bool multi = goals.goals.size() > 1;
  const bool have_ref = !opt.J_ref.empty();
  if (have_ref && opt.J_ref.size() != goals.goals.size())
    throw std::invalid_argument("reference count does not match goal count");

  AdaptResult result;
  std::shared_ptr<const Mesh> mesh = resume ? resume->mesh : std::move(initial);
  double eta_prev = resume ? resume->eta_prev : opt.eta_initial;
  int level = resume ? resume->level : 1;
  std::optional<Eigen::VectorXd> u2_start, ut_start;
  if (resume) {
    u2_start = resume->u2;
    ut_start = resume->ut;
  }

  for (; level <= opt.max_levels; ++level) {
    auto V1 = std::make_shared<const Space>(mesh, 1);
    auto V2 = std::make_shared<const Space>(mesh, 2);
    // One rule for both spaces, matching the estimator.
    const Assembler as1(V1, default_quadrature(2));
    const Assembler as2(V2, default_quadrature(2));

    FeFunction u2_init = u2_start ? FeFunction(V2, *u2_start) : FeFunction(V2);
    FeFunction ut_init = ut_start ? FeFunction(V1, *ut_start) : FeFunction(V1);
    apply_dirichlet(pb, u2_init);
    apply_dirichlet(pb, ut_init);

    LevelRecord rec;
    rec.level = level;
    rec.dofs = V1->n_dofs();
    rec.cells = mesh->n_active();
    try {
      auto [u2, rep2] = newton_solve(pb, as2, u2_init, opt.newton);
      const auto J2 = goal_values(goals, u2);

      // Goal values seen at the Newton iterates of the base solve.
      std::vector<std::vector<double>> history;
      auto goal_derivative = [&](const FeFunction& uk) {
        history.push_back(goal_values(goals, uk));
        return level_goal(goals, J2, history.back()).goal.derivative(uk);
      };
      auto [ut, rep1] = newton_solve_goal(pb, as1, ut_init, goal_derivative, eta_prev, opt.newton);
      if (opt.compare_sigma_newton) {
        NewtonOptions o = opt.newton;
        o.tol = 1e-8;
        rec.newton_base_sigma = newton_solve(pb, as1, ut_init, o).second.iterations;
      }

      const auto Jt = goal_values(goals, ut);
      const LevelGoal lg = level_goal(goals, J2, Jt);
      const FeFunction zt = solve_adjoint(pb, as1, ut, lg.goal);
      const FeFunction z2 = solve_adjoint(pb, as2, u2, lg.goal);
      const Estimate est = estimate(pb, lg.goal, ut, zt, u2, z2, opt.estimator);

      rec.J_tilde = lg.goal.value(ut);
      rec.J_enriched = lg.goal.value(u2);
      rec.eta2 = est.eta2;
      rec.eta_h2 = est.eta_h2;
      rec.eta_k = est.eta_k;
      rec.eta_R = est.eta_R;
      rec.primal_part = est.primal_part;
      rec.adjoint_part = est.adjoint_part;
      rec.newton_base = rep1.iterations;
      rec.newton_enriched = rep2.iterations;
      rec.goal_tilde = Jt;
      rec.goal_enriched = J2;
      if (history.size() >= 2) {
        rec.no_cancellation = check_no_cancellation(J2, history[history.size() - 2], history.back()).all;
      } else {
        rec.no_cancellation = check_no_cancellation(J2, Jt, Jt).all;
      }

      if (have_ref) {
        double err = 0.0, err2 = 0.0;
        for (std::size_t i = 0; i < goals.goals.size(); ++i) {
          const double d = std::abs(opt.J_ref[i] - Jt[i]);
          const double d2 = std::abs(opt.J_ref[i] - J2[i]);
          const double scale = multi ? goals.weight(i) / std::abs(lg.denominators[i]) : 1.0;
          err += scale * d;
          err2 += scale * d2;
          rec.goal_error.push_back(opt.J_ref[i] != 0.0 ? d / std::abs(opt.J_ref[i]) : d);
        }
        const auto diag = diagnostics_from_errors(est, err, err2);
        rec.exact_error = err;
        rec.I_eff = diag.I_eff;
        rec.I_eff_gamma = diag.I_eff_gamma;
        rec.I_eff_p = diag.I_eff_p;
        rec.I_eff_a = diag.I_eff_a;
        rec.b_h_hat = diag.b_h_hat;
        rec.gamma_hat = diag.gamma_hat;
      } else {
        rec.exact_error = rec.I_eff = rec.I_eff_gamma = rec.I_eff_p = rec.I_eff_a = rec.b_h_hat = nan();
        rec.gamma_hat = std::abs(est.eta_k) + std::abs(est.eta_R);
      }
      result.records.push_back(rec);
      if (opt.log)
        *opt.log << "level " << level << " dofs " << rec.dofs << " J~ " << rec.J_tilde << " eta_h " << rec.eta_h2
                 << " I_eff " << rec.I_eff << " newton " << rec.newton_base << "/" << rec.newton_enriched << '\n';
      if (on_level) on_level({result.records.back(), ut, u2, est});

      eta_prev = est.eta_h2;
      if (std::abs(est.eta_h2) < opt.tol_dis) break;

      std::shared_ptr<const Mesh> next;
      if (opt.uniform) {
        next = std::make_shared<const Mesh>(mesh->refine_all());
      } else {
        const auto marked = mark_fixed_rate(est.element_indicators, opt.marking);
        std::vector<int> ids;
        ids.reserve(marked.size());
        for (int k : marked) ids.push_back(mesh->active_cells()[static_cast<std::size_t>(k)]);
        next = std::make_shared<const Mesh>(mesh->refine(ids));
      }
      if (next->vertices().size() > opt.max_dofs) break;
      auto V1n = std::make_shared<const Space>(next, 1);
      auto V2n = std::make_shared<const Space>(next, 2);
      u2_start = transfer(u2, V2n).coefficients();
      ut_start = transfer(ut, V1n).coefficients();
      mesh = next;
      if (on_state) on_state(AdaptState{mesh, *u2_start, *ut_start, eta_prev, level + 1});
    } catch (const NewtonError& e) {
      result.failed = true;
      result.failure = e.what();
      return result;
    } catch (const std::runtime_error& e) {
      result.failed = true;
      result.failure = e.what();
      return result;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// State persistence; doubles in hexfloat so a reload is bit-identical.

namespace {

void put(std::ostream& out, double v) {
  std::ostringstream os;
  os << std::hexfloat << v;
  out << os.str();
}

double get(std::istream& in) {
  std::string tok;
  if (!(in >> tok)) throw std::runtime_error("state: unexpected end of input");
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0') throw std::runtime_error("state: bad number '" + tok + "'");
  return v;
}

void expect(std::istream& in, const std::string& word) {
  std::string tok;
  if (!(in >> tok) || tok != word) throw std::runtime_error("state: expected '" + word + "'");
}

void put_vector(std::ostream& out, const char* name, const Eigen::VectorXd& v) {
  out << name << ' ' << v.size() << '\n';
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    put(out, v[i]);
    out << '\n';
  }
}

Eigen::VectorXd get_vector(std::istream& in, const char* name) {
  expect(in, name);
  Eigen::Index n = 0;
  in >> n;
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = get(in);
  return v;
}

}  // namespace

void AdaptState::save(std::ostream& out) const {
  out << "dwr-state 1\nlevel " << level << "\neta_prev ";
  put(out, eta_prev);
  const auto cells = mesh->cells();
  const auto rb = mesh->root_boundary();
  out << "\nroots " << rb.size() << '\n';
  for (const auto& b : rb) out << b[0] << ' ' << b[1] << ' ' << b[2] << ' ' << b[3] << '\n';
  out << "cells " << cells.size() << '\n';
  for (const auto& c : cells) {
    for (double v : {c.box.x0, c.box.y0, c.box.x1, c.box.y1}) {
      put(out, v);
      out << ' ';
    }
    out << c.level << ' ' << c.parent << ' ' << c.first_child << ' ' << c.root << '\n';
  }
  put_vector(out, "u2", u2);
  put_vector(out, "ut", ut);
}

AdaptState AdaptState::load(std::istream& in) {
  AdaptState s;
  expect(in, "dwr-state");
  expect(in, "1");
  expect(in, "level");
  in >> s.level;
  expect(in, "eta_prev");
  s.eta_prev = get(in);
  expect(in, "roots");
  std::size_t nr = 0;
  in >> nr;
  std::vector<std::array<bool, 4>> rb(nr);
  for (auto& b : rb)
    for (auto& f : b) {
      int v = 0;
      in >> v;
      f = v != 0;
    }
  expect(in, "cells");
  std::size_t nc = 0;
  in >> nc;
  std::vector<Cell> cells(nc);
  for (auto& c : cells) {
    c.box.x0 = get(in);
    c.box.y0 = get(in);
    c.box.x1 = get(in);
    c.box.y1 = get(in);
    in >> c.level >> c.parent >> c.first_child >> c.root;
  }
  if (!in) throw std::runtime_error("state: malformed cell table");
  s.mesh = std::make_shared<const Mesh>(Mesh::from_cells(std::move(cells), std::move(rb)));
  s.u2 = get_vector(in, "u2");
  s.ut = get_vector(in, "ut");
  return s;
}

}  // namespace dwr
