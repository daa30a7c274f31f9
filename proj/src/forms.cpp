#include "dwr/forms.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace dwr {

void Problem::validate() const {
  if (!(p > 1.0)) throw std::invalid_argument("p must be > 1");
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be > 0");
  if (!f) throw std::invalid_argument("problem has no source");
}

Problem Problem::manufactured(double p, double eps) {
  Problem pb;
  pb.p = p;
  pb.eps = eps;
  pb.f = [p, eps](const Point& x) { return Manufactured::source(p, eps, x); };
  pb.dirichlet = [](const Point& x) { return Manufactured::value(x); };
  return pb;
}

Problem Problem::constant_source(double p, double eps, double f) {
  Problem pb;
  pb.p = p;
  pb.eps = eps;
  pb.f = [f](const Point&) { return f; };
  return pb;
}

CoefficientDerivatives coefficient(double p, double eps, double t) {
  const double q = 0.5 * (p - 2.0);
  const double b = eps * eps + t;
  CoefficientDerivatives c;
  // Factors are checked before the power so that vanishing derivatives stay
  // exactly zero even when b^(q-k) overflows.
  c.a = q == 0.0 ? 1.0 : std::pow(b, q);
  const double f1 = q;
  const double f2 = q * (q - 1.0);
  const double f3 = q * (q - 1.0) * (q - 2.0);
  c.a1 = f1 == 0.0 ? 0.0 : f1 * std::pow(b, q - 1.0);
  c.a2 = f2 == 0.0 ? 0.0 : f2 * std::pow(b, q - 2.0);
  c.a3 = f3 == 0.0 ? 0.0 : f3 * std::pow(b, q - 3.0);
  return c;
}

CoefficientDerivatives coefficient(const Problem& pb, double t) {
  auto c = coefficient(pb.p, pb.eps, t);
  if (pb.scale != 1.0) {
    c.a *= pb.scale;
    c.a1 *= pb.scale;
    c.a2 *= pb.scale;
    c.a3 *= pb.scale;
  }
  return c;
}

void apply_dirichlet(const Problem& pb, FeFunction& u) {
  const Space& s = u.space();
  auto& c = u.coefficients();
  const auto pts = s.dof_points();
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (s.is_dirichlet(static_cast<int>(i))) c[static_cast<Eigen::Index>(i)] = pb.dirichlet ? pb.dirichlet(pts[i]) : 0.0;
  s.distribute(c);
}

namespace {
constexpr double kMinRadius = 1e-14;
}

double Manufactured::value(const Point& x) {
  return std::hypot(x.x, x.y) * (x.x * x.x - 1.0) * (x.y * x.y - 1.0);
}

Vec2 Manufactured::gradient(const Point& x) {
  const double r = std::max(std::hypot(x.x, x.y), kMinRadius);
  const double P = x.x * x.x - 1.0, Q = x.y * x.y - 1.0;
  return {x.x / r * P * Q + 2.0 * x.x * r * Q, x.y / r * P * Q + 2.0 * x.y * r * P};
}

std::array<double, 3> Manufactured::hessian(const Point& p) {
  const double x = p.x, y = p.y;
  const double r = std::max(std::hypot(x, y), kMinRadius);
  const double r3 = r * r * r;
  const double P = x * x - 1.0, Q = y * y - 1.0;
  const double uxx = y * y / r3 * P * Q + 4.0 * x * x / r * Q + 2.0 * r * Q;
  const double uyy = x * x / r3 * P * Q + 4.0 * y * y / r * P + 2.0 * r * P;
  const double uxy = -x * y / r3 * P * Q + 2.0 * x * y / r * P + 2.0 * x * y / r * Q + 4.0 * x * y * r;
  return {uxx, uxy, uyy};
}

double Manufactured::source(double p, double eps, const Point& x) {
  const Vec2 g = gradient(x);
  const auto [uxx, uxy, uyy] = hessian(x);
  const auto c = coefficient(p, eps, dot(g, g));
  const double gHg = g[0] * (uxx * g[0] + uxy * g[1]) + g[1] * (uxy * g[0] + uyy * g[1]);
  return -c.a * (uxx + uyy) - 2.0 * c.a1 * gHg;
}

double pointwise_d1(const CoefficientDerivatives& c, const Vec2& g, const Vec2& phi, const Vec2& v) {
  return c.a * dot(phi, v) + 2.0 * c.a1 * dot(g, phi) * dot(g, v);
}

double pointwise_d2(const CoefficientDerivatives& c, const Vec2& g, const Vec2& phi, const Vec2& psi, const Vec2& v) {
  const double gphi = dot(g, phi), gpsi = dot(g, psi), gv = dot(g, v);
  return 2.0 * c.a1 * (dot(phi, psi) * gv + gphi * dot(psi, v) + gpsi * dot(phi, v)) + 4.0 * c.a2 * gphi * gpsi * gv;
}

double pointwise_d3(const CoefficientDerivatives& c, const Vec2& g, const Vec2& phi, const Vec2& psi, const Vec2& chi,
                    const Vec2& v) {
  const double gphi = dot(g, phi), gpsi = dot(g, psi), gchi = dot(g, chi), gv = dot(g, v);
  const double t1 = dot(chi, psi) * dot(phi, v) + dot(psi, phi) * dot(chi, v) + dot(chi, phi) * dot(psi, v);
  const double t2 = gchi * (dot(phi, psi) * gv + gphi * dot(psi, v) + gpsi * dot(phi, v)) +
                    dot(chi, psi) * gphi * gv + dot(chi, phi) * gpsi * gv + gpsi * gphi * dot(chi, v);
  return 2.0 * c.a1 * t1 + 4.0 * c.a2 * t2 + 8.0 * c.a3 * gchi * gpsi * gphi * gv;
}

const ShapeTable& shape_table(int order, int n_quad) {
  static std::map<std::pair<int, int>, ShapeTable> cache;
  static std::mutex m;
  std::lock_guard lock(m);
  auto [it, inserted] = cache.try_emplace({order, n_quad});
  if (inserted) {
    it->second.rule = QuadratureRule::gauss(n_quad);
    for (const auto& pt : it->second.rule.points) it->second.at.push_back(shape_values(order, pt));
  }
  return it->second;
}

namespace {

void require_same_mesh(const Mesh& a, const Mesh& b) {
  if (&a != &b && !(a == b)) throw std::invalid_argument("functions live on different meshes");
}

// Value and physical gradient of field coefficients on a cell at one table point.
ValueGrad eval_at(const ShapeValues& sv, std::span<const int> dofs, const Eigen::VectorXd& c, double sx,
                  double sy) {
  ValueGrad out;
  for (std::size_t a = 0; a < dofs.size(); ++a) {
    const double ca = c[dofs[a]];
    out.value += ca * sv.values[a];
    out.grad[0] += ca * sv.gradients[a][0];
    out.grad[1] += ca * sv.gradients[a][1];
  }
  out.grad[0] *= sx;
  out.grad[1] *= sy;
  return out;
}

struct ClippedPoint {
  Point ref;
  Point x;
  double w;
};

// Gauss points of the part of `box` inside `region`, in box reference coordinates.
std::vector<ClippedPoint> clipped_points(const Rect& box, const std::optional<Rect>& region, int n_quad) {
  Rect r = box;
  if (region) {
    r.x0 = std::max(box.x0, region->x0);
    r.y0 = std::max(box.y0, region->y0);
    r.x1 = std::min(box.x1, region->x1);
    r.y1 = std::min(box.y1, region->y1);
    if (!(r.x1 > r.x0) || !(r.y1 > r.y0)) return {};
  }
  const auto& rule = shape_table(1, n_quad).rule;
  std::vector<ClippedPoint> out;
  out.reserve(rule.points.size());
  const double jac = 0.25 * r.area();
  for (std::size_t q = 0; q < rule.points.size(); ++q) {
    const Point x = to_physical(r, rule.points[q]);
    out.push_back({to_reference(box, x), x, rule.weights[q] * jac});
  }
  return out;
}

}  // namespace

double integrate(std::span<const FeFunction* const> fields, int n_quad,
                 const std::function<double(const Point&, std::span<const ValueGrad>)>& kernel,
                 std::vector<double>* per_cell) {
  if (fields.empty()) throw std::invalid_argument("integrate: no fields");
  const Mesh& mesh = fields[0]->space().mesh();
  for (const auto* f : fields) require_same_mesh(mesh, f->space().mesh());
  std::vector<const ShapeTable*> tables;
  for (const auto* f : fields) tables.push_back(&shape_table(f->space().order(), n_quad));
  const auto& rule = tables[0]->rule;
  const auto active = mesh.active_cells();
  if (per_cell) per_cell->assign(active.size(), 0.0);
  std::vector<ValueGrad> vals(fields.size());
  double total = 0.0;
  for (std::size_t k = 0; k < active.size(); ++k) {
    const Rect& b = mesh.cell(active[k]).box;
    const double sx = 2.0 / (b.x1 - b.x0), sy = 2.0 / (b.y1 - b.y0);
    const double jac = 0.25 * b.area();
    double cell_sum = 0.0;
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      for (std::size_t i = 0; i < fields.size(); ++i)
        vals[i] = eval_at(tables[i]->at[q], fields[i]->space().cell_dofs(static_cast<int>(k)),
                          fields[i]->coefficients(), sx, sy);
      cell_sum += rule.weights[q] * jac * kernel(to_physical(b, rule.points[q]), vals);
    }
    if (per_cell) (*per_cell)[k] = cell_sum;
    total += cell_sum;
  }
  return total;
}

double form_value(const Problem& pb, const FeFunction& u, const FeFunction& v, int n_quad) {
  const FeFunction* fs[] = {&u, &v};
  return integrate(fs, n_quad, [&](const Point& x, std::span<const ValueGrad> s) {
    const auto c = coefficient(pb, dot(s[0].grad, s[0].grad));
    return c.a * dot(s[0].grad, s[1].grad) - pb.scale * pb.f(x) * s[1].value;
  });
}

double form_d1(const Problem& pb, const FeFunction& u, const FeFunction& phi, const FeFunction& v, int n_quad) {
  const FeFunction* fs[] = {&u, &phi, &v};
  return integrate(fs, n_quad, [&](const Point&, std::span<const ValueGrad> s) {
    const auto c = coefficient(pb, dot(s[0].grad, s[0].grad));
    return pointwise_d1(c, s[0].grad, s[1].grad, s[2].grad);
  });
}

double form_d2(const Problem& pb, const FeFunction& u, const FeFunction& phi, const FeFunction& psi,
               const FeFunction& v, int n_quad) {
  const FeFunction* fs[] = {&u, &phi, &psi, &v};
  return integrate(fs, n_quad, [&](const Point&, std::span<const ValueGrad> s) {
    const auto c = coefficient(pb, dot(s[0].grad, s[0].grad));
    return pointwise_d2(c, s[0].grad, s[1].grad, s[2].grad, s[3].grad);
  });
}

double form_d3(const Problem& pb, const FeFunction& u, const FeFunction& phi, const FeFunction& psi,
               const FeFunction& chi, const FeFunction& v, int n_quad) {
  const FeFunction* fs[] = {&u, &phi, &psi, &chi, &v};
  return integrate(fs, n_quad, [&](const Point&, std::span<const ValueGrad> s) {
    const auto c = coefficient(pb, dot(s[0].grad, s[0].grad));
    return pointwise_d3(c, s[0].grad, s[1].grad, s[2].grad, s[3].grad, s[4].grad);
  });
}

double cubic_b_form(const FeFunction& u, const FeFunction& phi, const FeFunction& psi, const FeFunction& v,
                    int n_quad, std::vector<double>* per_cell) {
  const FeFunction* fs[] = {&u, &phi, &psi, &v};
  return integrate(
      fs, n_quad,
      [](const Point&, std::span<const ValueGrad> s) {
        const Vec2 &g = s[0].grad, &a = s[1].grad, &b = s[2].grad, &w = s[3].grad;
        return 2.0 * (dot(a, b) * dot(g, w) + dot(g, a) * dot(b, w) + dot(g, b) * dot(a, w));
      },
      per_cell);
}

Assembler::Assembler(std::shared_ptr<const Space> space, int n_quad) : space_(std::move(space)), n_quad_(n_quad) {
  const Space& s = *space_;
  const auto n_cells = static_cast<int>(s.mesh().n_active());
  std::vector<Eigen::Triplet<double>> trip;
  for (int k = 0; k < n_cells; ++k) {
    const auto dofs = s.cell_dofs(k);
    for (int da : dofs)
      for (int db : dofs)
        for (int fi : s.expansion_indices(da))
          for (int fj : s.expansion_indices(db)) trip.emplace_back(fi, fj, 0.0);
  }
  const auto n = static_cast<Eigen::Index>(s.n_free());
  pattern_.resize(n, n);
  pattern_.setFromTriplets(trip.begin(), trip.end());
  pattern_.makeCompressed();
}

Eigen::VectorXd Assembler::residual_full(const Problem& pb, const FeFunction& u) const {
  const Space& s = *space_;
  const Mesh& mesh = s.mesh();
  const auto& tab = shape_table(s.order(), n_quad_);
  const auto active = mesh.active_cells();
  Eigen::VectorXd r = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s.n_dofs()));
  const auto& c = u.coefficients();
  for (std::size_t k = 0; k < active.size(); ++k) {
    const Rect& b = mesh.cell(active[k]).box;
    const double sx = 2.0 / (b.x1 - b.x0), sy = 2.0 / (b.y1 - b.y0);
    const double jac = 0.25 * b.area();
    const auto dofs = s.cell_dofs(static_cast<int>(k));
    for (std::size_t q = 0; q < tab.rule.points.size(); ++q) {
      const auto& sv = tab.at[q];
      const ValueGrad uq = eval_at(sv, dofs, c, sx, sy);
      const auto cd = coefficient(pb, dot(uq.grad, uq.grad));
      const double w = tab.rule.weights[q] * jac;
      const double fx = pb.scale * pb.f(to_physical(b, tab.rule.points[q]));
      for (std::size_t a = 0; a < dofs.size(); ++a) {
        const Vec2 ga{sv.gradients[a][0] * sx, sv.gradients[a][1] * sy};
        r[dofs[a]] += w * (cd.a * dot(uq.grad, ga) - fx * sv.values[a]);
      }
    }
  }
  return r;
}

Eigen::SparseMatrix<double> Assembler::jacobian(const Problem& pb, const FeFunction& u) const {
  const Space& s = *space_;
  const Mesh& mesh = s.mesh();
  const auto& tab = shape_table(s.order(), n_quad_);
  const auto active = mesh.active_cells();
  Eigen::SparseMatrix<double> K = pattern_;
  std::fill(K.valuePtr(), K.valuePtr() + K.nonZeros(), 0.0);
  const auto& c = u.coefficients();
  const std::size_t n_loc = static_cast<std::size_t>(s.dofs_per_cell());
  std::vector<double> ke(n_loc * n_loc);
  std::vector<Vec2> grads(n_loc);
  for (std::size_t k = 0; k < active.size(); ++k) {
    const Rect& b = mesh.cell(active[k]).box;
    const double sx = 2.0 / (b.x1 - b.x0), sy = 2.0 / (b.y1 - b.y0);
    const double jac = 0.25 * b.area();
    const auto dofs = s.cell_dofs(static_cast<int>(k));
    std::fill(ke.begin(), ke.end(), 0.0);
    for (std::size_t q = 0; q < tab.rule.points.size(); ++q) {
      const auto& sv = tab.at[q];
      const ValueGrad uq = eval_at(sv, dofs, c, sx, sy);
      const auto cd = coefficient(pb, dot(uq.grad, uq.grad));
      const double w = tab.rule.weights[q] * jac;
      for (std::size_t a = 0; a < n_loc; ++a) grads[a] = {sv.gradients[a][0] * sx, sv.gradients[a][1] * sy};
      for (std::size_t a = 0; a < n_loc; ++a)
        for (std::size_t bb = 0; bb < n_loc; ++bb)
          ke[a * n_loc + bb] += w * pointwise_d1(cd, uq.grad, grads[bb], grads[a]);
    }
    for (std::size_t a = 0; a < n_loc; ++a) {
      const auto ia = s.expansion_indices(dofs[a]);
      const auto wa = s.expansion_weights(dofs[a]);
      if (ia.empty()) continue;
      for (std::size_t bb = 0; bb < n_loc; ++bb) {
        const auto ib = s.expansion_indices(dofs[bb]);
        const auto wb = s.expansion_weights(dofs[bb]);
        const double v = ke[a * n_loc + bb];
        for (std::size_t i = 0; i < ia.size(); ++i)
          for (std::size_t j = 0; j < ib.size(); ++j) K.coeffRef(ia[i], ib[j]) += wa[i] * wb[j] * v;
      }
    }
  }
  return K;
}

// ---------------------------------------------------------------------------

double integrate_over(const FeFunction& v, const std::optional<Rect>& region, int n_quad) {
  const Mesh& mesh = v.space().mesh();
  const auto active = mesh.active_cells();
  double total = 0.0;
  for (std::size_t k = 0; k < active.size(); ++k) {
    const Rect& b = mesh.cell(active[k]).box;
    for (const auto& cp : clipped_points(b, region, n_quad))
      total += cp.w * v.evaluate_in_cell(static_cast<int>(k), cp.ref).value;
  }
  return total;
}

double LinearFunctional::apply(const FeFunction& v) const {
  double s = 0.0;
  for (const auto& pt : points) s += pt.coeff * v.evaluate(pt.at).value;
  for (const auto& it : integrals) s += it.coeff * integrate_over(v, it.region, 3);
  return s;
}

Eigen::VectorXd LinearFunctional::full_vector(const Space& space) const {
  const Mesh& mesh = space.mesh();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(space.n_dofs()));
  for (const auto& pt : points) {
    const auto cell = mesh.locate(pt.at);
    if (!cell) throw std::out_of_range("goal point outside the domain");
    const int k = mesh.active_index(*cell);
    const auto sv = shape_values(space.order(), to_reference(mesh.cell(*cell).box, pt.at));
    const auto dofs = space.cell_dofs(k);
    for (std::size_t a = 0; a < dofs.size(); ++a) out[dofs[a]] += pt.coeff * sv.values[a];
  }
  if (!integrals.empty()) {
    const auto active = mesh.active_cells();
    for (std::size_t k = 0; k < active.size(); ++k) {
      const auto dofs = space.cell_dofs(static_cast<int>(k));
      for (const auto& it : integrals)
        for (const auto& cp : clipped_points(mesh.cell(active[k]).box, it.region, 3)) {
          const auto sv = shape_values(space.order(), cp.ref);
          for (std::size_t a = 0; a < dofs.size(); ++a) out[dofs[a]] += it.coeff * cp.w * sv.values[a];
        }
    }
  }
  return out;
}

Eigen::VectorXd LinearFunctional::localize(const FeFunction& v, const Space& pu) const {
  if (pu.order() != 1) throw std::invalid_argument("partition of unity space must be Q1");
  const Mesh& mesh = pu.mesh();
  require_same_mesh(mesh, v.space().mesh());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(pu.n_dofs()));
  for (const auto& pt : points) {
    const auto cell = mesh.locate(pt.at);
    if (!cell) throw std::out_of_range("goal point outside the domain");
    const int k = mesh.active_index(*cell);
    const Point ref = to_reference(mesh.cell(*cell).box, pt.at);
    const double vx = v.evaluate_in_cell(k, ref).value;
    const auto psi = shape_values(1, ref);
    const auto dofs = pu.cell_dofs(k);
    for (std::size_t a = 0; a < 4; ++a) out[dofs[a]] += pt.coeff * vx * psi.values[a];
  }
  if (!integrals.empty()) {
    const auto active = mesh.active_cells();
    // Quadrature degree covers the product of a Q2 function and a Q1 hat.
    for (std::size_t k = 0; k < active.size(); ++k) {
      const auto dofs = pu.cell_dofs(static_cast<int>(k));
      for (const auto& it : integrals)
        for (const auto& cp : clipped_points(mesh.cell(active[k]).box, it.region, 3)) {
          const double vx = v.evaluate_in_cell(static_cast<int>(k), cp.ref).value;
          const auto psi = shape_values(1, cp.ref);
          for (std::size_t a = 0; a < 4; ++a) out[dofs[a]] += it.coeff * cp.w * vx * psi.values[a];
        }
    }
  }
  return out;
}

Goal Goal::point_value(Point x, std::string name) {
  return {std::move(name), {GoalTerm{GoalKind::point_value, 1.0, x, {}, {}}}};
}
Goal Goal::point_product(Point a, Point b, std::string name) {
  return {std::move(name), {GoalTerm{GoalKind::point_product, 1.0, a, b, {}}}};
}
Goal Goal::mean_deviation_squared(Point c, std::string name) {
  return {std::move(name), {GoalTerm{GoalKind::mean_deviation_squared, 1.0, c, {}, {}}}};
}
Goal Goal::subdomain_integral(Rect r, std::string name) {
  return {std::move(name), {GoalTerm{GoalKind::subdomain_integral, 1.0, {}, {}, r}}};
}

namespace {

// m(u) = int_Omega u - |Omega| u(c)
double mean_deviation(const FeFunction& u, const Point& c) {
  return integrate_over(u, std::nullopt, 3) - u.space().mesh().area() * u.evaluate(c).value;
}

}  // namespace

double Goal::value(const FeFunction& u) const {
  double s = 0.0;
  for (const auto& t : terms) {
    switch (t.kind) {
      case GoalKind::point_value: s += t.weight * u.evaluate(t.a).value; break;
      case GoalKind::point_product:
        s += t.weight * (1.0 + u.evaluate(t.a).value) * (1.0 + u.evaluate(t.b).value);
        break;
      case GoalKind::mean_deviation_squared: {
        const double m = mean_deviation(u, t.a);
        s += t.weight * m * m;
        break;
      }
      case GoalKind::subdomain_integral: s += t.weight * integrate_over(u, t.region, 3); break;
    }
  }
  return s;
}

LinearFunctional Goal::derivative(const FeFunction& u) const {
  LinearFunctional l;
  for (const auto& t : terms) {
    switch (t.kind) {
      case GoalKind::point_value: l.points.push_back({t.a, t.weight}); break;
      case GoalKind::point_product:
        l.points.push_back({t.a, t.weight * (1.0 + u.evaluate(t.b).value)});
        l.points.push_back({t.b, t.weight * (1.0 + u.evaluate(t.a).value)});
        break;
      case GoalKind::mean_deviation_squared: {
        const double m2 = 2.0 * t.weight * mean_deviation(u, t.a);
        l.integrals.push_back({std::nullopt, m2});
        l.points.push_back({t.a, -m2 * u.space().mesh().area()});
        break;
      }
      case GoalKind::subdomain_integral: l.integrals.push_back({t.region, t.weight}); break;
    }
  }
  return l;
}

double Goal::second(const FeFunction& u, const FeFunction& phi, const FeFunction& psi) const {
  double s = 0.0;
  for (const auto& t : terms) {
    switch (t.kind) {
      case GoalKind::point_product:
        s += t.weight * (phi.evaluate(t.a).value * psi.evaluate(t.b).value +
                         psi.evaluate(t.a).value * phi.evaluate(t.b).value);
        break;
      case GoalKind::mean_deviation_squared:
        s += 2.0 * t.weight * mean_deviation(phi, t.a) * mean_deviation(psi, t.a);
        break;
      default: break;
    }
  }
  (void)u;
  return s;
}

bool Goal::is_linear() const {
  return std::all_of(terms.begin(), terms.end(), [](const GoalTerm& t) {
    return t.kind == GoalKind::point_value || t.kind == GoalKind::subdomain_integral;
  });
}

Goal Goal::scaled(double w) const {
  Goal g = *this;
  for (auto& t : g.terms) t.weight *= w;
  return g;
}

Goal& Goal::operator+=(const Goal& other) {
  terms.insert(terms.end(), other.terms.begin(), other.terms.end());
  return *this;
}

}  // namespace dwr
