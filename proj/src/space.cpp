#include "dwr/space.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace dwr {

std::vector<std::pair<double, double>> gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
  std::vector<std::pair<double, double>> out(static_cast<std::size_t>(n));
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // Recompute the derivative at the converged node.
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = pk;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    out[static_cast<std::size_t>(i)] = {-x, w};
    out[static_cast<std::size_t>(n - 1 - i)] = {x, w};
  }
  if (n % 2 == 1) out[static_cast<std::size_t>(n / 2)].first = 0.0;
  return out;
}

std::vector<std::pair<double, double>> gauss_legendre_unit(int n) {
  auto rule = gauss_legendre(n);
  for (auto& [x, w] : rule) {
    x = 0.5 * (x + 1.0);
    w *= 0.5;
  }
  return rule;
}

QuadratureRule QuadratureRule::gauss(int n) {
  const auto rule = gauss_legendre(n);
  QuadratureRule q;
  q.degree = 2 * n - 1;
  for (const auto& [y, wy] : rule)
    for (const auto& [x, wx] : rule) {
      q.points.push_back({x, y});
      q.weights.push_back(wx * wy);
    }
  return q;
}

namespace {

// 1D Lagrange basis on nodes {-1,1} or {-1,0,1}.
void lagrange_1d(int order, double t, double* v, double* d) {
  if (order == 1) {
    v[0] = 0.5 * (1.0 - t);
    v[1] = 0.5 * (1.0 + t);
    d[0] = -0.5;
    d[1] = 0.5;
  } else {
    v[0] = 0.5 * t * (t - 1.0);
    v[1] = 1.0 - t * t;
    v[2] = 0.5 * t * (t + 1.0);
    d[0] = t - 0.5;
    d[1] = -2.0 * t;
    d[2] = t + 0.5;
  }
}

void check_order(int order) {
  if (order != 1 && order != 2) throw std::invalid_argument("finite element order must be 1 or 2");
}

}  // namespace

ShapeValues shape_values(int order, const Point& ref) {
  check_order(order);
  const int m = order + 1;
  double vx[3], dx[3], vy[3], dy[3];
  lagrange_1d(order, ref.x, vx, dx);
  lagrange_1d(order, ref.y, vy, dy);
  ShapeValues s;
  s.values.resize(static_cast<std::size_t>(m * m));
  s.gradients.resize(static_cast<std::size_t>(m * m));
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < m; ++i) {
      const auto a = static_cast<std::size_t>(i + m * j);
      s.values[a] = vx[i] * vy[j];
      s.gradients[a] = {dx[i] * vy[j], vx[i] * dy[j]};
    }
  return s;
}

std::vector<Point> reference_nodes(int order) {
  check_order(order);
  const std::vector<double> t = order == 1 ? std::vector<double>{-1.0, 1.0} : std::vector<double>{-1.0, 0.0, 1.0};
  std::vector<Point> nodes;
  for (double y : t)
    for (double x : t) nodes.push_back({x, y});
  return nodes;
}

namespace {

// Physical node coordinates built from cell corners and midpoints only, so
// that neighboring cells produce bit-identical points.
double node_coord(double lo, double hi, int i, int order) {
  if (i == 0) return lo;
  if (i == order) return hi;
  return (lo + hi) * 0.5;
}

}  // namespace

Space::Space(std::shared_ptr<const Mesh> mesh, int order) : mesh_(std::move(mesh)), order_(order) {
  check_order(order);
  const Mesh& m = *mesh_;
  const int nn = order + 1;
  const auto n_loc = static_cast<std::size_t>(nn * nn);
  const auto active = m.active_cells();

  std::vector<Point> local_points;
  local_points.reserve(active.size() * n_loc);
  for (int id : active) {
    const Rect& b = m.cell(id).box;
    for (int j = 0; j < nn; ++j)
      for (int i = 0; i < nn; ++i)
        local_points.push_back({node_coord(b.x0, b.x1, i, order), node_coord(b.y0, b.y1, j, order)});
  }
  points_ = local_points;
  std::sort(points_.begin(), points_.end());
  points_.erase(std::unique(points_.begin(), points_.end()), points_.end());
  auto dof_of = [&](const Point& p) {
    auto it = std::lower_bound(points_.begin(), points_.end(), p);
    if (it == points_.end() || *it != p) throw std::logic_error("space: point is not a dof");
    return static_cast<int>(it - points_.begin());
  };
  cell_dofs_.resize(local_points.size());
  for (std::size_t k = 0; k < local_points.size(); ++k) cell_dofs_[k] = dof_of(local_points[k]);

  const std::size_t n = points_.size();
  constrained_.assign(n, 0);
  dirichlet_.assign(n, 0);

  // Raw hanging constraints, discovered from the coarse side of each edge.
  std::map<int, std::vector<std::pair<int, double>>> raw;
  for (int id : active) {
    const Rect& b = m.cell(id).box;
    for (int s = 0; s < 4; ++s) {
      const Point a = b.corner(s), e = b.corner(s + 1);
      const Point mid = midpoint(a, e);
      if (!m.is_vertex(mid)) continue;
      if (order == 1) {
        raw[dof_of(mid)] = {{dof_of(a), 0.5}, {dof_of(e), 0.5}};
      } else {
        const int da = dof_of(a), dm = dof_of(mid), de = dof_of(e);
        raw[dof_of(midpoint(a, mid))] = {{da, 0.375}, {dm, 0.75}, {de, -0.125}};
        raw[dof_of(midpoint(mid, e))] = {{da, -0.125}, {dm, 0.75}, {de, 0.375}};
      }
    }
  }
  for (const auto& [dof, _] : raw) constrained_[static_cast<std::size_t>(dof)] = 1;

  // Resolve chains so every master is unconstrained.
  std::map<int, std::vector<std::pair<int, double>>> resolved;
  std::function<const std::vector<std::pair<int, double>>&(int)> resolve =
      [&](int dof) -> const std::vector<std::pair<int, double>>& {
    if (auto it = resolved.find(dof); it != resolved.end()) return it->second;
    std::map<int, double> acc;
    for (const auto& [master, w] : raw.at(dof)) {
      if (constrained_[static_cast<std::size_t>(master)]) {
        for (const auto& [mm, ww] : resolve(master)) acc[mm] += w * ww;
      } else {
        acc[master] += w;
      }
    }
    auto& out = resolved[dof];
    out.assign(acc.begin(), acc.end());
    return out;
  };
  for (const auto& [dof, _] : raw) constraints_.push_back({dof, resolve(dof)});

  // Dirichlet mask: every dof on a boundary edge.
  for (int id : active) {
    const auto ai = static_cast<std::size_t>(m.active_index(id));
    for (int s = 0; s < 4; ++s) {
      if (!m.on_boundary(id, static_cast<Side>(s))) continue;
      for (int t = 0; t < nn; ++t) {
        int i = 0, j = 0;
        switch (static_cast<Side>(s)) {
          case Side::bottom: i = t; j = 0; break;
          case Side::right: i = order; j = t; break;
          case Side::top: i = t; j = order; break;
          case Side::left: i = 0; j = t; break;
        }
        const int dof = cell_dofs_[ai * n_loc + static_cast<std::size_t>(i + nn * j)];
        if (!constrained_[static_cast<std::size_t>(dof)]) dirichlet_[static_cast<std::size_t>(dof)] = 1;
      }
    }
  }

  free_index_.assign(n, -1);
  for (std::size_t i = 0; i < n; ++i)
    if (!constrained_[i] && !dirichlet_[i]) free_index_[i] = static_cast<int>(n_free_++);

  std::vector<const Constraint*> by_dof(n, nullptr);
  for (const auto& c : constraints_) by_dof[static_cast<std::size_t>(c.dof)] = &c;
  exp_ptr_.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (free_index_[i] >= 0) {
      exp_idx_.push_back(free_index_[i]);
      exp_w_.push_back(1.0);
    } else if (by_dof[i]) {
      for (const auto& [master, w] : by_dof[i]->masters) {
        const int f = free_index_[static_cast<std::size_t>(master)];
        if (f >= 0) {
          exp_idx_.push_back(f);
          exp_w_.push_back(w);
        }
      }
    }
    exp_ptr_[i + 1] = static_cast<int>(exp_idx_.size());
  }
}

std::span<const int> Space::expansion_indices(int dof) const {
  const auto b = static_cast<std::size_t>(exp_ptr_[static_cast<std::size_t>(dof)]);
  const auto e = static_cast<std::size_t>(exp_ptr_[static_cast<std::size_t>(dof) + 1]);
  return {exp_idx_.data() + b, e - b};
}

std::span<const double> Space::expansion_weights(int dof) const {
  const auto b = static_cast<std::size_t>(exp_ptr_[static_cast<std::size_t>(dof)]);
  const auto e = static_cast<std::size_t>(exp_ptr_[static_cast<std::size_t>(dof) + 1]);
  return {exp_w_.data() + b, e - b};
}

void Space::distribute(Eigen::VectorXd& c) const {
  for (const auto& con : constraints_) {
    double v = 0.0;
    for (const auto& [master, w] : con.masters) v += w * c[master];
    c[con.dof] = v;
  }
}

Eigen::VectorXd Space::expand(const Eigen::VectorXd& free_values) const {
  Eigen::VectorXd full = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_dofs()));
  for (std::size_t i = 0; i < n_dofs(); ++i)
    if (free_index_[i] >= 0) full[static_cast<Eigen::Index>(i)] = free_values[free_index_[i]];
  distribute(full);
  return full;
}

Eigen::VectorXd Space::restrict_dual(const Eigen::VectorXd& full) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_free_));
  for (std::size_t i = 0; i < n_dofs(); ++i) {
    const auto idx = expansion_indices(static_cast<int>(i));
    const auto w = expansion_weights(static_cast<int>(i));
    for (std::size_t k = 0; k < idx.size(); ++k) out[idx[k]] += w[k] * full[static_cast<Eigen::Index>(i)];
  }
  return out;
}

double Space::max_norm(const Eigen::VectorXd& c) const {
  double m = 0.0;
  for (std::size_t i = 0; i < n_dofs(); ++i)
    if (!constrained_[i]) m = std::max(m, std::abs(c[static_cast<Eigen::Index>(i)]));
  return m;
}

FeFunction::FeFunction(std::shared_ptr<const Space> space)
    : space_(std::move(space)), coeffs_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(space_->n_dofs()))) {}

FeFunction::FeFunction(std::shared_ptr<const Space> space, Eigen::VectorXd coefficients)
    : space_(std::move(space)), coeffs_(std::move(coefficients)) {
  if (coeffs_.size() != static_cast<Eigen::Index>(space_->n_dofs()))
    throw std::invalid_argument("FeFunction: coefficient vector has wrong length");
}

ValueGrad FeFunction::evaluate_in_cell(int active_idx, const Point& ref) const {
  const Space& s = *space_;
  const Rect& b = s.mesh().cell(s.mesh().active_cells()[static_cast<std::size_t>(active_idx)]).box;
  const auto sv = shape_values(s.order(), ref);
  const auto dofs = s.cell_dofs(active_idx);
  ValueGrad out;
  for (std::size_t a = 0; a < dofs.size(); ++a) {
    const double c = coeffs_[dofs[a]];
    out.value += c * sv.values[a];
    out.grad[0] += c * sv.gradients[a][0];
    out.grad[1] += c * sv.gradients[a][1];
  }
  out.grad[0] *= 2.0 / (b.x1 - b.x0);
  out.grad[1] *= 2.0 / (b.y1 - b.y0);
  return out;
}

ValueGrad FeFunction::evaluate(const Point& p) const {
  const Mesh& m = space_->mesh();
  const auto cell = m.locate(p);
  if (!cell) throw std::out_of_range("evaluate: point outside the domain");
  return evaluate_in_cell(m.active_index(*cell), to_reference(m.cell(*cell).box, p));
}

FeFunction interpolate(std::shared_ptr<const Space> space, const std::function<double(const Point&)>& g) {
  FeFunction f(space);
  auto& c = f.coefficients();
  const auto pts = space->dof_points();
  for (std::size_t i = 0; i < pts.size(); ++i) c[static_cast<Eigen::Index>(i)] = g(pts[i]);
  space->distribute(c);
  return f;
}

FeFunction transfer(const FeFunction& f, std::shared_ptr<const Space> target) {
  const Mesh& src = f.space().mesh();
  const Mesh& dst = target->mesh();
  if (dst.cell_count() < src.cell_count() || !std::equal(src.cells().begin(), src.cells().end(), dst.cells().begin(),
                                                         [](const Cell& a, const Cell& b) {
                                                           return a.box == b.box && a.parent == b.parent;
                                                         }))
    throw std::invalid_argument("transfer: target mesh is not a refinement of the source mesh");

  FeFunction out(target);
  auto& c = out.coefficients();
  const auto nodes = reference_nodes(target->order());
  const auto active = dst.active_cells();
  for (std::size_t k = 0; k < active.size(); ++k) {
    int anc = active[k];
    while (static_cast<std::size_t>(anc) >= src.cell_count() || !src.cell(anc).active()) {
      anc = dst.cell(anc).parent;
      if (anc < 0) throw std::invalid_argument("transfer: mesh hierarchy mismatch");
    }
    const Rect& cb = dst.cell(active[k]).box;
    const Rect& ab = src.cell(anc).box;
    const int src_idx = src.active_index(anc);
    const auto dofs = target->cell_dofs(static_cast<int>(k));
    for (std::size_t a = 0; a < nodes.size(); ++a) {
      const Point ref = to_reference(ab, to_physical(cb, nodes[a]));
      c[dofs[a]] = f.evaluate_in_cell(src_idx, ref).value;
    }
  }
  target->distribute(c);
  return out;
}

FeFunction embed(const FeFunction& f, std::shared_ptr<const Space> target) {
  if (&f.space().mesh() != &target->mesh() && !(f.space().mesh() == target->mesh()))
    throw std::invalid_argument("embed: spaces live on different meshes");
  if (target->order() < f.space().order()) throw std::invalid_argument("embed: target order is lower than source order");
  return transfer(f, std::move(target));
}

void write_csv(const FeFunction& f, std::ostream& out) {
  out << "dof_id,x,y,value\n";
  const auto pts = f.space().dof_points();
  out.precision(17);
  for (std::size_t i = 0; i < pts.size(); ++i)
    out << i << ',' << pts[i].x << ',' << pts[i].y << ',' << f.coefficients()[static_cast<Eigen::Index>(i)] << '\n';
}

}  // namespace dwr
