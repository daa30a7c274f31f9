#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "dwr/forms.hpp"
#include "dwr/space.hpp"

using namespace dwr;

namespace {

std::shared_ptr<const Mesh> square(int refinements, double a = 0.0, double b = 1.0) {
  return std::make_shared<const Mesh>(Mesh::build(DomainSpec::rectangle(a, a, b, b), refinements));
}

std::shared_ptr<const Mesh> hanging_mesh() {
  Mesh m = Mesh::build(DomainSpec::rectangle(0, 0, 1, 1), 1);
  int ids[] = {m.active_cells()[0]};
  m = m.refine(ids);
  int ids2[] = {m.active_cells()[m.n_active() - 1], m.locate({0.2, 0.2}).value()};
  return std::make_shared<const Mesh>(m.refine(ids2));
}

FeFunction random_function(std::shared_ptr<const Space> s, std::mt19937& rng) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  FeFunction f(s);
  for (Eigen::Index i = 0; i < f.coefficients().size(); ++i) f.coefficients()[i] = d(rng);
  s->distribute(f.coefficients());
  return f;
}

}  // namespace

TEST_CASE("dof counts") {
  auto m = square(0);
  CHECK(Space(m, 1).n_dofs() == 4);
  CHECK(Space(m, 2).n_dofs() == 9);
  CHECK(Space(m, 1).constraints().empty());
  CHECK(Space(m, 1).n_free() == 0);
  CHECK(Space(square(1), 1).n_free() == 1);
  CHECK_THROWS(Space(m, 3));
}

TEST_CASE("Q1 dofs coincide with mesh vertices") {
  auto m = hanging_mesh();
  Space s(m, 1);
  REQUIRE(s.n_dofs() == m->vertices().size());
  for (std::size_t i = 0; i < s.n_dofs(); ++i) CHECK(s.dof_points()[i] == m->vertices()[i]);
}

TEST_CASE("hanging constraints") {
  Mesh m = Mesh::build(DomainSpec::rectangle(0, 0, 1, 1), 1);
  int ids[] = {m.locate({0.25, 0.25}).value()};
  auto mesh = std::make_shared<const Mesh>(m.refine(ids));
  Space q1(mesh, 1);
  REQUIRE(q1.constraints().size() == 2);
  for (const auto& c : q1.constraints()) {
    REQUIRE(c.masters.size() == 2);
    CHECK(c.masters[0].second == 0.5);
    CHECK(c.masters[1].second == 0.5);
    CHECK_FALSE(q1.is_dirichlet(c.dof));
  }
  Space q2(mesh, 2);
  REQUIRE(q2.constraints().size() == 4);
  for (const auto& c : q2.constraints()) {
    double sum = 0.0;
    std::vector<double> w;
    for (const auto& [m2, wt] : c.masters) {
      sum += wt;
      w.push_back(wt);
      CHECK_FALSE(q2.is_constrained(m2));
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
    std::sort(w.begin(), w.end());
    REQUIRE(w.size() == 3);
    CHECK(w[0] == -0.125);
    CHECK(w[1] == 0.375);
    CHECK(w[2] == 0.75);
  }
}

TEST_CASE("shape functions") {
  for (int order : {1, 2}) {
    const auto nodes = reference_nodes(order);
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      const auto sv = shape_values(order, nodes[k]);
      for (std::size_t j = 0; j < nodes.size(); ++j) CHECK(sv.values[j] == doctest::Approx(j == k ? 1.0 : 0.0));
    }
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    for (int t = 0; t < 20; ++t) {
      const Point p{d(rng), d(rng)};
      const auto sv = shape_values(order, p);
      double sum = 0.0;
      for (double v : sv.values) sum += v;
      CHECK(std::abs(sum - 1.0) <= 1e-14);
      // Gradients against central differences.
      const double h = 1e-6;
      const auto px = shape_values(order, {p.x + h, p.y}), mx = shape_values(order, {p.x - h, p.y});
      const auto py = shape_values(order, {p.x, p.y + h}), my = shape_values(order, {p.x, p.y - h});
      for (std::size_t a = 0; a < sv.values.size(); ++a) {
        CHECK(sv.gradients[a][0] == doctest::Approx((px.values[a] - mx.values[a]) / (2 * h)).epsilon(1e-8));
        CHECK(sv.gradients[a][1] == doctest::Approx((py.values[a] - my.values[a]) / (2 * h)).epsilon(1e-8));
      }
    }
  }
  const auto c = shape_values(1, {0.0, 0.0});
  for (double v : c.values) CHECK(v == 0.25);
}

TEST_CASE("quadrature exactness") {
  for (int n : {3, 5}) {
    const auto q = QuadratureRule::gauss(n);
    double wsum = 0.0;
    for (double w : q.weights) wsum += w;
    CHECK(wsum == doctest::Approx(4.0).epsilon(1e-14));
    for (int a = 0; a <= q.degree; ++a)
      for (int b = 0; a + b <= q.degree; ++b) {
        double s = 0.0;
        for (std::size_t i = 0; i < q.points.size(); ++i)
          s += q.weights[i] * std::pow(q.points[i].x, a) * std::pow(q.points[i].y, b);
        const double ex = (a % 2 ? 0.0 : 2.0 / (a + 1)) * (b % 2 ? 0.0 : 2.0 / (b + 1));
        CHECK(std::abs(s - ex) <= 1e-13 * std::max(1.0, std::abs(ex)));
      }
  }
}

TEST_CASE("interpolation reproduces polynomials") {
  auto m = hanging_mesh();
  auto q1 = std::make_shared<const Space>(m, 1);
  auto q2 = std::make_shared<const Space>(m, 2);
  const auto f1 = interpolate(q1, [](const Point& p) { return p.x + p.y; });
  CHECK(std::abs(f1.evaluate({0.3, 0.4}).value - 0.7) <= 1e-13);
  const auto f2 = interpolate(q2, [](const Point& p) { return p.x * p.x * p.y; });
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    const Point p{d(rng), d(rng)};
    CHECK(std::abs(f2.evaluate(p).value - p.x * p.x * p.y) <= 1e-12);
    const auto g = f2.evaluate(p).grad;
    CHECK(std::abs(g[0] - 2 * p.x * p.y) <= 1e-11);
    CHECK(std::abs(g[1] - p.x * p.x) <= 1e-11);
  }
  const auto one = interpolate(q2, [](const Point&) { return 1.0; });
  for (Eigen::Index i = 0; i < one.coefficients().size(); ++i) CHECK(one.coefficients()[i] == 1.0);
  CHECK_THROWS_AS(f1.evaluate({1.5, 0.5}), std::out_of_range);
}

TEST_CASE("manufactured solution interpolant") {
  auto m = square(5, -1.0, 1.0);
  auto q2 = std::make_shared<const Space>(m, 2);
  const auto u = interpolate(q2, Manufactured::value);
  const double exact = std::sqrt(0.5) * (0.25 - 1.0) * (0.25 - 1.0);
  CHECK(exact == doctest::Approx(0.3977475644));
  CHECK(std::abs(u.evaluate({0.5, 0.5}).value - exact) <= 1e-3);
}

TEST_CASE("embedding Q1 into Q2 is exact") {
  auto m = hanging_mesh();
  auto q1 = std::make_shared<const Space>(m, 1);
  auto q2 = std::make_shared<const Space>(m, 2);
  std::mt19937 rng(5);
  const auto f = random_function(q1, rng);
  const auto g = embed(f, q2);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const Point p{d(rng), d(rng)};
    const double a = f.evaluate(p).value;
    CHECK(std::abs(g.evaluate(p).value - a) <= 1e-12 * (1.0 + std::abs(a)));
  }
  const auto xy = embed(interpolate(q1, [](const Point& p) { return p.x * p.y; }), q2);
  CHECK(xy.evaluate({0.3, 0.7}).value == doctest::Approx(0.21).epsilon(1e-13));
  auto other = std::make_shared<const Space>(square(2), 2);
  CHECK_THROWS_AS(embed(f, other), std::invalid_argument);
}

TEST_CASE("constrained functions are continuous across edges") {
  auto m = hanging_mesh();
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  for (int order : {1, 2}) {
    auto s = std::make_shared<const Space>(m, order);
    const auto f = random_function(s, rng);
    double worst = 0.0;
    int samples = 0;
    const auto active = m->active_cells();
    while (samples < 100) {
      const int k = static_cast<int>(d(rng) * static_cast<double>(active.size())) % static_cast<int>(active.size());
      const Rect& b = m->cell(active[k]).box;
      const int side = static_cast<int>(d(rng) * 4) % 4;
      const Point a = b.corner(side), e = b.corner(side + 1);
      const double t = d(rng);
      const Point p{a.x + t * (e.x - a.x), a.y + t * (e.y - a.y)};
      const auto nb = m->neighbor(active[k], static_cast<Side>(side));
      if (!nb) continue;
      // Evaluate from both cells.
      const double v1 = f.evaluate_in_cell(k, to_reference(b, p)).value;
      const double v2 = f.evaluate_in_cell(m->active_index(*nb), to_reference(m->cell(*nb).box, p)).value;
      if (!m->cell(*nb).box.contains(p)) continue;
      worst = std::max(worst, std::abs(v1 - v2));
      ++samples;
    }
    CHECK(worst <= 1e-12);
  }
}

TEST_CASE("transfer to a refined mesh preserves the function") {
  auto m = hanging_mesh();
  int ids[] = {m->active_cells()[2]};
  auto fine = std::make_shared<const Mesh>(m->refine(ids));
  std::mt19937 rng(4);
  for (int order : {1, 2}) {
    auto s = std::make_shared<const Space>(m, order);
    auto sf = std::make_shared<const Space>(fine, order);
    const auto f = random_function(s, rng);
    const auto g = transfer(f, sf);
    std::uniform_real_distribution<double> d(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
      const Point p{d(rng), d(rng)};
      CHECK(std::abs(g.evaluate(p).value - f.evaluate(p).value) <= 1e-12);
    }
    CHECK_THROWS(transfer(g, s));
  }
}

TEST_CASE("restrict_dual is the transpose of expand") {
  auto m = hanging_mesh();
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (int order : {1, 2}) {
    Space s(m, order);
    Eigen::VectorXd x(static_cast<Eigen::Index>(s.n_free())), y(static_cast<Eigen::Index>(s.n_dofs()));
    for (auto& v : x) v = d(rng);
    for (auto& v : y) v = d(rng);
    CHECK(s.expand(x).dot(y) == doctest::Approx(x.dot(s.restrict_dual(y))).epsilon(1e-13));
  }
}

TEST_CASE("csv dump") {
  auto s = std::make_shared<const Space>(square(0), 1);
  const auto f = interpolate(s, [](const Point& p) { return p.x; });
  std::ostringstream os;
  write_csv(f, os);
  CHECK(os.str().rfind("dof_id,x,y,value\n", 0) == 0);
  CHECK(os.str().find("2,1,0,1\n") != std::string::npos);
}
