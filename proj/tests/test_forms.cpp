#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "dwr/forms.hpp"

using namespace dwr;

namespace {

std::shared_ptr<const Mesh> square(int refinements, double a = 0.0, double b = 1.0) {
  return std::make_shared<const Mesh>(Mesh::build(DomainSpec::rectangle(a, a, b, b), refinements));
}

std::shared_ptr<const Mesh> hanging_mesh() {
  Mesh m = Mesh::build(DomainSpec::rectangle(0, 0, 1, 1), 2);
  int ids[] = {m.locate({0.1, 0.1}).value(), m.locate({0.6, 0.4}).value()};
  return std::make_shared<const Mesh>(m.refine(ids));
}

FeFunction random_function(std::shared_ptr<const Space> s, std::mt19937& rng, bool zero_boundary = true) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  FeFunction f(s);
  for (Eigen::Index i = 0; i < f.coefficients().size(); ++i)
    f.coefficients()[i] = zero_boundary && s->is_dirichlet(static_cast<int>(i)) ? 0.0 : d(rng);
  s->distribute(f.coefficients());
  return f;
}

FeFunction axpy(const FeFunction& u, double h, const FeFunction& v) {
  return FeFunction(u.space_ptr(), u.coefficients() + h * v.coefficients());
}

}  // namespace

TEST_CASE("coefficient values") {
  const auto c4 = coefficient(4.0, 1.0, 0.0);
  CHECK(c4.a == 1.0);
  CHECK(c4.a1 == 1.0);
  CHECK(c4.a2 == 0.0);
  CHECK(c4.a3 == 0.0);
  const auto c2 = coefficient(2.0, 1e-10, 3.0);
  CHECK(c2.a == 1.0);
  CHECK(c2.a1 == 0.0);
  const auto tiny = coefficient(3.0, 1e-10, 0.0);
  CHECK(std::isfinite(tiny.a));
  CHECK(std::isfinite(tiny.a1));
  CHECK(std::isfinite(tiny.a2));
  CHECK(std::isfinite(tiny.a3));
  const auto c3 = coefficient(3.0, 0.5, 2.0);
  const double t = 2.25;
  CHECK(c3.a == doctest::Approx(std::pow(t, 0.5)));
  CHECK(c3.a1 == doctest::Approx(0.5 * std::pow(t, -0.5)));
  CHECK(c3.a2 == doctest::Approx(-0.25 * std::pow(t, -1.5)));
  CHECK(c3.a3 == doctest::Approx(0.375 * std::pow(t, -2.5)));
}

TEST_CASE("residual and Jacobian on a 2x2 mesh") {
  auto s = std::make_shared<const Space>(square(1), 1);
  const Assembler as(s, 3);
  const FeFunction zero(s);
  const auto pb = Problem::constant_source(4.0, 1e-10, 1.0);
  const auto r = as.residual(pb, zero);
  REQUIRE(r.size() == 1);
  CHECK(r[0] == doctest::Approx(-0.25).epsilon(1e-14));
  const auto pb2 = Problem::constant_source(2.0, 1.0, 1.0);
  const auto J = as.jacobian(pb2, zero);
  CHECK(J.rows() == 1);
  CHECK(J.coeff(0, 0) == doctest::Approx(8.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("Jacobian is symmetric and matches form_d1") {
  auto m = hanging_mesh();
  std::mt19937 rng(1);
  for (int order : {1, 2}) {
    auto s = std::make_shared<const Space>(m, order);
    const Assembler as(s, default_quadrature(order));
    const auto pb = Problem::constant_source(3.0, 0.5, 1.0);
    const auto u = random_function(s, rng);
    const auto J = as.jacobian(pb, u);
    Eigen::SparseMatrix<double> asym = J - Eigen::SparseMatrix<double>(J.transpose());
    CHECK(asym.norm() <= 1e-12 * J.norm());
    Eigen::VectorXd x(static_cast<Eigen::Index>(s->n_free())), y(x.size());
    for (auto& v : x) v = std::uniform_real_distribution<double>(-1, 1)(rng);
    for (auto& v : y) v = std::uniform_real_distribution<double>(-1, 1)(rng);
    const FeFunction phi(s, s->expand(x)), v(s, s->expand(y));
    CHECK(y.dot(J * x) == doctest::Approx(form_d1(pb, u, phi, v, as.n_quad())).epsilon(1e-11));
    // Residual vector against the scalar form.
    CHECK(y.dot(as.residual(pb, u)) == doctest::Approx(form_value(pb, u, v, as.n_quad())).epsilon(1e-11));
  }
}

TEST_CASE("derivative forms agree with central differences") {
  auto s = std::make_shared<const Space>(hanging_mesh(), 2);
  std::mt19937 rng(17);
  const int nq = 5;
  for (double p : {3.0, 4.0}) {
    const auto pb = Problem::constant_source(p, 1.0, 1.0);
    const auto u = random_function(s, rng), phi = random_function(s, rng), psi = random_function(s, rng),
               chi = random_function(s, rng), v = random_function(s, rng);
    auto err1 = [&](double h) {
      const double fd = (form_value(pb, axpy(u, h, phi), v, nq) - form_value(pb, axpy(u, -h, phi), v, nq)) / (2 * h);
      return std::abs(fd - form_d1(pb, u, phi, v, nq));
    };
    auto err2 = [&](double h) {
      const double fd =
          (form_d1(pb, axpy(u, h, psi), phi, v, nq) - form_d1(pb, axpy(u, -h, psi), phi, v, nq)) / (2 * h);
      return std::abs(fd - form_d2(pb, u, phi, psi, v, nq));
    };
    auto err3 = [&](double h) {
      const double fd = (form_d2(pb, axpy(u, h, chi), phi, psi, v, nq) -
                         form_d2(pb, axpy(u, -h, chi), phi, psi, v, nq)) /
                        (2 * h);
      return std::abs(fd - form_d3(pb, u, phi, psi, chi, v, nq));
    };
    for (auto err : {std::function<double(double)>(err1), std::function<double(double)>(err2),
                     std::function<double(double)>(err3)}) {
      const double e1 = err(1e-3), e2 = err(5e-4);
      if (p == 4.0 && e1 < 1e-7) continue;  // polynomial: FD is exact up to roundoff
      const double order = std::log2(e1 / e2);
      CHECK(order >= 1.8);
    }
  }
}

TEST_CASE("derivative forms are symmetric in their directions") {
  auto s = std::make_shared<const Space>(hanging_mesh(), 2);
  std::mt19937 rng(23);
  const auto pb = Problem::constant_source(3.0, 0.3, 0.0);
  const auto u = random_function(s, rng), a = random_function(s, rng), b = random_function(s, rng),
             c = random_function(s, rng), v = random_function(s, rng);
  const double d2 = form_d2(pb, u, a, b, v, 5);
  CHECK(form_d2(pb, u, b, a, v, 5) == doctest::Approx(d2).epsilon(1e-13));
  CHECK(form_d2(pb, u, a, v, b, 5) == doctest::Approx(d2).epsilon(1e-13));
  const double d3 = form_d3(pb, u, a, b, c, v, 5);
  CHECK(form_d3(pb, u, c, a, b, v, 5) == doctest::Approx(d3).epsilon(1e-13));
  CHECK(form_d3(pb, u, a, b, v, c, 5) == doctest::Approx(d3).epsilon(1e-13));
  // Linear problem: higher derivatives vanish.
  const auto lin = Problem::constant_source(2.0, 1.0, 0.0);
  CHECK(form_d2(lin, u, a, b, v, 5) == 0.0);
  CHECK(form_d3(lin, u, a, b, c, v, 5) == 0.0);
  // For p = 4 the second derivative is the cubic B-form.
  const auto quartic = Problem::constant_source(4.0, 1e-10, 0.0);
  CHECK(form_d2(quartic, u, a, b, v, 5) == doctest::Approx(cubic_b_form(u, a, b, v, 5)).epsilon(1e-12));
}

TEST_CASE("manufactured solution derivatives") {
  const auto g = Manufactured::gradient({0.5, 0.0});
  CHECK(g[0] == doctest::Approx(0.25));
  CHECK(std::abs(g[1]) <= 1e-15);
  const double h = 1e-5;
  std::mt19937 rng(31);
  std::uniform_real_distribution<double> d(-0.9, 0.9);
  for (int i = 0; i < 20; ++i) {
    const Point x{d(rng), d(rng)};
    const auto gx = Manufactured::gradient(x);
    CHECK(gx[0] == doctest::Approx((Manufactured::value({x.x + h, x.y}) - Manufactured::value({x.x - h, x.y})) / (2 * h))
                       .epsilon(1e-7));
    CHECK(gx[1] == doctest::Approx((Manufactured::value({x.x, x.y + h}) - Manufactured::value({x.x, x.y - h})) / (2 * h))
                       .epsilon(1e-7));
    const auto H = Manufactured::hessian(x);
    const auto gp = Manufactured::gradient({x.x + h, x.y}), gm = Manufactured::gradient({x.x - h, x.y});
    CHECK(H[0] == doctest::Approx((gp[0] - gm[0]) / (2 * h)).epsilon(1e-6));
    CHECK(H[1] == doctest::Approx((gp[1] - gm[1]) / (2 * h)).epsilon(1e-6));
    const auto gq = Manufactured::gradient({x.x, x.y + h}), gr = Manufactured::gradient({x.x, x.y - h});
    CHECK(H[2] == doctest::Approx((gq[1] - gr[1]) / (2 * h)).epsilon(1e-6));
    // Symmetries of the source.
    const double f = Manufactured::source(4.0, 1e-10, x);
    CHECK(Manufactured::source(4.0, 1e-10, {x.y, x.x}) == doctest::Approx(f).epsilon(1e-12));
    CHECK(Manufactured::source(4.0, 1e-10, {-x.x, x.y}) == doctest::Approx(f).epsilon(1e-12));
    CHECK(std::isfinite(f));
  }
  CHECK(std::isfinite(Manufactured::source(4.0, 1e-10, {0.0, 0.0})));
}

TEST_CASE("manufactured source is consistent with the discrete residual") {
  const auto pb = Problem::manufactured(4.0, 1e-10);
  std::vector<double> norms;
  for (int k : {3, 4, 5}) {
    auto s = std::make_shared<const Space>(square(k, -1.0, 1.0), 2);
    const Assembler as(s, 5);
    const auto u = interpolate(s, Manufactured::value);
    norms.push_back(as.residual(pb, u).cwiseAbs().maxCoeff());
  }
  CHECK(norms[1] < norms[0] / 2);
  CHECK(norms[2] < norms[1] / 2);
}

TEST_CASE("residual scale multiplies every form") {
  auto s = std::make_shared<const Space>(hanging_mesh(), 1);
  std::mt19937 rng(8);
  const auto u = random_function(s, rng), v = random_function(s, rng), phi = random_function(s, rng);
  auto pb = Problem::constant_source(3.0, 0.2, 1.0);
  const double r = form_value(pb, u, v, 3), d = form_d1(pb, u, phi, v, 3);
  pb.scale = 7.0;
  CHECK(form_value(pb, u, v, 3) == doctest::Approx(7.0 * r).epsilon(1e-13));
  CHECK(form_d1(pb, u, phi, v, 3) == doctest::Approx(7.0 * d).epsilon(1e-13));
}

TEST_CASE("problem validation") {
  CHECK_THROWS(Problem::constant_source(1.0, 1.0, 1.0).validate());
  CHECK_THROWS(Problem::constant_source(3.0, 0.0, 1.0).validate());
  CHECK_NOTHROW(Problem::constant_source(3.0, 1e-10, 1.0).validate());
}

TEST_CASE("goal values") {
  auto s = std::make_shared<const Space>(square(2, -1.0, 1.0), 1);
  const FeFunction zero(s);
  CHECK(Goal::point_product({0.5, 0.5}, {-0.5, 0.5}).value(zero) == 1.0);
  const auto lin = interpolate(s, [](const Point& p) { return p.x + 2 * p.y; });
  CHECK(Goal::point_value({0.25, 0.5}).value(lin) == doctest::Approx(1.25));
  CHECK(Goal::subdomain_integral({0, 0, 1, 1}).value(lin) == doctest::Approx(1.5));
  // Region partially outside the domain is clipped.
  CHECK(Goal::subdomain_integral({0, 0, 5, 5}).value(lin) == doctest::Approx(1.5));
  const auto c = interpolate(s, [](const Point&) { return 3.0; });
  CHECK(std::abs(Goal::mean_deviation_squared({0.1, 0.2}).value(c)) <= 1e-24);
  auto q2 = std::make_shared<const Space>(square(4, -1.0, 1.0), 2);
  CHECK(std::abs(Goal::point_value({0.0, 0.0}).value(interpolate(q2, Manufactured::value))) <= 1e-15);
  CHECK(Goal::point_value({0, 0}).is_linear());
  CHECK_FALSE(Goal::point_product({0, 0}, {0.5, 0}).is_linear());

  auto ex2 = std::make_shared<const Mesh>(
      Mesh::build(DomainSpec::from_file(std::string(DWR_DATA_DIR) + "/example2_domain.mesh"), 1));
  auto s2 = std::make_shared<const Space>(ex2, 2);
  const auto one = interpolate(s2, [](const Point&) { return 1.0; });
  CHECK(Goal::subdomain_integral({2, 2, 3, 3}).value(one) == doctest::Approx(1.0));
  CHECK(Goal::point_product({2.9, 2.1}, {2.1, 2.9}).value(one) == doctest::Approx(4.0));
}

TEST_CASE("goal derivatives agree with central differences") {
  auto s = std::make_shared<const Space>(hanging_mesh(), 2);
  std::mt19937 rng(41);
  const auto u = random_function(s, rng), phi = random_function(s, rng), psi = random_function(s, rng);
  std::vector<Goal> goals{Goal::point_value({0.3, 0.6}), Goal::point_product({0.2, 0.7}, {0.55, 0.45}),
                          Goal::mean_deviation_squared({0.4, 0.4}), Goal::subdomain_integral({0.25, 0.25, 0.8, 0.6})};
  Goal combo = goals[1].scaled(0.5);
  combo += goals[2].scaled(-2.0);
  goals.push_back(combo);
  const double h = 1e-4;
  for (const auto& g : goals) {
    const auto d = g.derivative(u);
    const double fd = (g.value(axpy(u, h, phi)) - g.value(axpy(u, -h, phi))) / (2 * h);
    CHECK(d.apply(phi) == doctest::Approx(fd).epsilon(1e-7));
    CHECK(d.full_vector(*s).dot(phi.coefficients()) == doctest::Approx(d.apply(phi)).epsilon(1e-12));
    const double fd2 = (g.derivative(axpy(u, h, psi)).apply(phi) - g.derivative(axpy(u, -h, psi)).apply(phi)) / (2 * h);
    CHECK(g.second(u, phi, psi) == doctest::Approx(fd2).epsilon(1e-6));
    // Localization against Q1 hats sums to the functional.
    const Space pu(s->mesh_ptr(), 1);
    CHECK(d.localize(phi, pu).sum() == doctest::Approx(d.apply(phi)).epsilon(1e-12));
  }
}
