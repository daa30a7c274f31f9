#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dwr/space.hpp"

namespace dwr {

using Vec2 = std::array<double, 2>;

inline double dot(const Vec2& a, const Vec2& b) { return a[0] * b[0] + a[1] * b[1]; }

/// Regularized p-Laplace data: -div((eps^2+|grad u|^2)^((p-2)/2) grad u) = f.
struct Problem {
  double p = 2.0;
  double eps = 1.0;
  std::function<double(const Point&)> f = [](const Point&) { return 0.0; };
  std::function<double(const Point&)> dirichlet;  // empty means homogeneous
  double scale = 1.0;  // multiplies the whole residual A(u)(v)

  void validate() const;

  /// Source for the exact solution sqrt(x^2+y^2)(x^2-1)(y^2-1).
  static Problem manufactured(double p, double eps);
  static Problem constant_source(double p, double eps, double f);
};

/// a(t) = (eps^2+t)^q, q = (p-2)/2, and its first three t-derivatives.
struct CoefficientDerivatives {
  double a = 1.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
};
CoefficientDerivatives coefficient(double p, double eps, double t);
/// Coefficient including the problem's residual scale.
CoefficientDerivatives coefficient(const Problem& pb, double t);

/// Sets Dirichlet dofs of u from the problem data and re-applies constraints.
void apply_dirichlet(const Problem& pb, FeFunction& u);

/// Manufactured exact solution with gradient and Hessian.
struct Manufactured {
  static double value(const Point& x);
  static Vec2 gradient(const Point& x);
  static std::array<double, 3> hessian(const Point& x);  // uxx, uxy, uyy
  static double source(double p, double eps, const Point& x);
};

// Pointwise integrands of the derivative forms; g is grad u at the point.
double pointwise_d1(const CoefficientDerivatives& c, const Vec2& g, const Vec2& phi, const Vec2& v);
double pointwise_d2(const CoefficientDerivatives& c, const Vec2& g, const Vec2& phi, const Vec2& psi, const Vec2& v);
double pointwise_d3(const CoefficientDerivatives& c, const Vec2& g, const Vec2& phi, const Vec2& psi, const Vec2& chi,
                    const Vec2& v);

/// Default Gauss points per direction for a field of the given order.
inline int default_quadrature(int order) { return order == 1 ? 3 : 5; }

/// Integrates kernel(x, values) over the domain, where values[k] is field k
/// evaluated at x. All fields must live on the same mesh. When per_cell is
/// given it receives the contribution of every active cell.
double integrate(std::span<const FeFunction* const> fields, int n_quad,
                 const std::function<double(const Point&, std::span<const ValueGrad>)>& kernel,
                 std::vector<double>* per_cell = nullptr);

// Scalar evaluations of A(u)(v) and its directional derivatives.
double form_value(const Problem& pb, const FeFunction& u, const FeFunction& v, int n_quad);
double form_d1(const Problem& pb, const FeFunction& u, const FeFunction& phi, const FeFunction& v, int n_quad);
double form_d2(const Problem& pb, const FeFunction& u, const FeFunction& phi, const FeFunction& psi,
               const FeFunction& v, int n_quad);
double form_d3(const Problem& pb, const FeFunction& u, const FeFunction& phi, const FeFunction& psi,
               const FeFunction& chi, const FeFunction& v, int n_quad);

/// B(u)(phi,psi,v) = int 2[(grad phi.grad psi)(grad u.grad v) + (grad u.grad phi)(grad psi.grad v)
///                      + (grad u.grad psi)(grad phi.grad v)]; the second derivative for p = 4.
double cubic_b_form(const FeFunction& u, const FeFunction& phi, const FeFunction& psi, const FeFunction& v,
                    int n_quad, std::vector<double>* per_cell = nullptr);

/// Residual and Jacobian on the free dofs of u's space.
class Assembler {
 public:
  Assembler(std::shared_ptr<const Space> space, int n_quad);

  /// A(u)(phi_i) for every global dof i, using the cellwise (unconstrained) basis.
  Eigen::VectorXd residual_full(const Problem& pb, const FeFunction& u) const;
  Eigen::VectorXd residual(const Problem& pb, const FeFunction& u) const {
    return space_->restrict_dual(residual_full(pb, u));
  }
  /// Matrix of A'(u)(phi_j, phi_i) over free dofs; symmetric.
  Eigen::SparseMatrix<double> jacobian(const Problem& pb, const FeFunction& u) const;

  const Space& space() const { return *space_; }
  int n_quad() const { return n_quad_; }

 private:
  std::shared_ptr<const Space> space_;
  int n_quad_;
  Eigen::SparseMatrix<double> pattern_;
};

/// Shape-function table of a space order at the points of a tensor Gauss rule.
struct ShapeTable {
  QuadratureRule rule;
  std::vector<ShapeValues> at;  // per quadrature point
};
const ShapeTable& shape_table(int order, int n_quad);

// ---------------------------------------------------------------------------
// Goal functionals

/// A bounded linear functional made of point evaluations and region integrals.
struct LinearFunctional {
  struct PointTerm {
    Point at;
    double coeff;
  };
  struct IntegralTerm {
    std::optional<Rect> region;  // nullopt: the whole domain
    double coeff;
  };
  std::vector<PointTerm> points;
  std::vector<IntegralTerm> integrals;

  double apply(const FeFunction& v) const;
  /// ell(phi_i) for every global dof of the space (cellwise basis).
  Eigen::VectorXd full_vector(const Space& space) const;
  /// ell(v psi_i) for the unconstrained Q1 hats psi_i of pu (same mesh as v).
  Eigen::VectorXd localize(const FeFunction& v, const Space& pu) const;
};

enum class GoalKind { point_value, point_product, mean_deviation_squared, subdomain_integral };

struct GoalTerm {
  GoalKind kind = GoalKind::point_value;
  double weight = 1.0;
  Point a{};       // evaluation point (product: first factor; mean deviation: c)
  Point b{};       // product: second factor
  Rect region{};   // subdomain integral
};

/// Weighted sum of goal terms. Every shipped term has a vanishing third
/// derivative, so no third-derivative interface exists.
struct Goal {
  std::string name;
  std::vector<GoalTerm> terms;

  static Goal point_value(Point x, std::string name = "point_value");
  static Goal point_product(Point a, Point b, std::string name = "point_product");
  static Goal mean_deviation_squared(Point c, std::string name = "mean_deviation_squared");
  static Goal subdomain_integral(Rect r, std::string name = "subdomain_integral");

  double value(const FeFunction& u) const;
  LinearFunctional derivative(const FeFunction& u) const;
  double second(const FeFunction& u, const FeFunction& phi, const FeFunction& psi) const;
  bool is_linear() const;

  Goal scaled(double w) const;
  Goal& operator+=(const Goal& other);
};

/// Integral of v over the domain intersected with region (nullopt: whole domain).
double integrate_over(const FeFunction& v, const std::optional<Rect>& region, int n_quad);

}  // namespace dwr
