#pragma once

#include <Eigen/Core>

#include <array>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "dwr/mesh.hpp"

namespace dwr {

/// Tensor Gauss rule on the reference square [-1,1]^2.
struct QuadratureRule {
  std::vector<Point> points;
  std::vector<double> weights;
  int degree = 0;  // exact for x^a y^b with a,b <= degree

  static QuadratureRule gauss(int points_per_direction);
};

/// Gauss-Legendre nodes and weights on [-1,1].
std::vector<std::pair<double, double>> gauss_legendre(int n);
/// Gauss-Legendre nodes and weights mapped to [0,1].
std::vector<std::pair<double, double>> gauss_legendre_unit(int n);

struct ShapeValues {
  std::vector<double> values;
  std::vector<std::array<double, 2>> gradients;  // with respect to reference coordinates
};

/// Lagrange tensor basis of order 1 or 2; local index i + (order+1)*j.
ShapeValues shape_values(int order, const Point& reference_point);
/// Reference coordinates of the local nodes.
std::vector<Point> reference_nodes(int order);

struct Constraint {
  int dof = -1;
  std::vector<std::pair<int, double>> masters;  // resolved to unconstrained dofs
};

/// Continuous Q1/Q2 space with hanging-node constraints and a Dirichlet mask
/// on all boundary dofs.
class Space {
 public:
  Space(std::shared_ptr<const Mesh> mesh, int order);

  int order() const { return order_; }
  int dofs_per_cell() const { return (order_ + 1) * (order_ + 1); }
  const Mesh& mesh() const { return *mesh_; }
  const std::shared_ptr<const Mesh>& mesh_ptr() const { return mesh_; }

  std::size_t n_dofs() const { return points_.size(); }
  std::size_t n_free() const { return n_free_; }

  /// Global dofs of the active cell with the given active index.
  std::span<const int> cell_dofs(int active_idx) const {
    const auto n = static_cast<std::size_t>(dofs_per_cell());
    return {cell_dofs_.data() + static_cast<std::size_t>(active_idx) * n, n};
  }
  std::span<const Point> dof_points() const { return points_; }
  bool is_constrained(int dof) const { return constrained_[static_cast<std::size_t>(dof)] != 0; }
  bool is_dirichlet(int dof) const { return dirichlet_[static_cast<std::size_t>(dof)] != 0; }
  int free_index(int dof) const { return free_index_[static_cast<std::size_t>(dof)]; }
  std::span<const Constraint> constraints() const { return constraints_; }

  /// Weights expressing a global dof through free dofs (homogeneous Dirichlet).
  std::span<const int> expansion_indices(int dof) const;
  std::span<const double> expansion_weights(int dof) const;

  /// Overwrites constrained coefficients with their master combinations.
  void distribute(Eigen::VectorXd& coefficients) const;
  /// Full coefficient vector from free values; Dirichlet entries zero.
  Eigen::VectorXd expand(const Eigen::VectorXd& free_values) const;
  /// Free-dof vector sum_dof w(dof,p) * full[dof]; maps a functional on the
  /// unconstrained cellwise basis to one on the constrained space.
  Eigen::VectorXd restrict_dual(const Eigen::VectorXd& full) const;
  /// Max |c| over dofs that carry no hanging constraint.
  double max_norm(const Eigen::VectorXd& coefficients) const;

 private:
  std::shared_ptr<const Mesh> mesh_;
  int order_;
  std::vector<Point> points_;
  std::vector<int> cell_dofs_;
  std::vector<char> constrained_;
  std::vector<char> dirichlet_;
  std::vector<int> free_index_;
  std::size_t n_free_ = 0;
  std::vector<Constraint> constraints_;
  std::vector<int> exp_ptr_;
  std::vector<int> exp_idx_;
  std::vector<double> exp_w_;
};

struct ValueGrad {
  double value = 0.0;
  std::array<double, 2> grad{0.0, 0.0};
};

/// Coefficient vector bound to a space.
class FeFunction {
 public:
  explicit FeFunction(std::shared_ptr<const Space> space);
  FeFunction(std::shared_ptr<const Space> space, Eigen::VectorXd coefficients);

  const Space& space() const { return *space_; }
  const std::shared_ptr<const Space>& space_ptr() const { return space_; }
  Eigen::VectorXd& coefficients() { return coeffs_; }
  const Eigen::VectorXd& coefficients() const { return coeffs_; }

  /// Throws std::out_of_range when p lies outside the domain.
  ValueGrad evaluate(const Point& p) const;
  ValueGrad evaluate_in_cell(int active_idx, const Point& reference_point) const;

 private:
  std::shared_ptr<const Space> space_;
  Eigen::VectorXd coeffs_;
};

/// Maps a physical point of an axis-aligned cell to reference coordinates.
inline Point to_reference(const Rect& r, const Point& p) {
  return {2.0 * (p.x - r.x0) / (r.x1 - r.x0) - 1.0, 2.0 * (p.y - r.y0) / (r.y1 - r.y0) - 1.0};
}
inline Point to_physical(const Rect& r, const Point& ref) {
  return {r.x0 + 0.5 * (ref.x + 1.0) * (r.x1 - r.x0), r.y0 + 0.5 * (ref.y + 1.0) * (r.y1 - r.y0)};
}

FeFunction interpolate(std::shared_ptr<const Space> space, const std::function<double(const Point&)>& g);

/// Exact injection of a function into a space on the same mesh with order >= source order.
FeFunction embed(const FeFunction& f, std::shared_ptr<const Space> target);

/// Cellwise evaluation of f on a space over the same mesh or a refinement of it.
/// Dirichlet dofs keep the transferred values.
FeFunction transfer(const FeFunction& f, std::shared_ptr<const Space> target);

/// CSV `dof_id,x,y,value`.
void write_csv(const FeFunction& f, std::ostream& out);

}  // namespace dwr
