#pragma once

#include <array>
#include <compare>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dwr {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend auto operator<=>(const Point&, const Point&) = default;
};

inline Point midpoint(const Point& a, const Point& b) {
  return {(a.x + b.x) * 0.5, (a.y + b.y) * 0.5};
}

/// Axis-aligned rectangle [x0,x1] x [y0,y1].
struct Rect {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

  double area() const { return (x1 - x0) * (y1 - y0); }
  bool contains(const Point& p) const {
    return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1;
  }
  Point center() const { return {(x0 + x1) * 0.5, (y0 + y1) * 0.5}; }
  /// Corner k in counter-clockwise order starting at (x0,y0).
  Point corner(int k) const;

  friend bool operator==(const Rect&, const Rect&) = default;
};

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Domain as a union of axis-aligned rectangles that meet along full edges.
struct DomainSpec {
  std::vector<Rect> cells;

  static DomainSpec rectangle(double x0, double y0, double x1, double y1);
  /// Reads the `v <x> <y>` / `q <i0> <i1> <i2> <i3>` text format.
  static DomainSpec from_file(const std::filesystem::path& path);
  static DomainSpec parse(const std::string& text);
};

/// Edge numbering used throughout: 0 bottom, 1 right, 2 top, 3 left.
enum class Side : int { bottom = 0, right = 1, top = 2, left = 3 };

struct Cell {
  Rect box;
  int level = 0;
  int parent = -1;
  int first_child = -1;  // children are first_child .. first_child+3 (SW, SE, NW, NE)
  int root = -1;

  bool active() const { return first_child < 0; }

  friend bool operator==(const Cell&, const Cell&) = default;
};

struct HangingNode {
  int node = -1;                  // vertex id of the hanging midpoint
  std::array<int, 2> endpoints{}; // vertex ids of the coarse edge, lexicographic order
  int coarse_cell = -1;
};

/// Quadtree of rectangular cells. Immutable: refine() returns a new mesh in
/// which every cell of the old mesh keeps its id.
class Mesh {
 public:
  static Mesh build(const DomainSpec& spec, int initial_refinements);

  /// Quadrisects the marked active cells plus whatever closure is needed to
  /// keep the mesh 1-irregular.
  Mesh refine(std::span<const int> marked) const;
  /// Splits every active cell once.
  Mesh refine_all() const;

  const Cell& cell(int id) const { return cells_.at(static_cast<std::size_t>(id)); }
  std::size_t cell_count() const { return cells_.size(); }
  std::span<const int> active_cells() const { return active_; }
  std::size_t n_active() const { return active_.size(); }
  /// Position of an active cell in active_cells(), or -1.
  int active_index(int cell_id) const { return active_index_.at(static_cast<std::size_t>(cell_id)); }

  /// Corners of active cells, sorted lexicographically; the index is the vertex id.
  std::span<const Point> vertices() const { return vertices_; }
  std::optional<int> vertex_id(const Point& p) const;
  bool is_vertex(const Point& p) const { return vertex_id(p).has_value(); }
  /// Number of active cells having vertex v as a corner.
  int cells_at_vertex(int v) const { return vertex_valence_.at(static_cast<std::size_t>(v)); }

  std::vector<HangingNode> hanging_nodes() const;

  /// Active cell containing p (closed cells, first match in deterministic
  /// descent order), or nullopt when p lies outside the domain.
  std::optional<int> locate(const Point& p) const;
  /// True if the given edge of an active cell lies on the domain boundary.
  bool on_boundary(int cell_id, Side side) const;
  /// Active neighbor across an edge whose region contains the point just
  /// beyond the edge midpoint, or nullopt at the boundary.
  std::optional<int> neighbor(int cell_id, Side side) const;

  double area() const;
  int max_level() const;
  std::size_t n_roots() const { return n_roots_; }

  /// Cell table access for persistence. from_cells validates the tree.
  std::span<const Cell> cells() const { return cells_; }
  std::span<const std::array<bool, 4>> root_boundary() const { return root_boundary_; }
  static Mesh from_cells(std::vector<Cell> cells, std::vector<std::array<bool, 4>> root_boundary);

  friend bool operator==(const Mesh& a, const Mesh& b) { return a.cells_ == b.cells_; }

 private:
  Mesh() = default;

  void split(int cell_id);
  void split_with_closure(int cell_id);
  void finalize();
  std::optional<int> locate_in_tree(const Point& p) const;

  std::vector<Cell> cells_;
  std::size_t n_roots_ = 0;
  std::vector<std::array<bool, 4>> root_boundary_;

  std::vector<int> active_;
  std::vector<int> active_index_;
  std::vector<Point> vertices_;
  std::vector<int> vertex_valence_;
};

}  // namespace dwr
