#include "dwr/mesh.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>

namespace dwr {

Point Rect::corner(int k) const {
  switch (k & 3) {
    case 0: return {x0, y0};
    case 1: return {x1, y0};
    case 2: return {x1, y1};
    default: return {x0, y1};
  }
}

namespace {

std::array<Point, 2> edge_endpoints(const Rect& r, Side side) {
  const int s = static_cast<int>(side);
  return {r.corner(s), r.corner(s + 1)};
}

// Union-find for the root connectivity check.
struct DisjointSets {
  std::vector<int> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

std::string rect_str(const Rect& r) {
  std::ostringstream os;
  os << "[" << r.x0 << "," << r.x1 << "]x[" << r.y0 << "," << r.y1 << "]";
  return os.str();
}

}  // namespace

DomainSpec DomainSpec::rectangle(double x0, double y0, double x1, double y1) {
  return DomainSpec{{Rect{x0, y0, x1, y1}}};
}

DomainSpec DomainSpec::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw GeometryError("cannot open mesh file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

DomainSpec DomainSpec::parse(const std::string& text) {
  std::vector<Point> verts;
  DomainSpec spec;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& what) {
    throw GeometryError("mesh file line " + std::to_string(lineno) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      Point p;
      if (!(ls >> p.x >> p.y)) fail("expected `v <x> <y>`");
      verts.push_back(p);
    } else if (tag == "q") {
      std::array<long, 4> idx{};
      for (auto& i : idx)
        if (!(ls >> i)) fail("expected `q <i0> <i1> <i2> <i3>`");
      std::array<Point, 4> pts;
      for (int k = 0; k < 4; ++k) {
        if (idx[k] < 0 || idx[k] >= static_cast<long>(verts.size()))
          fail("vertex index " + std::to_string(idx[k]) + " out of range");
        pts[k] = verts[static_cast<std::size_t>(idx[k])];
      }
      Rect r{pts[0].x, pts[0].y, pts[0].x, pts[0].y};
      for (const auto& p : pts) {
        r.x0 = std::min(r.x0, p.x);
        r.x1 = std::max(r.x1, p.x);
        r.y0 = std::min(r.y0, p.y);
        r.y1 = std::max(r.y1, p.y);
      }
      // Must be a rotation of the counter-clockwise corner sequence.
      int start = -1;
      for (int k = 0; k < 4; ++k)
        if (pts[0] == r.corner(k)) start = k;
      bool ok = start >= 0 && r.x1 > r.x0 && r.y1 > r.y0;
      for (int k = 0; ok && k < 4; ++k) ok = pts[k] == r.corner(start + k);
      if (!ok) fail("quad is not an axis-aligned counter-clockwise rectangle");
      spec.cells.push_back(r);
    } else {
      fail("unknown record `" + tag + "`");
    }
  }
  if (spec.cells.empty()) throw GeometryError("mesh file contains no quads");
  return spec;
}

Mesh Mesh::build(const DomainSpec& spec, int initial_refinements) {
  if (initial_refinements < 0) throw std::invalid_argument("initial_refinements must be >= 0");
  if (spec.cells.empty()) throw GeometryError("domain has no cells");

  std::vector<Rect> roots = spec.cells;
  for (const auto& r : roots)
    if (!(r.x1 > r.x0 && r.y1 > r.y0)) throw GeometryError("degenerate rectangle " + rect_str(r));
  std::stable_sort(roots.begin(), roots.end(), [](const Rect& a, const Rect& b) {
    return a.center() < b.center();
  });

  const std::size_t n = roots.size();
  std::vector<std::array<bool, 4>> boundary(n, {true, true, true, true});
  DisjointSets components(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const Rect& a = roots[i];
      const Rect& b = roots[j];
      const double ox = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
      const double oy = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
      if (ox > 0 && oy > 0)
        throw GeometryError("overlapping rectangles " + rect_str(a) + " and " + rect_str(b));
      // Edge contact of positive length must be a full shared edge.
      auto touch = [&](Side sa, Side sb, bool vertical) {
        const double overlap = vertical ? oy : ox;
        if (overlap <= 0) return;
        const bool full = vertical ? (a.y0 == b.y0 && a.y1 == b.y1) : (a.x0 == b.x0 && a.x1 == b.x1);
        if (!full)
          throw GeometryError("rectangles " + rect_str(a) + " and " + rect_str(b) +
                              " share a partial edge");
        boundary[i][static_cast<int>(sa)] = false;
        boundary[j][static_cast<int>(sb)] = false;
        components.unite(static_cast<int>(i), static_cast<int>(j));
      };
      if (a.x1 == b.x0) touch(Side::right, Side::left, true);
      if (b.x1 == a.x0) touch(Side::left, Side::right, true);
      if (a.y1 == b.y0) touch(Side::top, Side::bottom, false);
      if (b.y1 == a.y0) touch(Side::bottom, Side::top, false);
    }
  }
  for (std::size_t i = 1; i < n; ++i)
    if (components.find(static_cast<int>(i)) != components.find(0))
      throw GeometryError("domain is disconnected");

  Mesh mesh;
  mesh.n_roots_ = n;
  mesh.root_boundary_ = std::move(boundary);
  mesh.cells_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Cell c;
    c.box = roots[i];
    c.root = static_cast<int>(i);
    mesh.cells_.push_back(c);
  }
  mesh.finalize();
  for (int k = 0; k < initial_refinements; ++k) mesh = mesh.refine_all();
  return mesh;
}

Mesh Mesh::from_cells(std::vector<Cell> cells, std::vector<std::array<bool, 4>> root_boundary) {
  Mesh mesh;
  const auto n = static_cast<int>(cells.size());
  std::size_t roots = 0;
  while (roots < cells.size() && cells[roots].parent < 0) ++roots;
  if (roots == 0 || roots != root_boundary.size())
    throw GeometryError("cell table: root count mismatch");
  for (int i = 0; i < n; ++i) {
    const Cell& c = cells[static_cast<std::size_t>(i)];
    if (static_cast<std::size_t>(i) >= roots && (c.parent < 0 || c.parent >= i))
      throw GeometryError("cell table: bad parent link at cell " + std::to_string(i));
    if (c.first_child >= 0 && (c.first_child <= i || c.first_child + 3 >= n))
      throw GeometryError("cell table: bad child link at cell " + std::to_string(i));
    if (c.root < 0 || static_cast<std::size_t>(c.root) >= roots)
      throw GeometryError("cell table: bad root at cell " + std::to_string(i));
  }
  mesh.cells_ = std::move(cells);
  mesh.n_roots_ = roots;
  mesh.root_boundary_ = std::move(root_boundary);
  mesh.finalize();
  return mesh;
}

void Mesh::split(int id) {
  const Cell parent = cells_[static_cast<std::size_t>(id)];
  const Rect& b = parent.box;
  const double xm = (b.x0 + b.x1) * 0.5;
  const double ym = (b.y0 + b.y1) * 0.5;
  const std::array<Rect, 4> kids{Rect{b.x0, b.y0, xm, ym}, Rect{xm, b.y0, b.x1, ym},
                                 Rect{b.x0, ym, xm, b.y1}, Rect{xm, ym, b.x1, b.y1}};
  const int first = static_cast<int>(cells_.size());
  for (const auto& r : kids) {
    Cell c;
    c.box = r;
    c.level = parent.level + 1;
    c.parent = id;
    c.root = parent.root;
    cells_.push_back(c);
  }
  cells_[static_cast<std::size_t>(id)].first_child = first;
}

void Mesh::split_with_closure(int id) {
  if (!cells_[static_cast<std::size_t>(id)].active()) return;
  const int level = cells_[static_cast<std::size_t>(id)].level;
  for (int s = 0; s < 4; ++s) {
    const auto nb = neighbor(id, static_cast<Side>(s));
    if (nb && cells_[static_cast<std::size_t>(*nb)].level < level) split_with_closure(*nb);
  }
  split(id);
}

Mesh Mesh::refine(std::span<const int> marked) const {
  std::vector<int> order(marked.begin(), marked.end());
  std::sort(order.begin(), order.end());
  order.erase(std::unique(order.begin(), order.end()), order.end());
  for (int id : order)
    if (id < 0 || static_cast<std::size_t>(id) >= cells_.size() || !cells_[static_cast<std::size_t>(id)].active())
      throw std::invalid_argument("refine: cell " + std::to_string(id) + " is not active");
  if (order.empty()) return *this;
  Mesh out = *this;
  for (int id : order) out.split_with_closure(id);
  out.finalize();
  return out;
}

Mesh Mesh::refine_all() const {
  Mesh out = *this;
  for (int id : active_) out.split(id);
  out.finalize();
  return out;
}

void Mesh::finalize() {
  active_.clear();
  active_index_.assign(cells_.size(), -1);
  std::vector<Point> corners;
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    if (!cells_[i].active()) continue;
    active_index_[i] = static_cast<int>(active_.size());
    active_.push_back(static_cast<int>(i));
    for (int k = 0; k < 4; ++k) corners.push_back(cells_[i].box.corner(k));
  }
  std::vector<Point> sorted = corners;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  vertices_ = std::move(sorted);
  vertex_valence_.assign(vertices_.size(), 0);
  for (const auto& p : corners) ++vertex_valence_[static_cast<std::size_t>(*vertex_id(p))];
}

std::optional<int> Mesh::vertex_id(const Point& p) const {
  auto it = std::lower_bound(vertices_.begin(), vertices_.end(), p);
  if (it == vertices_.end() || *it != p) return std::nullopt;
  return static_cast<int>(it - vertices_.begin());
}

std::optional<int> Mesh::locate_in_tree(const Point& p) const {
  for (std::size_t r = 0; r < n_roots_; ++r) {
    if (!cells_[r].box.contains(p)) continue;
    int id = static_cast<int>(r);
    while (!cells_[static_cast<std::size_t>(id)].active()) {
      const Cell& c = cells_[static_cast<std::size_t>(id)];
      const Point m = c.box.center();
      id = c.first_child + (p.x >= m.x ? 1 : 0) + (p.y >= m.y ? 2 : 0);
    }
    return id;
  }
  return std::nullopt;
}

std::optional<int> Mesh::locate(const Point& p) const { return locate_in_tree(p); }

bool Mesh::on_boundary(int id, Side side) const {
  const Cell& c = cells_.at(static_cast<std::size_t>(id));
  if (!root_boundary_[static_cast<std::size_t>(c.root)][static_cast<int>(side)]) return false;
  const Rect& rb = cells_[static_cast<std::size_t>(c.root)].box;
  switch (side) {
    case Side::bottom: return c.box.y0 == rb.y0;
    case Side::right: return c.box.x1 == rb.x1;
    case Side::top: return c.box.y1 == rb.y1;
    case Side::left: return c.box.x0 == rb.x0;
  }
  return false;
}

std::optional<int> Mesh::neighbor(int id, Side side) const {
  if (on_boundary(id, side)) return std::nullopt;
  const Rect& b = cells_.at(static_cast<std::size_t>(id)).box;
  const auto [a, e] = edge_endpoints(b, side);
  Point probe = midpoint(a, e);
  const double dx = (b.x1 - b.x0) * 0.25;
  const double dy = (b.y1 - b.y0) * 0.25;
  switch (side) {
    case Side::bottom: probe.y -= dy; break;
    case Side::right: probe.x += dx; break;
    case Side::top: probe.y += dy; break;
    case Side::left: probe.x -= dx; break;
  }
  return locate_in_tree(probe);
}

std::vector<HangingNode> Mesh::hanging_nodes() const {
  std::vector<HangingNode> out;
  for (int id : active_) {
    const Rect& b = cells_[static_cast<std::size_t>(id)].box;
    for (int s = 0; s < 4; ++s) {
      const auto [a, e] = edge_endpoints(b, static_cast<Side>(s));
      const auto m = vertex_id(midpoint(a, e));
      if (!m) continue;
      int ia = *vertex_id(a), ie = *vertex_id(e);
      if (ia > ie) std::swap(ia, ie);
      out.push_back(HangingNode{*m, {ia, ie}, id});
    }
  }
  std::sort(out.begin(), out.end(), [](const HangingNode& x, const HangingNode& y) { return x.node < y.node; });
  return out;
}

double Mesh::area() const {
  double sum = 0.0;
  for (int id : active_) sum += cells_[static_cast<std::size_t>(id)].box.area();
  return sum;
}

int Mesh::max_level() const {
  int lvl = 0;
  for (int id : active_) lvl = std::max(lvl, cells_[static_cast<std::size_t>(id)].level);
  return lvl;
}

}  // namespace dwr
