#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "dwr/mesh.hpp"

using namespace dwr;

namespace {

Mesh unit_square(int refinements) { return Mesh::build(DomainSpec::rectangle(0, 0, 1, 1), refinements); }

// Every active edge: neighbor level differs by at most one.
bool one_irregular(const Mesh& m) {
  for (int id : m.active_cells())
    for (int s = 0; s < 4; ++s) {
      const auto nb = m.neighbor(id, static_cast<Side>(s));
      if (nb && std::abs(m.cell(*nb).level - m.cell(id).level) > 1) return false;
    }
  return true;
}

}  // namespace

TEST_CASE("build counts cells and vertices") {
  CHECK(unit_square(0).n_active() == 1);
  CHECK(unit_square(0).vertices().size() == 4);
  CHECK(unit_square(1).n_active() == 4);
  CHECK(unit_square(1).vertices().size() == 9);
  const Mesh m = Mesh::build(DomainSpec::rectangle(-1, -1, 1, 1), 2);
  CHECK(m.n_active() == 16);
  CHECK(m.vertices().size() == 25);
  CHECK(m.hanging_nodes().empty());
}

TEST_CASE("refining one of four cells") {
  const Mesh m = unit_square(1);
  const int target = m.active_cells()[0];
  const int ids[] = {target};
  const Mesh r = m.refine(ids);
  CHECK(r.n_active() == 7);
  const auto h = r.hanging_nodes();
  REQUIRE(h.size() == 2);
  for (const auto& hn : h) {
    const Point mid = midpoint(r.vertices()[hn.endpoints[0]], r.vertices()[hn.endpoints[1]]);
    CHECK(mid == r.vertices()[hn.node]);
    CHECK(r.vertices()[hn.endpoints[0]] < r.vertices()[hn.endpoints[1]]);
  }
  // Old ids survive refinement.
  for (std::size_t i = 0; i < m.cell_count(); ++i) CHECK(r.cell(static_cast<int>(i)).box == m.cell(static_cast<int>(i)).box);
}

TEST_CASE("empty mark set leaves the mesh unchanged") {
  const Mesh m = unit_square(2);
  const Mesh r = m.refine({});
  CHECK(r == m);
  CHECK(r.n_active() == m.n_active());
}

TEST_CASE("closure splits a coarse neighbor") {
  const Mesh m = unit_square(1);
  // SW cell, then its NE child touches the unrefined SE and NW cells.
  const int sw = m.locate({0.25, 0.25}).value();
  const int a[] = {sw};
  const Mesh r1 = m.refine(a);
  const int ne_child = r1.locate({0.4, 0.4}).value();
  CHECK(r1.cell(ne_child).level == 2);
  const int b[] = {ne_child};
  const Mesh r2 = r1.refine(b);
  CHECK(one_irregular(r2));
  // SE and NW coarse cells were split too: 7 + 3 (marked) + 3 + 3.
  CHECK(r2.n_active() == 16);
  CHECK(r2.cell(r2.locate({0.75, 0.25}).value()).level == 2);
  CHECK(r2.cell(r2.locate({0.25, 0.75}).value()).level == 2);
}

TEST_CASE("two squares with one refined have one hanging node on the shared edge") {
  DomainSpec spec{{Rect{0, 0, 1, 1}, Rect{1, 0, 2, 1}}};
  const Mesh m = Mesh::build(spec, 0);
  const int right = m.locate({1.5, 0.5}).value();
  const int ids[] = {right};
  const Mesh r = m.refine(ids);
  const auto h = r.hanging_nodes();
  REQUIRE(h.size() == 1);
  CHECK(r.vertices()[h[0].node] == Point{1.0, 0.5});
  CHECK(r.vertices()[h[0].endpoints[0]] == Point{1.0, 0.0});
  CHECK(r.vertices()[h[0].endpoints[1]] == Point{1.0, 1.0});
  CHECK(h[0].coarse_cell == m.locate({0.5, 0.5}).value());
}

TEST_CASE("random refinement keeps invariants") {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    Mesh m = Mesh::build(DomainSpec::rectangle(-1, -1, 1, 1), 1);
    for (int step = 0; step < 8; ++step) {
      const auto active = m.active_cells();
      std::vector<int> marked;
      std::uniform_int_distribution<std::size_t> pick(0, active.size() - 1);
      for (int k = 0; k < 3; ++k) marked.push_back(active[pick(rng)]);
      const Mesh r = m.refine(marked);
      const std::size_t splits = r.cell_count() - m.cell_count();
      CHECK(splits % 4 == 0);
      CHECK(r.n_active() == m.n_active() + 3 * (splits / 4));
      CHECK(one_irregular(r));
      CHECK(std::abs(r.area() - 4.0) <= 1e-12 * 4.0);
      for (const auto& h : r.hanging_nodes())
        CHECK(midpoint(r.vertices()[h.endpoints[0]], r.vertices()[h.endpoints[1]]) == r.vertices()[h.node]);
      m = r;
    }
  }
}

TEST_CASE("identical inputs give identical meshes") {
  auto run = [] {
    Mesh m = unit_square(1);
    for (int i = 0; i < 4; ++i) {
      const int ids[] = {m.active_cells()[0], m.active_cells()[m.n_active() / 2]};
      m = m.refine(ids);
    }
    return m;
  };
  const Mesh a = run(), b = run();
  CHECK(a == b);
  REQUIRE(a.vertices().size() == b.vertices().size());
  for (std::size_t i = 0; i < a.vertices().size(); ++i) CHECK(a.vertices()[i] == b.vertices()[i]);
}

TEST_CASE("invalid domains raise geometry errors") {
  CHECK_THROWS_AS(Mesh::build(DomainSpec{{Rect{0, 0, 1, 1}, Rect{0.5, 0, 1.5, 1}}}, 0), GeometryError);
  CHECK_THROWS_AS(Mesh::build(DomainSpec{{Rect{0, 0, 1, 1}, Rect{2, 0, 3, 1}}}, 0), GeometryError);
  // Partial edge contact would produce a hanging node on the coarse mesh.
  CHECK_THROWS_AS(Mesh::build(DomainSpec{{Rect{0, 0, 1, 1}, Rect{1, 0, 2, 2}}}, 0), GeometryError);
}

TEST_CASE("mesh file parsing") {
  const auto spec = DomainSpec::parse("# two squares\nv 0 0\nv 1 0\nv 2 0\nv 0 1\nv 1 1\nv 2 1\nq 0 1 4 3\nq 1 2 5 4\n");
  CHECK(spec.cells.size() == 2);
  CHECK(Mesh::build(spec, 1).n_active() == 8);
  try {
    DomainSpec::parse("v 0 0\nv 1 0\nq 0 1 7 3\n");
    FAIL("expected a geometry error");
  } catch (const GeometryError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("bundled multi-rectangle domain") {
  const Mesh m = Mesh::build(DomainSpec::from_file(std::string(DWR_DATA_DIR) + "/example2_domain.mesh"), 1);
  CHECK(m.n_active() == 32);
  CHECK(m.area() == doctest::Approx(8.0));
  for (Point p : {Point{0.6, 0.6}, Point{2.9, 2.1}, Point{2.1, 2.9}, Point{2.5, 2.5}}) CHECK(m.locate(p).has_value());
  CHECK_FALSE(m.locate({1.5, 1.5}).has_value());
  // The hole's edges are boundary edges.
  const int c = m.locate({0.9, 1.5}).value();
  CHECK(m.on_boundary(c, Side::right));
}

TEST_CASE("cell table round trip") {
  Mesh m = unit_square(1);
  const int ids[] = {m.active_cells()[1]};
  m = m.refine(ids);
  const auto cells = m.cells();
  const auto rb = m.root_boundary();
  const Mesh r = Mesh::from_cells({cells.begin(), cells.end()}, {rb.begin(), rb.end()});
  CHECK(r == m);
  CHECK(r.hanging_nodes().size() == m.hanging_nodes().size());
}
