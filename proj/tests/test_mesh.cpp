#include <doctest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "lipfem/error.hpp"
#include "lipfem/mesh.hpp"

using namespace lipfem;

namespace {

double signed_area(const Mesh& m, int t) {
    const auto c = m.corners(t);
    return 0.5 * ((c[1].x1 - c[0].x1) * (c[2].x2 - c[0].x2) - (c[2].x1 - c[0].x1) * (c[1].x2 - c[0].x2));
}

// boundary edges by counting edge multiplicities over all triangles
std::set<std::pair<int, int>> brute_boundary(const Mesh& m) {
    std::map<std::pair<int, int>, int> count;
    for (const auto& t : m.triangles())
        for (int k = 0; k < 3; ++k) {
            int a = t[k], b = t[(k + 1) % 3];
            if (a > b) std::swap(a, b);
            ++count[{a, b}];
        }
    std::set<std::pair<int, int>> out;
    for (const auto& [e, c] : count)
        if (c == 1) out.insert(e);
    return out;
}

void check_invariants(const Mesh& m, double expected_area) {
    double area = 0.0;
    for (int t = 0; t < m.num_triangles(); ++t) {
        CHECK(signed_area(m, t) > 0.0);
        area += signed_area(m, t);
    }
    CHECK(area == doctest::Approx(expected_area).epsilon(1e-12));
    std::set<std::pair<int, int>> bnd;
    for (const auto& e : m.boundary_edges()) bnd.insert({std::min(e[0], e[1]), std::max(e[0], e[1])});
    CHECK(bnd == brute_boundary(m));
    const auto q = m.quality();
    CHECK(q.h_max / q.h_min <= 4.0);
    CHECK(q.min_angle_deg >= 20.0);
}

}  // namespace

TEST_CASE("structured square counts and size") {
    for (int n : {1, 2, 4, 7}) {
        const auto m = build_structured_square(n);
        CHECK(m->num_vertices() == (n + 1) * (n + 1));
        CHECK(m->num_triangles() == 2 * n * n);
        CHECK(m->h() == doctest::Approx(std::sqrt(2.0) / n));
        check_invariants(*m, 1.0);
    }
    CHECK_THROWS_AS(build_structured_square(0), Error);
}

TEST_CASE("disk polygon") {
    const auto m1 = build_disk_polygon(1);
    for (const auto& e : m1->boundary_edges())
        for (int v : e) CHECK(std::hypot(m1->vertices()[v].x1, m1->vertices()[v].x2) == doctest::Approx(1.0).epsilon(1e-12));
    for (int rings : {1, 2, 5, 9}) {
        const auto m = build_disk_polygon(rings);
        // exact area of the boundary polygon by the shoelace formula over boundary edges
        double poly = 0.0;
        for (const auto& e : m->boundary_edges()) {
            const auto a = m->vertices()[e[0]], b = m->vertices()[e[1]];
            poly += 0.5 * (a.x1 * b.x2 - b.x1 * a.x2);
        }
        check_invariants(*m, std::abs(poly));
        CHECK(std::abs(poly) < std::numbers::pi);
    }
    // the area deficit shrinks like h^2
    const double d1 = std::numbers::pi - build_disk_polygon(4)->quality().area;
    const double d2 = std::numbers::pi - build_disk_polygon(8)->quality().area;
    CHECK(d1 / d2 == doctest::Approx(4.0).epsilon(0.1));
    CHECK_THROWS_AS(build_disk_polygon(0), Error);
}

TEST_CASE("uniform refinement") {
    const auto c = build_structured_square(3);
    const auto f = refine_uniform(*c);
    CHECK(f->num_triangles() == 4 * c->num_triangles());
    CHECK(f->h() == doctest::Approx(c->h() / 2));
    check_invariants(*f, 1.0);
    const auto parent = coarse_parent_map(*f, *c);
    REQUIRE(parent.size() == static_cast<std::size_t>(f->num_triangles()));
    std::vector<double> child_area(c->num_triangles(), 0.0);
    for (int t = 0; t < f->num_triangles(); ++t) {
        const auto loc = c->locate(f->centroid(t));
        CHECK(loc.triangle == parent[t]);
        child_area[parent[t]] += f->area(t);
    }
    for (int t = 0; t < c->num_triangles(); ++t) CHECK(child_area[t] == doctest::Approx(c->area(t)));

    const auto d = refine_uniform(*build_disk_polygon(3));
    CHECK(d->quality().min_angle_deg >= 20.0);
}

TEST_CASE("point location round trip") {
    const auto m = build_structured_square(6);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        const Point2 p{u(rng), u(rng)};
        const auto loc = m->locate(p);
        REQUIRE(loc.triangle >= 0);
        const auto r = reconstruct(*m, loc);
        CHECK(r.x1 == doctest::Approx(p.x1).epsilon(1e-13));
        CHECK(r.x2 == doctest::Approx(p.x2).epsilon(1e-13));
        double s = 0.0;
        for (double b : loc.bary) {
            CHECK(b >= -1e-12);
            s += b;
        }
        CHECK(s == doctest::Approx(1.0));
    }
    CHECK_THROWS_AS(m->locate({1.5, 0.5}), Error);
}

TEST_CASE("text format and checksum") {
    const auto m = build_disk_polygon(3);
    std::stringstream s;
    write_mesh(s, *m);
    const auto r = read_mesh(s, DomainTag::DiskPolygon);
    CHECK(r->checksum() == m->checksum());
    CHECK(r->num_triangles() == m->num_triangles());
    CHECK(build_structured_square(4)->checksum() != build_structured_square(5)->checksum());
    std::stringstream bad("vertices 3 triangles 1\n0 0\n1 0\n");
    CHECK_THROWS_AS(read_mesh(bad), Error);
}

TEST_CASE("domain tags") {
    CHECK(domain_tag_from_string("unit_square") == DomainTag::UnitSquare);
    CHECK(domain_tag_from_string("disk_polygon") == DomainTag::DiskPolygon);
    CHECK(std::string(to_string(DomainTag::DiskPolygon)) == "disk_polygon");
    CHECK_THROWS_AS(domain_tag_from_string("torus"), Error);
}
