#include <doctest.h>

#include <cmath>
#include <sstream>

#include "lipfem/assembly.hpp"
#include "lipfem/error.hpp"

using namespace lipfem;

namespace {

CoefficientField laplace_only() {
    CoefficientField f;
    f.a = [](Point2) { return Mat2::Identity().eval(); };
    f.c = [](Point2) { return 0.0; };
    f.name = "laplace";
    return f;
}

double cot_at(Point2 apex, Point2 p, Point2 q) {
    const double ux = p.x1 - apex.x1, uy = p.x2 - apex.x2, vx = q.x1 - apex.x1, vy = q.x2 - apex.x2;
    return (ux * vx + uy * vy) / std::abs(ux * vy - uy * vx);
}

}  // namespace

TEST_CASE("P1 mass matrix matches the element formula") {
    const auto mesh = build_disk_polygon(3);
    const auto s = build_space(mesh, 1);
    DenseMatrix ref = DenseMatrix::Zero(s->num_dofs(), s->num_dofs());
    for (int t = 0; t < mesh->num_triangles(); ++t) {
        const auto& tri = mesh->triangles()[t];
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) ref(tri[i], tri[j]) += mesh->area(t) / 12.0 * (i == j ? 2.0 : 1.0);
    }
    const DenseMatrix m = to_dense(assemble_mass(*s));
    CHECK((m - ref).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("P1 Laplacian matches the cotangent formula") {
    const auto mesh = build_disk_polygon(2);
    const auto s = build_space(mesh, 1);
    DenseMatrix ref = DenseMatrix::Zero(s->num_dofs(), s->num_dofs());
    for (int t = 0; t < mesh->num_triangles(); ++t) {
        const auto& tri = mesh->triangles()[t];
        const auto c = mesh->corners(t);
        for (int k = 0; k < 3; ++k) {
            const int i = (k + 1) % 3, j = (k + 2) % 3;
            const double w = 0.5 * cot_at(c[k], c[i], c[j]);
            ref(tri[i], tri[j]) -= w;
            ref(tri[j], tri[i]) -= w;
            ref(tri[i], tri[i]) += w;
            ref(tri[j], tri[j]) += w;
        }
    }
    const DenseMatrix k = to_dense(assemble_stiffness(*s, laplace_only()));
    CHECK((k - ref).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("stiffness properties for every library field") {
    for (int degree : {1, 2}) {
        const auto s = build_space(build_structured_square(5), degree);
        const auto loads = LoadAssembler(s, 4);
        for (const auto& name : coefficient_names()) {
            const auto coeff = coefficient_library(name);
            const int order = 4;
            check_coefficient(*s, coeff, order);
            const SparseMatrix k = assemble_stiffness(*s, coeff, order);
            CHECK(symmetry_defect(k) < 1e-14);
            // K 1 = (c, phi_i) since the gradient of a constant vanishes
            const Vec ones = Vec::Ones(s->num_dofs());
            const Vec rhs = assemble_load(*s, coeff.c, order);
            CHECK((k * ones - rhs).cwiseAbs().maxCoeff() < 1e-14);
            CHECK((loads.load(coeff.c) - rhs).cwiseAbs().maxCoeff() < 1e-15);
            // v^T K v >= c0 v^T M v
            const SparseMatrix m = assemble_mass(*s);
            for (int trial = 0; trial < 3; ++trial) {
                const Vec v = Vec::Random(s->num_dofs());
                CHECK(v.dot(k * v) >= coeff.c0 * v.dot(m * v) * (1 - 1e-12));
            }
        }
    }
}

TEST_CASE("energy of an affine function") {
    // u = x1 + 2 x2 on the unit square with the identity field
    const auto s = build_space(build_structured_square(4), 1);
    const auto u = interpolate_nodal(s, [](Point2 p) { return p.x1 + 2.0 * p.x2; });
    const auto k = assemble_stiffness(*s, coefficient_library("identity"));
    // int (x1 + 2 x2)^2 = 1/3 + 4/3 + 4 * 1/4 = 8/3
    CHECK(u.coeffs.dot(k * u.coeffs) == doctest::Approx(5.0 + 8.0 / 3.0).epsilon(1e-13));
    const Vec b = assemble_div_load(*s, [](Point2) { return Vec2(1.0, -3.0); }, 2);
    CHECK(b.dot(u.coeffs) == doctest::Approx(1.0 - 6.0).epsilon(1e-13));
}

TEST_CASE("elementwise divergence operator agrees with the load assembler") {
    const auto s = build_space(build_disk_polygon(2), 2);
    const auto& mesh = s->mesh();
    const SparseMatrix d = assemble_div_operator(*s);
    Vec g(2 * mesh.num_triangles());
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        g[2 * t] = std::sin(t);
        g[2 * t + 1] = std::cos(3.0 * t);
    }
    Vec ref = Vec::Zero(s->num_dofs());
    const auto& rule = quadrature(2);
    std::array<Vec2, 6> dphi{};
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto geo = s->geometry(t);
        const auto dofs = s->cell_dofs(t);
        for (std::size_t q = 0; q < rule.points.size(); ++q) {
            s->basis_gradients(geo, rule.points[q], dphi);
            for (int i = 0; i < 6; ++i) ref[dofs[i]] += geo.area * rule.weights[q] * Vec2(g[2 * t], g[2 * t + 1]).dot(dphi[i]);
        }
    }
    CHECK((d * g - ref).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("ellipticity violations are reported") {
    const auto s = build_space(build_structured_square(3), 1);
    auto bad = coefficient_library("identity");
    bad.a = [](Point2 p) { return ((p.x1 > 0.7 ? 0.5 : 1.0) * Mat2::Identity()).eval(); };
    try {
        check_coefficient(*s, bad, 2);
        FAIL("expected an ellipticity error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Ellipticity);
    }
    auto asym = coefficient_library("identity");
    asym.a = [](Point2) { return (Mat2() << 1.0, 0.2, 0.0, 1.0).finished(); };
    CHECK_THROWS_AS(check_coefficient(*s, asym, 2), Error);
    auto low_c = coefficient_library("identity");
    low_c.c = [](Point2) { return 0.5; };
    CHECK_THROWS_AS(check_coefficient(*s, low_c, 2), Error);
    CHECK_THROWS_AS(coefficient_library("nope"), Error);
}

TEST_CASE("coordinate format round trip") {
    const auto s = build_space(build_structured_square(3), 2);
    const SparseMatrix k = assemble_stiffness(*s, coefficient_library("lipschitz_kink"));
    std::stringstream io;
    write_coo(io, k);
    const SparseMatrix r = read_coo(io);
    CHECK(max_abs(r - k) == 0.0);
}
