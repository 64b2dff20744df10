#include <doctest.h>

#include <cmath>

#include "lipfem/error.hpp"
#include "lipfem/norms.hpp"

using namespace lipfem;

TEST_CASE("logarithmic factor and exponent checks") {
    CHECK(log_factor(0.5) == doctest::Approx(std::log(4.0)));
    CHECK(log_factor(1.0 / 64) == doctest::Approx(std::log(66.0)));
    CHECK_THROWS_AS(check_exponent(0.5, "p"), Error);
    CHECK_THROWS_AS(check_exponent(std::nan(""), "p"), Error);
    CHECK_NOTHROW(check_exponent(1.0, "p"));
    CHECK_NOTHROW(check_exponent(kInf, "p"));
}

TEST_CASE("spatial norms of affine functions") {
    const auto s = build_space(build_structured_square(4), 2);
    const SpatialNorms norms(s);
    const Vec two = Vec::Constant(s->num_dofs(), 2.0);
    for (double q : {1.0, 2.0, 3.5, kInf}) CHECK(norms.lq(two, q) == doctest::Approx(2.0).epsilon(1e-13));
    const auto u = interpolate_nodal(s, [](Point2 p) { return p.x1 + 2.0 * p.x2; });
    for (double q : {1.0, 2.0, kInf}) CHECK(norms.grad_lq(u.coeffs, q) == doctest::Approx(std::sqrt(5.0)).epsilon(1e-12));
    CHECK(norms.grad_l1_broken(u.coeffs) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(norms.grad_l1_global(u.coeffs) == doctest::Approx(3.0).epsilon(1e-10));
    CHECK(norms.linf(u.coeffs) == doctest::Approx(3.0));
    // int_0^1 int_0^1 (x1 + 2 x2)^2 = 8/3
    CHECK(norms.lq(u.coeffs, 2.0) == doctest::Approx(std::sqrt(8.0 / 3.0)).epsilon(1e-12));

    std::vector<double> v;
    norms.values(u.coeffs, v);
    REQUIRE(v.size() == norms.points().size());
    for (double q : {1.0, 2.0}) CHECK(norms.sample_lq(v, q) == doctest::Approx(norms.lq(u.coeffs, q)));
    // the sampled max sees quadrature points only, lq(inf) also the dofs
    CHECK(norms.sample_lq(v, kInf) <= norms.lq(u.coeffs, kInf));
    double w = 0.0;
    for (double x : norms.weights()) w += x;
    CHECK(w == doctest::Approx(1.0));
}

TEST_CASE("P1 maximum is attained at a node") {
    const auto s = build_space(build_disk_polygon(3), 1);
    const SpatialNorms norms(s);
    Vec u = Vec::LinSpaced(s->num_dofs(), -3.0, 1.0);
    CHECK(norms.linf(u) == doctest::Approx(3.0));
    CHECK(norms.lq(u, kInf) == doctest::Approx(3.0));
}

TEST_CASE("temporal trapezoid") {
    const std::vector<double> t{0.0, 0.5, 1.0, 2.0};
    const std::vector<double> c{3.0, 3.0, -3.0, 3.0};
    CHECK(temporal_norm(t, c, 1.0) == doctest::Approx(6.0));
    CHECK(temporal_norm(t, c, 2.0) == doctest::Approx(std::sqrt(18.0)));
    CHECK(temporal_norm(t, c, kInf) == doctest::Approx(3.0));
    const std::vector<double> lin{0.0, 0.5, 1.0, 2.0};
    CHECK(temporal_norm(t, lin, 1.0) == doctest::Approx(2.0));
}

TEST_CASE("space-time norms of a separable trajectory") {
    const auto s = build_space(build_structured_square(3), 1);
    Trajectory traj;
    traj.space = s;
    traj.times = {0.0, 0.25, 0.5, 1.0, 2.0};
    for (double t : traj.times) traj.snapshots.push_back(Vec::Constant(s->num_dofs(), 1.0 + t));
    // ||1 + t||_{L^p(0,2)} with the trapezoid being exact for p = 1
    CHECK(lp_lq_norm(traj, 1.0, 2.0) == doctest::Approx(4.0));
    CHECK(lp_lq_norm(traj, kInf, 1.0) == doctest::Approx(3.0));
    CHECK(max_norm_QT(traj) == doctest::Approx(3.0));
    CHECK(w101_norm(traj) == doctest::Approx(4.0));
    CHECK(w101_norm(traj, GradientPath::Global) == doctest::Approx(4.0));
}
