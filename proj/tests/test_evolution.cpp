#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "lipfem/assembly.hpp"
#include "lipfem/error.hpp"
#include "lipfem/evolution.hpp"

using namespace lipfem;

namespace {

struct Problem {
    SpacePtr space;
    SparseMatrix m, k;
};

Problem problem(int n, const std::string& coeff, int degree = 1) {
    Problem p;
    p.space = build_space(build_structured_square(n), degree);
    p.m = assemble_mass(*p.space);
    p.k = assemble_stiffness(*p.space, coefficient_library(coeff));
    return p;
}

EvolutionBackend spectral() {
    EvolutionBackend b;
    b.kind = BackendKind::Spectral;
    return b;
}

EvolutionBackend theta(double th, double dt) {
    EvolutionBackend b;
    b.theta = th;
    b.dt = dt;
    return b;
}

double m_norm(const SparseMatrix& m, const Vec& v) { return std::sqrt(v.dot(m * v)); }

}  // namespace

TEST_CASE("backend validation") {
    CHECK_THROWS_AS(validate_backend(theta(0.3, 0.1)), Error);
    CHECK_THROWS_AS(validate_backend(theta(1.1, 0.1)), Error);
    CHECK_THROWS_AS(validate_backend(theta(0.5, 0.0)), Error);
    CHECK_NOTHROW(validate_backend(theta(1.0, 0.1)));
    CHECK_NOTHROW(validate_backend(spectral()));
    CHECK(backend_kind_from_string("theta_scheme") == BackendKind::ThetaScheme);
    CHECK_THROWS_AS(backend_kind_from_string("rk4"), Error);
}

TEST_CASE("generalized eigenpairs") {
    const auto p = problem(8, "lipschitz_kink");
    const auto e = spectral_decompose(p.m, p.k, 5000);
    CHECK(eigen_residual(p.m, p.k, e) < 1e-8);
    const DenseMatrix gram = e.psi.transpose() * (p.m * e.psi);
    CHECK((gram - DenseMatrix::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() < 1e-9);
    for (Eigen::Index i = 1; i < e.lambda.size(); ++i) CHECK(e.lambda[i] >= e.lambda[i - 1]);
    CHECK(e.lambda[0] >= 1.0 - 1e-10);
    CHECK_THROWS_AS(spectral_decompose(p.m, p.k, 10), Error);
}

TEST_CASE("Neumann eigenvalues of the Laplacian") {
    const auto s = build_space(build_structured_square(16), 1);
    CoefficientField lap = coefficient_library("identity");
    lap.c = [](Point2) { return 0.0; };
    lap.c0 = 0.0;
    const auto e = spectral_decompose(assemble_mass(*s), assemble_stiffness(*s, lap), 5000);
    CHECK(std::abs(e.lambda[0]) < 1e-10);
    // pi^2 is double (cos(pi x1) and cos(pi x2)), then 2 pi^2
    CHECK(e.lambda[1] == doctest::Approx(std::numbers::pi * std::numbers::pi).epsilon(0.02));
    CHECK(e.lambda[2] == doctest::Approx(std::numbers::pi * std::numbers::pi).epsilon(0.02));
    CHECK(e.lambda[3] == doctest::Approx(2 * std::numbers::pi * std::numbers::pi).epsilon(0.03));
}

TEST_CASE("constants decay like exp(-t) for unit reaction") {
    const auto p = problem(6, "identity", 2);
    const Vec one = Vec::Ones(p.space->num_dofs());
    const std::vector<double> times{0.0, 0.1, 0.5, 1.0, 2.0};
    for (const auto& backend : {spectral(), theta(0.5, 1e-3), theta(1.0, 1e-4)}) {
        const Evolver ev(p.m, p.k, backend);
        ev.propagate(one, times, [&](std::size_t, double t, const Vec& u) {
            const double tol = backend.kind == BackendKind::Spectral ? 1e-11 : 2e-4;
            CHECK((u.array() - std::exp(-t)).abs().maxCoeff() < tol);
        });
    }
}

TEST_CASE("spectral flow is exact on eigenvectors and a semigroup") {
    const auto p = problem(6, "smooth_aniso");
    const Evolver ev(p.m, p.k, spectral());
    const auto& e = ev.eigen();
    for (int k : {0, 3, 17}) {
        const Vec psi = e.psi.col(k);
        const Vec u = ev.apply(psi, 0.3);
        CHECK((u - std::exp(-0.3 * e.lambda[k]) * psi).cwiseAbs().maxCoeff() < 1e-11);
    }
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    Vec v(p.space->num_dofs());
    for (auto& x : v) x = g(rng);
    const Vec a = ev.apply(ev.apply(v, 0.05), 0.2);
    const Vec b = ev.apply(v, 0.25);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-11);
    // contraction in the mass norm, strict because c >= 1
    CHECK(m_norm(p.m, b) <= std::exp(-0.25) * m_norm(p.m, v) * (1 + 1e-12));
    CHECK((semigroup_apply(ev, v, 0.25) - b).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("theta scheme time order") {
    const auto p = problem(4, "lipschitz_kink");
    const Evolver exact(p.m, p.k, spectral());
    // smooth data: Crank-Nicolson does not damp the stiff modes of rough data
    const Vec v = interpolate_nodal(p.space, [](Point2 x) {
                      return std::cos(std::numbers::pi * x.x1) * std::cos(std::numbers::pi * x.x2) + x.x1;
                  }).coeffs;
    const double T = 0.5;
    const Vec ref = exact.apply(v, T);
    auto error = [&](double th, double dt) {
        const Evolver ev(p.m, p.k, theta(th, dt));
        return m_norm(p.m, ev.apply(v, T) - ref);
    };
    const double cn = std::log2(error(0.5, 1.0 / 40) / error(0.5, 1.0 / 80));
    const double be = std::log2(error(1.0, 1.0 / 40) / error(1.0, 1.0 / 80));
    CHECK(cn == doctest::Approx(2.0).epsilon(0.1));
    CHECK(be == doctest::Approx(1.0).epsilon(0.1));

    // theta scheme is contractive in the mass norm for theta >= 1/2
    const Evolver ev(p.m, p.k, theta(0.5, 0.1));
    double prev = m_norm(p.m, v);
    ev.propagate(v, {0.1, 0.2, 0.3, 0.4}, [&](std::size_t, double, const Vec& u) {
        const double now = m_norm(p.m, u);
        CHECK(now <= prev * (1 + 1e-12));
        prev = now;
    });
    CHECK(ev.steps_taken() == 4);
}

TEST_CASE("inhomogeneous problem with constant load") {
    // u' + u = 1, u(0) = 0 has u = 1 - exp(-t) in every dof for the identity field
    const auto p = problem(5, "identity");
    const LoadFunction load = make_load(
        p.space, [](Point2, double) { return 1.0; }, nullptr, 2);
    const Vec b = load(0.0);
    CHECK((b - assemble_load(*p.space, [](Point2) { return 1.0; }, 2)).cwiseAbs().maxCoeff() < 1e-15);
    const std::vector<double> times{0.0, 0.2, 1.0, 5.0};
    const Vec zero = Vec::Zero(p.space->num_dofs());
    for (const auto& backend : {spectral(), theta(0.5, 1e-3)}) {
        const Evolver ev(p.m, p.k, backend);
        const auto traj = solve_inhomogeneous(p.space, ev, zero, load, times);
        REQUIRE(traj.snapshots.size() == times.size());
        for (std::size_t i = 0; i < times.size(); ++i) {
            const double tol = backend.kind == BackendKind::Spectral ? 1e-11 : 1e-6;
            CHECK((traj.snapshots[i].array() - (1.0 - std::exp(-times[i]))).abs().maxCoeff() < tol);
        }
    }
}

TEST_CASE("discrete operator on constants") {
    const auto p = problem(4, "identity", 2);
    const SpdSolver mass(p.m);
    const Vec w = apply_Ah(mass, p.k, Vec::Ones(p.space->num_dofs()));
    CHECK((w.array() - 1.0).abs().maxCoeff() < 1e-11);
}

TEST_CASE("trajectory files round trip") {
    const auto p = problem(3, "identity");
    const Evolver ev(p.m, p.k, theta(1.0, 0.05));
    Vec v = Vec::LinSpaced(p.space->num_dofs(), 0.0, 1.0);
    const auto traj = record_trajectory(p.space, ev, v, {0.0, 0.05, 0.1, 0.15, 0.2});
    CHECK_NOTHROW(check_trajectory(traj));
    const auto dir = std::filesystem::temp_directory_path() / "lipfem_test_traj";
    std::filesystem::remove_all(dir);
    write_trajectory(dir, traj, ev.backend(), 2, "unit test");
    CHECK(std::filesystem::exists(dir / "manifest.json"));
    const auto back = read_trajectory(dir, p.space);
    // every second snapshot plus the last one
    REQUIRE(back.times.size() == 3);
    CHECK(back.times.back() == 0.2);
    CHECK((back.snapshots[1] - traj.snapshots[2]).cwiseAbs().maxCoeff() == 0.0);
    std::filesystem::remove_all(dir);

    Trajectory bad = traj;
    bad.times[2] = bad.times[1];
    CHECK_THROWS_AS(check_trajectory(bad), Error);
}
