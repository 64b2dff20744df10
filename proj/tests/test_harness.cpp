#include <doctest.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "lipfem/error.hpp"
#include "lipfem/harness.hpp"
#include "lipfem/norms.hpp"

using namespace lipfem;

namespace {

ExperimentConfig small_config(const std::string& coefficient = "identity") {
    ConfigStore s;
    s.set("coefficients.name", coefficient);
    s.set("experiment.h_levels", "4,8,16");
    return build_config(s);
}

}  // namespace

TEST_CASE("result table keys and CSV round trip") {
    ResultTable t;
    t.append("convergence", 0.125, 81, "linf_error", 1.0 / 3.0, "n=8;coefficient=identity");
    t.append("convergence", 0.0625, 289, "linf_error", 0.1, "n=16");
    t.append("convergence", 0.0, 0, "slope_linf", -kInf, "");
    CHECK_THROWS_AS(t.append("convergence", 0.125, 81, "linf_error", 2.0), Error);
    CHECK(*t.find("convergence", 0.0625, "linf_error") == 0.1);
    CHECK(!t.find("convergence", 0.5, "linf_error"));
    const auto s = t.series("convergence", "linf_error");
    REQUIRE(s.size() == 2);
    CHECK(s[0].first == 0.125);

    std::stringstream a;
    t.write_csv(a);
    CHECK(a.str().rfind("experiment,h,dofs,quantity,value,meta\n", 0) == 0);
    const auto back = ResultTable::read_csv(a);
    REQUIRE(back.size() == t.size());
    CHECK(back.rows()[0].value == 1.0 / 3.0);
    CHECK(back.rows()[0].meta == "n=8;coefficient=identity");
    CHECK(std::isinf(back.rows()[2].value));
    std::stringstream b;
    back.write_csv(b);
    CHECK(a.str() == b.str());

    ResultTable other;
    other.append("convergence", 0.0, 0, "slope_linf", 2.0);
    CHECK_THROWS_AS(t.merge(other), Error);
}

TEST_CASE("experiment names") {
    for (auto e : {Experiment::MeshInfo, Experiment::Convergence, Experiment::StabilityScan,
                   Experiment::SpacetimeStability, Experiment::MaxregScan, Experiment::SemigroupScan,
                   Experiment::GreenDiagnostics}) {
        CHECK(experiment_from_string(to_string(e)) == e);
        CHECK(experiment_from_string(table_name(e)) == e);
    }
    CHECK(std::string(to_string(Experiment::GreenDiagnostics)) == "green-diag");
    CHECK_THROWS_AS(experiment_from_string("everything"), Error);
}

TEST_CASE("parallel_for runs every index and reports the first failure") {
    for (int jobs : {1, 3}) {
        std::vector<int> hit(50, 0);
        parallel_for(jobs, hit.size(), [&](std::size_t i) { hit[i] += 1; });
        for (int h : hit) CHECK(h == 1);

        std::atomic<int> ran{0};
        try {
            parallel_for(jobs, 20, [&](std::size_t i) {
                ++ran;
                if (i == 7 || i == 13) throw std::runtime_error("index " + std::to_string(i));
            });
            FAIL("expected an exception");
        } catch (const std::runtime_error& e) {
            CHECK(std::string(e.what()) == "index 7");
        }
        CHECK(ran == 20);
    }
}

TEST_CASE("slopes and ratios") {
    const std::vector<double> h{0.5, 0.25, 0.125, 0.0625};
    std::vector<double> v;
    for (double x : h) v.push_back(3.0 * x * x);
    CHECK(loglog_slope(h, v) == doctest::Approx(2.0));
    CHECK(max_min_ratio({2.0, 1.0, 4.0}) == 4.0);
    CHECK(std::isinf(max_min_ratio({2.0, 0.0})));
}

TEST_CASE("manufactured data satisfies the weak form") {
    // residual (s' U, v) + (a grad U, grad v) + (c U, v) - (f0, v) - (g0, grad v) over a fine space
    for (auto domain : {DomainTag::UnitSquare, DomainTag::DiskPolygon}) {
        for (const auto& name : coefficient_names()) {
            const auto coeff = coefficient_library(name);
            for (auto kind : {Manufactured::Cosine, Manufactured::Constant, Manufactured::Affine}) {
                const auto m = manufactured_solution(kind, domain, coeff);
                const double e = 1e-6;
                const double ds = (m.s(e) - m.s(-e)) / (2 * e) / m.s(0.0);
                const auto space = build_space(level_mesh(domain, 16), 2);
                const LoadAssembler asm6(space, 6);
                const Vec r = asm6.load([&](Point2 p) { return ds * m.U(p) + coeff.c(p) * m.U(p) - m.f0(p); }) +
                              asm6.div_load([&](Point2 p) { return Vec2(coeff.a(p) * m.grad_U(p) - m.g0(p)); });
                // only the boundary term of the square cosine depends on the exact normal derivative
                const double tol = (kind == Manufactured::Cosine && domain == DomainTag::UnitSquare) ? 1e-4 : 1e-8;
                CHECK(r.cwiseAbs().maxCoeff() < tol);
            }
        }
    }
}

TEST_CASE("discrete solutions are reproduced exactly") {
    for (const auto& name : {"identity", "lipschitz_kink"}) {
        auto cfg = small_config(name);
        for (auto kind : {Manufactured::Affine, Manufactured::Zero}) {
            cfg.manufactured = kind;
            const auto t = convergence_study(cfg);
            for (const auto& [h, v] : t.series("convergence", "linf_error")) CHECK(v <= 1e-9);
            for (const auto& c : check_results(Experiment::Convergence, t, cfg)) CHECK_MESSAGE(c.pass, c.name);
        }
        // constant in space but e^{-t} in time, so the time integration error remains
        cfg.manufactured = Manufactured::Constant;
        for (const auto& c : check_results(Experiment::Convergence, convergence_study(cfg), cfg))
            CHECK_MESSAGE(c.pass, c.name);
    }
    auto cfg = small_config();
    cfg.h_levels = {4, 8};
    CHECK_THROWS_AS(convergence_study(cfg), Error);
}

TEST_CASE("mesh info and run output") {
    auto cfg = small_config();
    const auto t = mesh_info(cfg);
    CHECK(*t.find("mesh_info", std::sqrt(2.0) / 8, "vertices") == 81);
    CHECK(*t.find("mesh_info", std::sqrt(2.0) / 16, "triangles") == 512);
    for (const auto& c : check_results(Experiment::MeshInfo, t, cfg)) CHECK(c.pass);

    const auto dir = std::filesystem::temp_directory_path() / "lipfem_test_run";
    std::filesystem::remove_all(dir);
    ConfigStore store;
    store.set("experiment.seed", "9");
    write_run(dir, Experiment::MeshInfo, store, t, "2026-01-01T00:00:00Z", "2026-01-01T00:00:01Z");
    std::ifstream mf(dir / "manifest.json");
    const auto j = nlohmann::json::parse(mf);
    CHECK(j["experiment"] == "mesh-info");
    CHECK(j["seed"] == 9);
    CHECK(j["rows"] == t.size());
    CHECK(j["config"]["experiment.seed"] == "9");
    std::ifstream cf(dir / "results.csv");
    CHECK(ResultTable::read_csv(cf).size() == t.size());
    std::filesystem::remove_all(dir);
}

TEST_CASE("maximal regularity probes on coarse meshes") {
    auto cfg = small_config("lipschitz_kink");
    cfg.h_levels = {4, 8};
    cfg.probes = 4;
    cfg.p_list = {2.0};
    cfg.q_list = {2.0};
    const auto a = maxreg_scan(cfg);
    const auto b = maxreg_scan(cfg);
    // the dissipative identity bounds the p = q = 2 ratio by one
    CHECK(*a.find("maxreg_scan", 0.0, "A_ratio_p2_q2_max") <= 1.0 + 1e-9);
    std::stringstream sa, sb;
    a.write_csv(sa);
    b.write_csv(sb);
    CHECK(sa.str() == sb.str());
}
