#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lipfem/config.hpp"
#include "lipfem/error.hpp"

using namespace lipfem;

namespace {

std::string config_error(const std::string& text) {
    ConfigStore s;
    std::istringstream in(text);
    try {
        s.parse(in, "test.ini");
        (void)build_config(s);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Config);
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("defaults") {
    const ConfigStore s;
    for (const auto& k : ConfigStore::known_keys()) CHECK(s.values().count(k) == 1);
    const auto c = build_config(s);
    CHECK(c.domain == DomainTag::UnitSquare);
    CHECK(c.coefficient == "identity");
    CHECK(c.degree == 1);
    CHECK(c.theta == 0.5);
    CHECK(c.h_levels == std::vector<int>{8, 16, 32});
    CHECK(c.sources.size() == 3);
    CHECK(c.seed == 42);
    CHECK(c.rho_ref == 4);
    CHECK(c.manufactured == Manufactured::Cosine);
}

TEST_CASE("sectioned format") {
    ConfigStore s;
    std::istringstream in(R"(# comment line
[domain]
type = disk_polygon

[coefficients]
name = lipschitz_kink   ; trailing comment

[discretization]
degree = 2
theta = 1.0

[experiment]
h_levels = 4, 8
p_list = 2, inf
sources = 0.1 0.2
seed = 7
)");
    s.parse(in);
    const auto c = build_config(s);
    CHECK(c.domain == DomainTag::DiskPolygon);
    CHECK(c.coefficient == "lipschitz_kink");
    CHECK(c.degree == 2);
    CHECK(c.theta == 1.0);
    CHECK(c.h_levels == std::vector<int>{4, 8});
    REQUIRE(c.p_list.size() == 2);
    CHECK(std::isinf(c.p_list[1]));
    REQUIRE(c.sources.size() == 1);
    CHECK(c.sources[0] == Point2{0.1, 0.2});
    CHECK(c.seed == 7);
}

TEST_CASE("errors name the line and the key") {
    CHECK(config_error("[discretization]\ntheta = 0.3\n").find("theta") != std::string::npos);
    const auto unknown = config_error("[experiment]\n\nbogus = 1\n");
    CHECK(unknown.find("test.ini:3") != std::string::npos);
    CHECK(config_error("[nowhere]\nx = 1\n").find("test.ini:1") != std::string::npos);
    CHECK(config_error("[experiment]\nT\n").find("test.ini:2") != std::string::npos);
    CHECK(config_error("type = unit_square\n") != "");
    CHECK(config_error("[experiment]\nh_levels = 16, 8\n").find("h_levels") != std::string::npos);
    CHECK(config_error("[experiment]\nrho_ref = 3\n").find("rho_ref") != std::string::npos);
    CHECK(config_error("[experiment]\np_list = 0.5\n").find("p_list") != std::string::npos);
    CHECK(config_error("[discretization]\ndegree = 3\n").find("degree") != std::string::npos);
    CHECK(config_error("[coefficients]\nname = marble\n").find("name") != std::string::npos);
    CHECK(config_error("[experiment]\nmanufactured = wave\n").find("manufactured") != std::string::npos);
    CHECK(config_error("[experiment]\nsources = 0.1\n").find("sources") != std::string::npos);
    CHECK(config_error("[discretization]\ndt_factor = -1\n").find("dt_factor") != std::string::npos);
}

TEST_CASE("override precedence") {
    const auto dir = std::filesystem::temp_directory_path() / "lipfem_test_config";
    std::filesystem::create_directories(dir);
    const auto path = dir / "run.ini";
    std::ofstream(path) << "[discretization]\ntheta = 1.0\n[experiment]\nseed = 3\n";
    ConfigStore s;
    s.load(path);
    CHECK(s.get("discretization.theta") == "1.0");
    s.apply_override("discretization.theta=0.75");
    s.apply_override("experiment.h_levels = 4,8,16");
    const auto c = build_config(s);
    CHECK(c.theta == 0.75);
    CHECK(c.seed == 3);
    CHECK(c.h_levels == std::vector<int>{4, 8, 16});
    CHECK_THROWS_AS(s.apply_override("discretization.thetta=1"), Error);
    CHECK_THROWS_AS(s.apply_override("no equals sign"), Error);
    CHECK_THROWS_AS(s.load(dir / "missing.ini"), Error);
    std::filesystem::remove_all(dir);
}

TEST_CASE("output directory resolution") {
    ExperimentConfig c;
    c.output = "explicit";
    CHECK(output_directory(c) == std::filesystem::path("explicit"));
    c.output.clear();
    ::setenv("LIPFEM_OUTPUT_ROOT", "/tmp/from-env", 1);
    CHECK(output_directory(c) == std::filesystem::path("/tmp/from-env"));
    ::unsetenv("LIPFEM_OUTPUT_ROOT");
    CHECK(output_directory(c) == std::filesystem::path("lipfem-out"));
}
