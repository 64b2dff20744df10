#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>

#include "lipfem/lipfem.h"

TEST_CASE("version and status strings") {
    CHECK(std::string(lipfem_version()).rfind("lipfem ", 0) == 0);
    CHECK(std::string(lipfem_status_string(LIPFEM_ERR_CONFIG)) == "configuration error");
    CHECK(std::string(lipfem_status_string(static_cast<lipfem_status>(99))) == "unknown status");
}

TEST_CASE("mesh handles") {
    lipfem_mesh* m = nullptr;
    REQUIRE(lipfem_mesh_square(8, &m) == LIPFEM_OK);
    int nv = 0, nt = 0;
    double h = 0.0;
    CHECK(lipfem_mesh_info(m, &nv, &nt, &h) == LIPFEM_OK);
    CHECK(nv == 81);
    CHECK(nt == 128);
    CHECK(h == doctest::Approx(std::sqrt(2.0) / 8));

    lipfem_mesh* f = nullptr;
    REQUIRE(lipfem_mesh_refine(m, &f) == LIPFEM_OK);
    CHECK(lipfem_mesh_info(f, nullptr, &nt, nullptr) == LIPFEM_OK);
    CHECK(nt == 512);
    double amin = 0, amax = 0, area = 0;
    CHECK(lipfem_mesh_quality(f, &amin, &amax, &area) == LIPFEM_OK);
    CHECK(amin == doctest::Approx(45.0));
    CHECK(area == doctest::Approx(1.0));
    uint64_t c1 = 0, c2 = 0;
    lipfem_mesh_checksum(m, &c1);
    lipfem_mesh_checksum(f, &c2);
    CHECK(c1 != c2);
    lipfem_mesh_free(f);
    lipfem_mesh_free(m);
    lipfem_mesh_free(nullptr);

    lipfem_mesh* bad = nullptr;
    CHECK(lipfem_mesh_disk(0, &bad) == LIPFEM_ERR_INVALID_ARGUMENT);
    CHECK(std::strlen(lipfem_last_error()) > 0);
    CHECK(bad == nullptr);
    CHECK(lipfem_mesh_square(2, nullptr) == LIPFEM_ERR_INVALID_ARGUMENT);
    CHECK(lipfem_mesh_info(nullptr, &nv, &nt, &h) == LIPFEM_ERR_INVALID_ARGUMENT);
}

TEST_CASE("configuration errors map to the config status") {
    lipfem_config* c = nullptr;
    REQUIRE(lipfem_config_new(&c) == LIPFEM_OK);
    CHECK(lipfem_config_parse(c, "[discretization]\ntheta = 1.0\n") == LIPFEM_OK);
    const char* v = nullptr;
    CHECK(lipfem_config_get(c, "discretization.theta", &v) == LIPFEM_OK);
    CHECK(std::string(v) == "1.0");
    CHECK(lipfem_config_set(c, "discretization.theta", "0.3") == LIPFEM_OK);
    CHECK(lipfem_config_validate(c) == LIPFEM_ERR_CONFIG);
    CHECK(std::string(lipfem_last_error()).find("theta") != std::string::npos);
    CHECK(lipfem_config_set(c, "discretization.bogus", "1") == LIPFEM_ERR_CONFIG);
    CHECK(lipfem_config_parse(c, "[experiment]\nnot a pair\n") == LIPFEM_ERR_CONFIG);
    CHECK(lipfem_config_load(c, "/nonexistent/lipfem.ini") != LIPFEM_OK);
    lipfem_config_free(c);
}

TEST_CASE("running an experiment through the C interface") {
    lipfem_config* c = nullptr;
    lipfem_config_new(&c);
    lipfem_config_set(c, "experiment.h_levels", "4,8,16");
    lipfem_config_set(c, "experiment.manufactured", "affine");
    lipfem_table* t = nullptr;
    REQUIRE(lipfem_run(c, "convergence", &t) == LIPFEM_OK);
    size_t rows = 0;
    CHECK(lipfem_table_size(t, &rows) == LIPFEM_OK);
    CHECK(rows > 3);
    const char *ex = nullptr, *q = nullptr, *meta = nullptr;
    double h = 0, value = 0;
    long long dofs = 0;
    CHECK(lipfem_table_row(t, 0, &ex, &h, &dofs, &q, &value, &meta) == LIPFEM_OK);
    CHECK(std::string(ex) == "convergence");
    CHECK(lipfem_table_row(t, rows, &ex, &h, &dofs, &q, &value, &meta) == LIPFEM_ERR_INVALID_ARGUMENT);
    double err = -1.0;
    CHECK(lipfem_table_find(t, std::sqrt(2.0) / 16, "linf_error", &err) == LIPFEM_OK);
    CHECK(err <= 1e-9);
    CHECK(lipfem_table_find(t, 0.0, "no_such_row", &err) == LIPFEM_ERR_INVALID_ARGUMENT);

    size_t count = 0, failed = 1;
    CHECK(lipfem_check(t, &count, &failed) == LIPFEM_OK);
    CHECK(count == 3);
    CHECK(failed == 0);
    const char *name = nullptr, *detail = nullptr;
    int pass = 0;
    CHECK(lipfem_check_item(t, 0, &name, &pass, &detail) == LIPFEM_OK);
    CHECK(pass == 1);

    const auto dir = std::filesystem::temp_directory_path() / "lipfem_capi_run";
    std::filesystem::remove_all(dir);
    CHECK(lipfem_table_write(t, dir.string().c_str()) == LIPFEM_OK);
    CHECK(std::filesystem::exists(dir / "results.csv"));
    CHECK(std::filesystem::exists(dir / "manifest.json"));
    std::filesystem::remove_all(dir);
    lipfem_table_free(t);

    lipfem_table* none = nullptr;
    CHECK(lipfem_run(c, "everything", &none) == LIPFEM_ERR_INVALID_ARGUMENT);
    lipfem_config_set(c, "experiment.C_star", "16");
    lipfem_config_set(c, "experiment.h_levels", "4,8");
    CHECK(lipfem_run(c, "green-diag", &none) == LIPFEM_ERR_MESH_TOO_COARSE);
    CHECK(none == nullptr);
    lipfem_config_free(c);
}
