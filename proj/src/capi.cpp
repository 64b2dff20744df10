#include "lipfem/lipfem.h"

#include <exception>
#include <memory>
#include <new>
#include <sstream>
#include <string>

#include "lipfem/config.hpp"
#include "lipfem/error.hpp"
#include "lipfem/harness.hpp"
#include "lipfem/mesh.hpp"

using namespace lipfem;

struct lipfem_mesh {
    MeshPtr mesh;
};

struct lipfem_config {
    ConfigStore store;
};

struct lipfem_table {
    Experiment experiment;
    ConfigStore store;
    ResultTable table;
    std::vector<CheckResult> checks;
    std::string started, finished;
};

namespace {

thread_local std::string last_error;

lipfem_status status_of(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidArgument: return LIPFEM_ERR_INVALID_ARGUMENT;
        case ErrorKind::OutsideDomain: return LIPFEM_ERR_OUTSIDE_DOMAIN;
        case ErrorKind::UnsupportedDegree: return LIPFEM_ERR_UNSUPPORTED_DEGREE;
        case ErrorKind::Ellipticity: return LIPFEM_ERR_ELLIPTICITY;
        case ErrorKind::Solver: return LIPFEM_ERR_SOLVER;
        case ErrorKind::MeshTooCoarse: return LIPFEM_ERR_MESH_TOO_COARSE;
        case ErrorKind::Refinement: return LIPFEM_ERR_REFINEMENT;
        case ErrorKind::GridMismatch: return LIPFEM_ERR_GRID_MISMATCH;
        case ErrorKind::Config: return LIPFEM_ERR_CONFIG;
        case ErrorKind::Io: return LIPFEM_ERR_IO;
    }
    return LIPFEM_ERR_INTERNAL;
}

template <class F>
lipfem_status guard(F&& f) {
    try {
        f();
        last_error.clear();
        return LIPFEM_OK;
    } catch (const Error& e) {
        last_error = e.what();
        return status_of(e.kind());
    } catch (const std::bad_alloc&) {
        last_error = "out of memory";
        return LIPFEM_ERR_INTERNAL;
    } catch (const std::exception& e) {
        last_error = e.what();
        return LIPFEM_ERR_INTERNAL;
    }
}

template <class T>
void need(const T* p, const char* what) {
    if (!p) fail(ErrorKind::InvalidArgument, std::string(what) + " must not be NULL");
}

}  // namespace

extern "C" {

const char* lipfem_version(void) { return version_string(); }

const char* lipfem_status_string(lipfem_status status) {
    switch (status) {
        case LIPFEM_OK: return "ok";
        case LIPFEM_ERR_INVALID_ARGUMENT: return "invalid argument";
        case LIPFEM_ERR_OUTSIDE_DOMAIN: return "outside domain";
        case LIPFEM_ERR_UNSUPPORTED_DEGREE: return "unsupported degree";
        case LIPFEM_ERR_ELLIPTICITY: return "ellipticity violated";
        case LIPFEM_ERR_SOLVER: return "solver failure";
        case LIPFEM_ERR_MESH_TOO_COARSE: return "mesh too coarse";
        case LIPFEM_ERR_REFINEMENT: return "refinement mismatch";
        case LIPFEM_ERR_GRID_MISMATCH: return "grid mismatch";
        case LIPFEM_ERR_CONFIG: return "configuration error";
        case LIPFEM_ERR_IO: return "i/o error";
        case LIPFEM_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

const char* lipfem_last_error(void) { return last_error.c_str(); }

lipfem_status lipfem_mesh_square(int n, lipfem_mesh** out) {
    return guard([&] {
        need(out, "out");
        *out = new lipfem_mesh{build_structured_square(n)};
    });
}

lipfem_status lipfem_mesh_disk(int rings, lipfem_mesh** out) {
    return guard([&] {
        need(out, "out");
        *out = new lipfem_mesh{build_disk_polygon(rings)};
    });
}

lipfem_status lipfem_mesh_refine(const lipfem_mesh* mesh, lipfem_mesh** out) {
    return guard([&] {
        need(mesh, "mesh");
        need(out, "out");
        *out = new lipfem_mesh{refine_uniform(*mesh->mesh)};
    });
}

lipfem_status lipfem_mesh_info(const lipfem_mesh* mesh, int* vertices, int* triangles, double* h) {
    return guard([&] {
        need(mesh, "mesh");
        if (vertices) *vertices = mesh->mesh->num_vertices();
        if (triangles) *triangles = mesh->mesh->num_triangles();
        if (h) *h = mesh->mesh->h();
    });
}

lipfem_status lipfem_mesh_quality(const lipfem_mesh* mesh, double* min_angle_deg, double* max_angle_deg,
                                  double* area) {
    return guard([&] {
        need(mesh, "mesh");
        const auto q = mesh->mesh->quality();
        if (min_angle_deg) *min_angle_deg = q.min_angle_deg;
        if (max_angle_deg) *max_angle_deg = q.max_angle_deg;
        if (area) *area = q.area;
    });
}

lipfem_status lipfem_mesh_checksum(const lipfem_mesh* mesh, uint64_t* checksum) {
    return guard([&] {
        need(mesh, "mesh");
        need(checksum, "checksum");
        *checksum = mesh->mesh->checksum();
    });
}

void lipfem_mesh_free(lipfem_mesh* mesh) { delete mesh; }

lipfem_status lipfem_config_new(lipfem_config** out) {
    return guard([&] {
        need(out, "out");
        *out = new lipfem_config{};
    });
}

lipfem_status lipfem_config_load(lipfem_config* config, const char* path) {
    return guard([&] {
        need(config, "config");
        need(path, "path");
        config->store.load(path);
    });
}

lipfem_status lipfem_config_parse(lipfem_config* config, const char* text) {
    return guard([&] {
        need(config, "config");
        need(text, "text");
        std::istringstream in(text);
        config->store.parse(in);
    });
}

lipfem_status lipfem_config_set(lipfem_config* config, const char* key, const char* value) {
    return guard([&] {
        need(config, "config");
        need(key, "key");
        need(value, "value");
        config->store.set(key, value);
    });
}

lipfem_status lipfem_config_get(const lipfem_config* config, const char* key, const char** value) {
    return guard([&] {
        need(config, "config");
        need(key, "key");
        need(value, "value");
        *value = config->store.get(key).c_str();
    });
}

lipfem_status lipfem_config_validate(const lipfem_config* config) {
    return guard([&] {
        need(config, "config");
        (void)build_config(config->store);
    });
}

void lipfem_config_free(lipfem_config* config) { delete config; }

lipfem_status lipfem_run(const lipfem_config* config, const char* experiment, lipfem_table** out) {
    return guard([&] {
        need(config, "config");
        need(experiment, "experiment");
        need(out, "out");
        auto t = std::make_unique<lipfem_table>();
        t->experiment = experiment_from_string(experiment);
        t->store = config->store;
        const auto cfg = build_config(t->store);
        t->started = utc_timestamp();
        t->table = run_experiment(t->experiment, cfg);
        t->finished = utc_timestamp();
        t->checks = check_results(t->experiment, t->table, cfg);
        *out = t.release();
    });
}

lipfem_status lipfem_table_size(const lipfem_table* table, size_t* rows) {
    return guard([&] {
        need(table, "table");
        need(rows, "rows");
        *rows = table->table.size();
    });
}

lipfem_status lipfem_table_row(const lipfem_table* table, size_t index, const char** experiment, double* h,
                               long long* dofs, const char** quantity, double* value, const char** meta) {
    return guard([&] {
        need(table, "table");
        if (index >= table->table.size()) fail(ErrorKind::InvalidArgument, "row index out of range");
        const auto& r = table->table.rows()[index];
        if (experiment) *experiment = r.experiment.c_str();
        if (h) *h = r.h;
        if (dofs) *dofs = r.dofs;
        if (quantity) *quantity = r.quantity.c_str();
        if (value) *value = r.value;
        if (meta) *meta = r.meta.c_str();
    });
}

lipfem_status lipfem_table_find(const lipfem_table* table, double h, const char* quantity, double* value) {
    return guard([&] {
        need(table, "table");
        need(quantity, "quantity");
        need(value, "value");
        const auto v = table->table.find(table_name(table->experiment), h, quantity);
        if (!v) fail(ErrorKind::InvalidArgument, std::string("no row for quantity '") + quantity + "'");
        *value = *v;
    });
}

lipfem_status lipfem_table_write(const lipfem_table* table, const char* dir) {
    return guard([&] {
        need(table, "table");
        need(dir, "dir");
        write_run(dir, table->experiment, table->store, table->table, table->started, table->finished);
    });
}

void lipfem_table_free(lipfem_table* table) { delete table; }

lipfem_status lipfem_check(const lipfem_table* table, size_t* count, size_t* failed) {
    return guard([&] {
        need(table, "table");
        std::size_t bad = 0;
        for (const auto& c : table->checks) bad += c.pass ? 0 : 1;
        if (count) *count = table->checks.size();
        if (failed) *failed = bad;
    });
}

lipfem_status lipfem_check_item(const lipfem_table* table, size_t index, const char** name, int* pass,
                                const char** detail) {
    return guard([&] {
        need(table, "table");
        if (index >= table->checks.size()) fail(ErrorKind::InvalidArgument, "check index out of range");
        const auto& c = table->checks[index];
        if (name) *name = c.name.c_str();
        if (pass) *pass = c.pass ? 1 : 0;
        if (detail) *detail = c.detail.c_str();
    });
}

}  // extern "C"
