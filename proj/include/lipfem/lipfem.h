#ifndef LIPFEM_H
#define LIPFEM_H

/* C interface of the lipfem library. Every call returns a status code; the
 * message of the last failure on the calling thread is available through
 * lipfem_last_error(). Handles are opaque and released with the matching
 * *_free function (which accepts NULL). Strings returned by the library stay
 * valid until the owning handle is freed or modified. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define LIPFEM_API __declspec(dllexport)
#else
#define LIPFEM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lipfem_status {
    LIPFEM_OK = 0,
    LIPFEM_ERR_INVALID_ARGUMENT = 1,
    LIPFEM_ERR_OUTSIDE_DOMAIN = 2,
    LIPFEM_ERR_UNSUPPORTED_DEGREE = 3,
    LIPFEM_ERR_ELLIPTICITY = 4,
    LIPFEM_ERR_SOLVER = 5,
    LIPFEM_ERR_MESH_TOO_COARSE = 6,
    LIPFEM_ERR_REFINEMENT = 7,
    LIPFEM_ERR_GRID_MISMATCH = 8,
    LIPFEM_ERR_CONFIG = 9,
    LIPFEM_ERR_IO = 10,
    LIPFEM_ERR_INTERNAL = 11
} lipfem_status;

typedef struct lipfem_mesh lipfem_mesh;
typedef struct lipfem_config lipfem_config;
typedef struct lipfem_table lipfem_table;

LIPFEM_API const char* lipfem_version(void);
LIPFEM_API const char* lipfem_status_string(lipfem_status status);
/* Empty string when the last call on this thread succeeded. */
LIPFEM_API const char* lipfem_last_error(void);

/* ---- meshes */
LIPFEM_API lipfem_status lipfem_mesh_square(int n, lipfem_mesh** out);
LIPFEM_API lipfem_status lipfem_mesh_disk(int rings, lipfem_mesh** out);
LIPFEM_API lipfem_status lipfem_mesh_refine(const lipfem_mesh* mesh, lipfem_mesh** out);
LIPFEM_API lipfem_status lipfem_mesh_info(const lipfem_mesh* mesh, int* vertices, int* triangles, double* h);
LIPFEM_API lipfem_status lipfem_mesh_quality(const lipfem_mesh* mesh, double* min_angle_deg, double* max_angle_deg,
                                             double* area);
LIPFEM_API lipfem_status lipfem_mesh_checksum(const lipfem_mesh* mesh, uint64_t* checksum);
LIPFEM_API void lipfem_mesh_free(lipfem_mesh* mesh);

/* ---- configuration (sectioned key = value text, dotted keys for overrides) */
LIPFEM_API lipfem_status lipfem_config_new(lipfem_config** out);
LIPFEM_API lipfem_status lipfem_config_load(lipfem_config* config, const char* path);
LIPFEM_API lipfem_status lipfem_config_parse(lipfem_config* config, const char* text);
LIPFEM_API lipfem_status lipfem_config_set(lipfem_config* config, const char* key, const char* value);
LIPFEM_API lipfem_status lipfem_config_get(const lipfem_config* config, const char* key, const char** value);
/* Full validation of every value. */
LIPFEM_API lipfem_status lipfem_config_validate(const lipfem_config* config);
LIPFEM_API void lipfem_config_free(lipfem_config* config);

/* ---- experiments
 * names: mesh-info, convergence, stability-scan, spacetime-stability,
 *        maxreg-scan, semigroup-scan, green-diag */
LIPFEM_API lipfem_status lipfem_run(const lipfem_config* config, const char* experiment, lipfem_table** out);
LIPFEM_API lipfem_status lipfem_table_size(const lipfem_table* table, size_t* rows);
LIPFEM_API lipfem_status lipfem_table_row(const lipfem_table* table, size_t index, const char** experiment, double* h,
                                          long long* dofs, const char** quantity, double* value, const char** meta);
/* Row of the table's experiment with the given h (0 for summary rows). */
LIPFEM_API lipfem_status lipfem_table_find(const lipfem_table* table, double h, const char* quantity, double* value);
/* results.csv and manifest.json below dir (created when missing). */
LIPFEM_API lipfem_status lipfem_table_write(const lipfem_table* table, const char* dir);
LIPFEM_API void lipfem_table_free(lipfem_table* table);

/* ---- acceptance thresholds of the table's experiment */
LIPFEM_API lipfem_status lipfem_check(const lipfem_table* table, size_t* count, size_t* failed);
LIPFEM_API lipfem_status lipfem_check_item(const lipfem_table* table, size_t index, const char** name, int* pass,
                                           const char** detail);

#ifdef __cplusplus
}
#endif

#endif
