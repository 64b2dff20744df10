// Command-line front end: one subcommand per experiment, results written as
// results.csv + manifest.json under the output root.
//
// exit codes: 0 success, 1 configuration, 2 solver or i/o, 3 --check breach

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lipfem/lipfem.h"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitSolver = 2;
constexpr int kExitCheck = 3;

struct Options {
    std::string config;
    std::string output;
    std::vector<std::string> overrides;
    bool check = false;
    int jobs = 0;
    bool quiet = false;
};

int report(lipfem_status s, const char* what) {
    std::cerr << "lipfem: " << what << ": " << lipfem_last_error() << " (" << lipfem_status_string(s) << ")\n";
    return s == LIPFEM_ERR_CONFIG ? kExitConfig : kExitSolver;
}

std::filesystem::path output_root(const Options& o, const lipfem_config* cfg) {
    if (!o.output.empty()) return o.output;
    const char* v = nullptr;
    if (lipfem_config_get(cfg, "experiment.output", &v) == LIPFEM_OK && v && *v) return v;
    if (const char* env = std::getenv("LIPFEM_OUTPUT_ROOT"); env && *env) return env;
    return "lipfem-out";
}

void print_mesh_info(const lipfem_table* t) {
    size_t rows = 0;
    lipfem_table_size(t, &rows);
    std::map<double, std::map<std::string, double>> levels;
    std::map<double, std::string> meta_of;
    std::map<double, long long> dofs_of;
    for (size_t i = 0; i < rows; ++i) {
        const char *quantity, *meta;
        double h, value;
        long long dofs;
        lipfem_table_row(t, i, nullptr, &h, &dofs, &quantity, &value, &meta);
        levels[h][quantity] = value;
        meta_of[h] = meta;
        dofs_of[h] = dofs;
    }
    for (auto it = levels.rbegin(); it != levels.rend(); ++it) {
        auto& q = it->second;
        std::printf("%-28s vertices %7.0f  triangles %7.0f  dofs %7lld  h %.6g  angles [%.2f, %.2f] deg  area %.12g\n",
                    meta_of[it->first].c_str(), q["vertices"], q["triangles"], dofs_of[it->first], it->first,
                    q["min_angle_deg"], q["max_angle_deg"], q["area"]);
    }
}

void print_summary(const lipfem_table* t) {
    size_t rows = 0;
    lipfem_table_size(t, &rows);
    for (size_t i = 0; i < rows; ++i) {
        const char *quantity, *meta;
        double h, value;
        lipfem_table_row(t, i, nullptr, &h, nullptr, &quantity, &value, &meta);
        if (h == 0.0) std::printf("  %-40s %.6g\n", quantity, value);
    }
}

int run(const std::string& experiment, const Options& o) {
    lipfem_config* cfg = nullptr;
    lipfem_config_new(&cfg);
    std::unique_ptr<lipfem_config, void (*)(lipfem_config*)> cfg_guard(cfg, lipfem_config_free);

    lipfem_status s;
    if (!o.config.empty()) {
        if (!std::filesystem::exists(o.config)) {
            std::cerr << "lipfem: config file not found: " << o.config << "\n";
            return kExitConfig;
        }
        if ((s = lipfem_config_load(cfg, o.config.c_str())) != LIPFEM_OK) return report(s, "config");
    }
    for (const auto& kv : o.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            std::cerr << "lipfem: override '" << kv << "' is not key=value\n";
            return kExitConfig;
        }
        if ((s = lipfem_config_set(cfg, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str())) != LIPFEM_OK)
            return report(s, "override");
    }
    if (o.jobs > 0 && (s = lipfem_config_set(cfg, "experiment.jobs", std::to_string(o.jobs).c_str())) != LIPFEM_OK)
        return report(s, "--jobs");
    if ((s = lipfem_config_validate(cfg)) != LIPFEM_OK) return report(s, "config");

    lipfem_table* table = nullptr;
    if ((s = lipfem_run(cfg, experiment.c_str(), &table)) != LIPFEM_OK) return report(s, experiment.c_str());
    std::unique_ptr<lipfem_table, void (*)(lipfem_table*)> table_guard(table, lipfem_table_free);

    const auto dir = output_root(o, cfg) / experiment;
    if ((s = lipfem_table_write(table, dir.string().c_str())) != LIPFEM_OK) return report(s, "write");

    if (experiment == "mesh-info") {
        print_mesh_info(table);
    } else if (!o.quiet) {
        std::printf("%s\n", experiment.c_str());
        print_summary(table);
    }
    if (!o.quiet) std::printf("results: %s\n", (dir / "results.csv").string().c_str());

    if (o.check) {
        size_t count = 0, failed = 0;
        lipfem_check(table, &count, &failed);
        for (size_t i = 0; i < count; ++i) {
            const char *name, *detail;
            int pass;
            lipfem_check_item(table, i, &name, &pass, &detail);
            std::printf("%s %s: %s\n", pass ? "PASS" : "FAIL", name, detail);
        }
        if (failed > 0) {
            std::fprintf(stderr, "lipfem: %zu of %zu checks failed\n", failed, count);
            return kExitCheck;
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Maximum-norm analysis of parabolic finite elements with Lipschitz coefficients"};
    app.set_version_flag("--version", std::string(lipfem_version()));
    app.require_subcommand(1);

    Options o;
    const std::vector<std::pair<std::string, std::string>> commands = {
        {"mesh-info", "vertex/triangle/h/quality summary per level"},
        {"convergence", "max-norm and L^p(L^q) error rates for the manufactured solution"},
        {"stability-scan", "L-infinity operator norms of the discrete semigroup"},
        {"spacetime-stability", "space-time maximum-norm stability ratios"},
        {"maxreg-scan", "maximal L^p regularity probe ratios"},
        {"semigroup-scan", "maximal semigroup estimate probe ratios"},
        {"green-diag", "discrete Green function diagnostics"},
    };
    std::string chosen;
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("-c,--config", o.config, "config file (sectioned key = value)");
        sub->add_option("-o,--output", o.output, "output root (default: experiment.output, $LIPFEM_OUTPUT_ROOT, ./lipfem-out)");
        sub->add_option("-s,--set", o.overrides, "override, e.g. experiment.h_levels=8,16,32")->allow_extra_args(false);
        sub->add_flag("--check", o.check, "evaluate acceptance thresholds; exit 3 on breach");
        sub->add_option("-j,--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
        sub->add_flag("-q,--quiet", o.quiet, "only print checks and errors");
        sub->callback([&chosen, name = name] { chosen = name; });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }
    return run(chosen, o);
}
