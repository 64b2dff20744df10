#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lipfem/assembly.hpp"
#include "lipfem/config.hpp"
#include "lipfem/evolution.hpp"

namespace lipfem {

struct ResultRow {
    std::string experiment;
    double h = 0.0;          // 0 for rows summarizing all levels
    long long dofs = 0;
    std::string quantity;
    double value = 0.0;
    std::string meta;        // `key=value` pairs separated by ';'
};

/// Append-only table; (experiment, h, quantity) is unique.
class ResultTable {
public:
    /// Throws InvalidArgument on a duplicate key.
    void append(ResultRow row);
    void append(const std::string& experiment, double h, long long dofs, const std::string& quantity, double value,
                const std::string& meta = "");
    void merge(const ResultTable& other);

    const std::vector<ResultRow>& rows() const { return rows_; }
    std::size_t size() const { return rows_.size(); }
    std::optional<double> find(const std::string& experiment, double h, const std::string& quantity) const;
    /// (h, value) for every level row of a quantity, in insertion order.
    std::vector<std::pair<double, double>> series(const std::string& experiment, const std::string& quantity) const;

    /// Header `experiment,h,dofs,quantity,value,meta`; values in shortest round-trip form.
    void write_csv(std::ostream& out) const;
    static ResultTable read_csv(std::istream& in);

private:
    std::vector<ResultRow> rows_;
};

enum class Experiment {
    MeshInfo,
    Convergence,
    StabilityScan,
    SpacetimeStability,
    MaxregScan,
    SemigroupScan,
    GreenDiagnostics,
};

/// CLI spelling, e.g. "stability-scan".
const char* to_string(Experiment e) noexcept;
Experiment experiment_from_string(const std::string& name);
/// Identifier used in the experiment column, e.g. "stability_scan".
const char* table_name(Experiment e) noexcept;

const char* version_string() noexcept;

/// Runs body(i) for i < count on up to `jobs` threads. Every index runs even
/// when one throws; the exception of the lowest failing index is rethrown.
void parallel_for(int jobs, std::size_t count, const std::function<void(std::size_t)>& body);

/// max / min of positive values (inf when some value is not positive).
double max_min_ratio(const std::vector<double>& values);
/// Least-squares slope of log(value) against log(h).
double loglog_slope(const std::vector<double>& h, const std::vector<double>& values);

MeshPtr level_mesh(DomainTag domain, int n);

/// Space-time separable manufactured solution u = s(t) U(x) with data
/// f = s f0, g = s g0 consistent with the weak form.
struct ManufacturedSolution {
    std::function<double(double)> s;
    ScalarField U;
    VectorField grad_U;
    ScalarField f0;
    VectorField g0;
    bool in_space = false;   // U belongs to S_h for every mesh
};
ManufacturedSolution manufactured_solution(Manufactured kind, DomainTag domain, const CoefficientField& coeff);

ResultTable mesh_info(const ExperimentConfig& cfg);
ResultTable convergence_study(const ExperimentConfig& cfg);
ResultTable stability_scan(const ExperimentConfig& cfg);
ResultTable spacetime_stability(const ExperimentConfig& cfg);
ResultTable maxreg_scan(const ExperimentConfig& cfg);
ResultTable maximal_semigroup_scan(const ExperimentConfig& cfg);
ResultTable green_diagnostics(const ExperimentConfig& cfg);
ResultTable run_experiment(Experiment e, const ExperimentConfig& cfg);

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};
/// Acceptance thresholds applied to a finished table.
std::vector<CheckResult> check_results(Experiment e, const ResultTable& table, const ExperimentConfig& cfg);

/// Writes results.csv and manifest.json into `dir` (created when missing).
void write_run(const std::filesystem::path& dir, Experiment e, const ConfigStore& store, const ResultTable& table,
               const std::string& started, const std::string& finished);
/// UTC time in ISO 8601.
std::string utc_timestamp();

}  // namespace lipfem
