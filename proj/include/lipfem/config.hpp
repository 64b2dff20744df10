#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "lipfem/evolution.hpp"
#include "lipfem/mesh.hpp"

namespace lipfem {

/// Raw `section.key -> value` store behind the sectioned config format:
///
///     [coefficients]
///     name = lipschitz_kink      # comment
///
/// Only known keys are accepted; every key has a default.
class ConfigStore {
public:
    ConfigStore();

    static const std::vector<std::string>& known_keys();
    static bool is_known(const std::string& key);

    /// Throws ErrorKind::Config naming the line on malformed input.
    void parse(std::istream& in, const std::string& origin = "<config>");
    void load(const std::filesystem::path& path);
    /// `key=value` with a dotted key.
    void apply_override(const std::string& assignment);
    void set(const std::string& key, const std::string& value);
    const std::string& get(const std::string& key) const;
    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

enum class Manufactured { Cosine, Constant, Affine, Zero };

struct ExperimentConfig {
    DomainTag domain = DomainTag::UnitSquare;
    std::string coefficient = "identity";
    int degree = 1;
    double theta = 0.5;
    double dt_factor = 0.25;              // dt = dt_factor * h^2
    std::string backend = "auto";         // auto | spectral | theta_scheme
    int dense_limit = 5000;
    int quad_order = 0;
    double T = 1.0;
    std::vector<int> h_levels{8, 16, 32};
    std::vector<double> p_list{2.0, 4.0};
    std::vector<double> q_list{2.0, 4.0};
    std::vector<Point2> sources{{0.5, 0.5}, {0.3, 0.6}, {0.15, 0.2}};
    unsigned long long seed = 42;
    int probes = 20;
    double c_star = 16.0;
    int rho_ref = 4;
    int t_points = 16;
    int time_pieces = 8;
    Manufactured manufactured = Manufactured::Cosine;
    std::string output;
    int jobs = 1;
};

/// Validates every value of the store; throws ErrorKind::Config.
ExperimentConfig build_config(const ConfigStore& store);
ExperimentConfig parse_config(const std::filesystem::path& path);

/// Output directory: experiment.output, else $LIPFEM_OUTPUT_ROOT, else ./lipfem-out.
std::filesystem::path output_directory(const ExperimentConfig& cfg);

}  // namespace lipfem
