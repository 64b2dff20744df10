#include "lipfem/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>

#include "lipfem/assembly.hpp"
#include "lipfem/error.hpp"
#include "lipfem/text.hpp"

namespace lipfem {

namespace {

const std::vector<std::pair<std::string, std::string>>& defaults() {
    static const std::vector<std::pair<std::string, std::string>> d = {
        {"domain.type", "unit_square"},
        {"coefficients.name", "identity"},
        {"discretization.degree", "1"},
        {"discretization.theta", "0.5"},
        {"discretization.dt_factor", "0.25"},
        {"discretization.backend", "auto"},
        {"discretization.dense_limit", "5000"},
        {"discretization.quad_order", "0"},
        {"experiment.T", "1"},
        {"experiment.h_levels", "8,16,32"},
        {"experiment.p_list", "2,4"},
        {"experiment.q_list", "2,4"},
        {"experiment.sources", "0.5 0.5, 0.3 0.6, 0.15 0.2"},
        {"experiment.seed", "42"},
        {"experiment.probes", "20"},
        {"experiment.C_star", "16"},
        {"experiment.rho_ref", "4"},
        {"experiment.t_points", "16"},
        {"experiment.time_pieces", "8"},
        {"experiment.manufactured", "cosine"},
        {"experiment.output", ""},
        {"experiment.jobs", "1"},
    };
    return d;
}

[[noreturn]] void bad(const std::string& key, const std::string& why) {
    fail(ErrorKind::Config, "invalid value for " + key + ": " + why);
}

double number(const ConfigStore& s, const std::string& key) {
    const std::string& v = s.get(key);
    if (v == "inf" || v == "infinity") return INFINITY;
    try {
        return parse_double(v);
    } catch (const Error&) {
        bad(key, "'" + v + "' is not a number");
    }
}

long long integer(const ConfigStore& s, const std::string& key) {
    const std::string& v = s.get(key);
    try {
        return parse_int(v);
    } catch (const Error&) {
        bad(key, "'" + v + "' is not an integer");
    }
}

std::vector<double> number_list(const ConfigStore& s, const std::string& key) {
    std::vector<double> out;
    for (const auto& part : split(s.get(key), ',')) {
        const auto t = std::string(trim(part));
        if (t.empty()) continue;
        if (t == "inf" || t == "infinity") {
            out.push_back(INFINITY);
            continue;
        }
        try {
            out.push_back(parse_double(t));
        } catch (const Error&) {
            bad(key, "'" + t + "' is not a number");
        }
    }
    if (out.empty()) bad(key, "list is empty");
    return out;
}

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace

ConfigStore::ConfigStore() {
    for (const auto& [k, v] : defaults()) values_[k] = v;
}

const std::vector<std::string>& ConfigStore::known_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& [key, value] : defaults()) k.push_back(key);
        return k;
    }();
    return keys;
}

bool ConfigStore::is_known(const std::string& key) {
    const auto& k = known_keys();
    return std::find(k.begin(), k.end(), key) != k.end();
}

void ConfigStore::set(const std::string& key, const std::string& value) {
    if (!is_known(key)) fail(ErrorKind::Config, "unknown key '" + key + "'");
    values_[key] = value;
}

const std::string& ConfigStore::get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) fail(ErrorKind::Config, "unknown key '" + key + "'");
    return it->second;
}

void ConfigStore::parse(std::istream& in, const std::string& origin) {
    std::string line;
    std::string section;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto where = origin + ":" + std::to_string(number) + ": ";
        std::string_view text = line;
        if (const auto hash = text.find_first_of("#;"); hash != std::string_view::npos) text = text.substr(0, hash);
        text = trim(text);
        if (text.empty()) continue;
        if (text.front() == '[') {
            if (text.back() != ']') fail(ErrorKind::Config, where + "unterminated section header");
            section = std::string(trim(text.substr(1, text.size() - 2)));
            if (section != "domain" && section != "coefficients" && section != "discretization" &&
                section != "experiment")
                fail(ErrorKind::Config, where + "unknown section [" + section + "]");
            continue;
        }
        const auto eq = text.find('=');
        if (eq == std::string_view::npos) fail(ErrorKind::Config, where + "expected key = value");
        const std::string key(trim(text.substr(0, eq)));
        const std::string value(trim(text.substr(eq + 1)));
        if (key.empty()) fail(ErrorKind::Config, where + "empty key");
        const std::string full = key.find('.') != std::string::npos ? key : section.empty() ? key : section + "." + key;
        if (!is_known(full)) fail(ErrorKind::Config, where + "unknown key '" + full + "'");
        values_[full] = value;
    }
}

void ConfigStore::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Config, "cannot open config file " + path.string());
    parse(in, path.string());
}

void ConfigStore::apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) fail(ErrorKind::Config, "override '" + assignment + "' is not key=value");
    set(std::string(trim(std::string_view(assignment).substr(0, eq))),
        std::string(trim(std::string_view(assignment).substr(eq + 1))));
}

ExperimentConfig build_config(const ConfigStore& s) {
    ExperimentConfig c;
    try {
        c.domain = domain_tag_from_string(s.get("domain.type"));
    } catch (const Error& e) {
        bad("domain.type", e.what());
    }
    c.coefficient = s.get("coefficients.name");
    const auto names = coefficient_names();
    if (std::find(names.begin(), names.end(), c.coefficient) == names.end())
        bad("coefficients.name", "unknown field '" + c.coefficient + "'");

    c.degree = static_cast<int>(integer(s, "discretization.degree"));
    if (c.degree != 1 && c.degree != 2) bad("discretization.degree", "must be 1 or 2");
    c.theta = number(s, "discretization.theta");
    if (!(c.theta >= 0.5 && c.theta <= 1.0)) bad("discretization.theta", "theta must lie in [0.5, 1]");
    c.dt_factor = number(s, "discretization.dt_factor");
    if (!(c.dt_factor > 0.0) || !std::isfinite(c.dt_factor)) bad("discretization.dt_factor", "must be positive");
    c.backend = s.get("discretization.backend");
    if (c.backend != "auto" && c.backend != "spectral" && c.backend != "theta_scheme")
        bad("discretization.backend", "expected auto, spectral or theta_scheme");
    c.dense_limit = static_cast<int>(integer(s, "discretization.dense_limit"));
    if (c.dense_limit < 1) bad("discretization.dense_limit", "must be positive");
    c.quad_order = static_cast<int>(integer(s, "discretization.quad_order"));
    if (c.quad_order < 0 || c.quad_order > 6) bad("discretization.quad_order", "must lie in 0..6");

    c.T = number(s, "experiment.T");
    if (!(c.T > 0.0) || !std::isfinite(c.T)) bad("experiment.T", "must be positive");
    c.h_levels.clear();
    for (double v : number_list(s, "experiment.h_levels")) {
        if (v != std::floor(v) || v < 1 || v > 4096) bad("experiment.h_levels", "levels are positive integers");
        c.h_levels.push_back(static_cast<int>(v));
    }
    if (!std::is_sorted(c.h_levels.begin(), c.h_levels.end()) ||
        std::adjacent_find(c.h_levels.begin(), c.h_levels.end()) != c.h_levels.end())
        bad("experiment.h_levels", "levels must increase strictly");
    c.p_list = number_list(s, "experiment.p_list");
    c.q_list = number_list(s, "experiment.q_list");
    for (double p : c.p_list)
        if (!(p >= 1.0)) bad("experiment.p_list", "exponents must be >= 1");
    for (double q : c.q_list)
        if (!(q >= 1.0)) bad("experiment.q_list", "exponents must be >= 1");

    c.sources.clear();
    for (const auto& part : split(s.get("experiment.sources"), ',')) {
        const auto t = trim(part);
        if (t.empty()) continue;
        std::vector<std::string> xy;
        for (const auto& w : split(t, ' '))
            if (!trim(w).empty()) xy.emplace_back(trim(w));
        if (xy.size() != 2) bad("experiment.sources", "each source is 'x1 x2'");
        try {
            c.sources.push_back({parse_double(xy[0]), parse_double(xy[1])});
        } catch (const Error&) {
            bad("experiment.sources", "'" + std::string(t) + "' is not a point");
        }
    }
    if (c.sources.empty()) bad("experiment.sources", "list is empty");

    const long long seed = integer(s, "experiment.seed");
    if (seed < 0) bad("experiment.seed", "must be non-negative");
    c.seed = static_cast<unsigned long long>(seed);
    c.probes = static_cast<int>(integer(s, "experiment.probes"));
    if (c.probes < 1) bad("experiment.probes", "must be positive");
    c.c_star = number(s, "experiment.C_star");
    if (!(c.c_star > 0.0) || !std::isfinite(c.c_star)) bad("experiment.C_star", "must be positive");
    c.rho_ref = static_cast<int>(integer(s, "experiment.rho_ref"));
    if (!is_power_of_two(c.rho_ref) || c.rho_ref > 16) bad("experiment.rho_ref", "must be 1, 2, 4, 8 or 16");
    c.t_points = static_cast<int>(integer(s, "experiment.t_points"));
    if (c.t_points < 2) bad("experiment.t_points", "need at least 2 times");
    c.time_pieces = static_cast<int>(integer(s, "experiment.time_pieces"));
    if (c.time_pieces < 1) bad("experiment.time_pieces", "must be positive");
    const std::string& m = s.get("experiment.manufactured");
    if (m == "cosine")
        c.manufactured = Manufactured::Cosine;
    else if (m == "constant")
        c.manufactured = Manufactured::Constant;
    else if (m == "affine")
        c.manufactured = Manufactured::Affine;
    else if (m == "zero")
        c.manufactured = Manufactured::Zero;
    else
        bad("experiment.manufactured", "expected cosine, constant, affine or zero");
    c.output = s.get("experiment.output");
    c.jobs = static_cast<int>(integer(s, "experiment.jobs"));
    if (c.jobs < 1) bad("experiment.jobs", "must be positive");
    return c;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
    ConfigStore s;
    s.load(path);
    return build_config(s);
}

std::filesystem::path output_directory(const ExperimentConfig& cfg) {
    if (!cfg.output.empty()) return cfg.output;
    if (const char* root = std::getenv("LIPFEM_OUTPUT_ROOT"); root && *root) return root;
    return "lipfem-out";
}

}  // namespace lipfem
