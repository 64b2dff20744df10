#include "lipfem/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <exception>
#include <fstream>
#include <istream>
#include <mutex>
#include <numbers>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "lipfem/assembly.hpp"
#include "lipfem/error.hpp"
#include "lipfem/green.hpp"
#include "lipfem/norms.hpp"
#include "lipfem/projections.hpp"
#include "lipfem/text.hpp"

namespace lipfem {

// ---------------------------------------------------------------- table

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::vector<std::string> csv_split(const std::string& line) {
    std::vector<std::string> out(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                out.back() += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                out.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.emplace_back();
        } else {
            out.back() += c;
        }
    }
    return out;
}

}  // namespace

void ResultTable::append(ResultRow row) {
    for (const auto& r : rows_)
        if (r.experiment == row.experiment && r.h == row.h && r.quantity == row.quantity)
            fail(ErrorKind::InvalidArgument, "duplicate result row " + row.experiment + "/" + format_double(row.h) + "/" +
                                                 row.quantity);
    rows_.push_back(std::move(row));
}

void ResultTable::append(const std::string& experiment, double h, long long dofs, const std::string& quantity,
                         double value, const std::string& meta) {
    append(ResultRow{experiment, h, dofs, quantity, value, meta});
}

void ResultTable::merge(const ResultTable& other) {
    for (const auto& r : other.rows_) append(r);
}

std::optional<double> ResultTable::find(const std::string& experiment, double h, const std::string& quantity) const {
    for (const auto& r : rows_)
        if (r.experiment == experiment && r.h == h && r.quantity == quantity) return r.value;
    return std::nullopt;
}

std::vector<std::pair<double, double>> ResultTable::series(const std::string& experiment,
                                                           const std::string& quantity) const {
    std::vector<std::pair<double, double>> out;
    for (const auto& r : rows_)
        if (r.experiment == experiment && r.quantity == quantity && r.h > 0.0) out.emplace_back(r.h, r.value);
    return out;
}

void ResultTable::write_csv(std::ostream& out) const {
    out << "experiment,h,dofs,quantity,value,meta\n";
    for (const auto& r : rows_)
        out << csv_field(r.experiment) << ',' << format_double(r.h) << ',' << r.dofs << ',' << csv_field(r.quantity)
            << ',' << format_double(r.value) << ',' << csv_field(r.meta) << '\n';
}

ResultTable ResultTable::read_csv(std::istream& in) {
    ResultTable t;
    std::string line;
    if (!std::getline(in, line) || line != "experiment,h,dofs,quantity,value,meta")
        fail(ErrorKind::Io, "result table header missing");
    int number = 1;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty()) continue;
        const auto f = csv_split(line);
        if (f.size() != 6) fail(ErrorKind::Io, "result table line " + std::to_string(number) + " has the wrong width");
        t.append(f[0], parse_double(f[1]), parse_int(f[2]), f[3], parse_double(f[4]), f[5]);
    }
    return t;
}

// ---------------------------------------------------------------- plumbing

namespace {

struct ExperimentName {
    Experiment e;
    const char* cli;
    const char* table;
};

constexpr ExperimentName kNames[] = {
    {Experiment::MeshInfo, "mesh-info", "mesh_info"},
    {Experiment::Convergence, "convergence", "convergence"},
    {Experiment::StabilityScan, "stability-scan", "stability_scan"},
    {Experiment::SpacetimeStability, "spacetime-stability", "spacetime_stability"},
    {Experiment::MaxregScan, "maxreg-scan", "maxreg_scan"},
    {Experiment::SemigroupScan, "semigroup-scan", "semigroup_scan"},
    {Experiment::GreenDiagnostics, "green-diag", "green_diagnostics"},
};

}  // namespace

const char* to_string(Experiment e) noexcept {
    for (const auto& n : kNames)
        if (n.e == e) return n.cli;
    return "?";
}

const char* table_name(Experiment e) noexcept {
    for (const auto& n : kNames)
        if (n.e == e) return n.table;
    return "?";
}

Experiment experiment_from_string(const std::string& name) {
    for (const auto& n : kNames)
        if (name == n.cli || name == n.table) return n.e;
    fail(ErrorKind::InvalidArgument, "unknown experiment '" + name + "'");
}

const char* version_string() noexcept { return "lipfem 1.0.0"; }

void parallel_for(int jobs, std::size_t count, const std::function<void(std::size_t)>& body) {
    std::vector<std::exception_ptr> errors(count);
    const std::size_t workers = std::min<std::size_t>(std::max(jobs, 1), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            try {
                body(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    } else {
        std::mutex mutex;
        std::size_t next = 0;
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (;;) {
                    std::size_t i;
                    {
                        std::lock_guard lock(mutex);
                        if (next == count) return;
                        i = next++;
                    }
                    try {
                        body(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

double max_min_ratio(const std::vector<double>& values) {
    if (values.empty()) return INFINITY;
    double lo = INFINITY, hi = 0.0;
    for (double v : values) {
        if (!(v > 0.0) || !std::isfinite(v)) return INFINITY;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return hi / lo;
}

double loglog_slope(const std::vector<double>& h, const std::vector<double>& values) {
    if (h.size() != values.size() || h.size() < 2)
        fail(ErrorKind::InvalidArgument, "slope needs at least two matching samples");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) {
        if (!(h[i] > 0.0) || !(values[i] > 0.0)) return NAN;
        const double x = std::log(h[i]), y = std::log(values[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

MeshPtr level_mesh(DomainTag domain, int n) {
    return domain == DomainTag::UnitSquare ? build_structured_square(n) : build_disk_polygon(n);
}

ManufacturedSolution manufactured_solution(Manufactured kind, DomainTag domain, const CoefficientField& coeff) {
    constexpr double pi = std::numbers::pi;
    ManufacturedSolution m;
    auto exp_decay = [](double t) { return std::exp(-t); };
    auto c = coeff.c;
    auto a = coeff.a;
    switch (kind) {
        case Manufactured::Cosine: {
            m.s = exp_decay;
            m.U = [](Point2 p) { return std::cos(pi * p.x1) * std::cos(pi * p.x2); };
            m.grad_U = [](Point2 p) {
                return Vec2(-pi * std::sin(pi * p.x1) * std::cos(pi * p.x2),
                            -pi * std::cos(pi * p.x1) * std::sin(pi * p.x2));
            };
            const auto U = m.U;
            const auto gU = m.grad_U;
            if (domain == DomainTag::UnitSquare) {
                // grad U . n = 0 on the square, so (grad u, grad v) = (-lap u, v)
                m.f0 = [U, c](Point2 p) { return (2.0 * pi * pi - 1.0 + c(p)) * U(p); };
                m.g0 = [gU, a](Point2 p) { return Vec2((a(p) - Mat2::Identity()) * gU(p)); };
            } else {
                m.f0 = [U, c](Point2 p) { return (c(p) - 1.0) * U(p); };
                m.g0 = [gU, a](Point2 p) { return Vec2(a(p) * gU(p)); };
            }
            break;
        }
        case Manufactured::Constant:
            m.s = exp_decay;
            m.U = [](Point2) { return 1.0; };
            m.grad_U = [](Point2) { return Vec2(0.0, 0.0); };
            m.f0 = [c](Point2 p) { return c(p) - 1.0; };
            m.g0 = [](Point2) { return Vec2(0.0, 0.0); };
            m.in_space = true;
            break;
        case Manufactured::Affine:
            m.s = [](double) { return 1.0; };
            m.U = [](Point2 p) { return p.x1; };
            m.grad_U = [](Point2) { return Vec2(1.0, 0.0); };
            m.f0 = [c](Point2 p) { return c(p) * p.x1; };
            m.g0 = [a](Point2 p) { return Vec2(a(p).col(0)); };
            m.in_space = true;
            break;
        case Manufactured::Zero:
            m.s = [](double) { return 0.0; };
            m.U = [](Point2) { return 0.0; };
            m.grad_U = [](Point2) { return Vec2(0.0, 0.0); };
            m.f0 = [](Point2) { return 0.0; };
            m.g0 = [](Point2) { return Vec2(0.0, 0.0); };
            m.in_space = true;
            break;
    }
    return m;
}

// ---------------------------------------------------------------- shared pieces

namespace {

std::string num(double v) { return format_double(v); }

std::string pq_tag(double p, double q) { return "p" + num(p) + "_q" + num(q); }

struct Level {
    int n = 0;
    MeshPtr mesh;
    SpacePtr space;
    CoefficientField coeff;
    int order = 0;
    double h = 0.0;
    long long dofs = 0;
};

Level make_level(const ExperimentConfig& cfg, int n) {
    Level l;
    l.n = n;
    l.mesh = level_mesh(cfg.domain, n);
    l.space = build_space(l.mesh, cfg.degree);
    l.coeff = coefficient_library(cfg.coefficient);
    l.order = cfg.quad_order > 0 ? cfg.quad_order : default_assembly_order(*l.space);
    l.h = l.mesh->h();
    l.dofs = l.space->num_dofs();
    return l;
}

std::unique_ptr<Evolver> spectral_evolver(const ExperimentConfig& cfg, const Level& l) {
    EvolutionBackend b;
    b.kind = BackendKind::Spectral;
    b.dense_limit = cfg.dense_limit;
    b.theta = cfg.theta;
    return std::make_unique<Evolver>(assemble_mass(*l.space), assemble_stiffness(*l.space, l.coeff, l.order), b);
}

/// Per-level tasks run through parallel_for and merged in level order.
template <class Body>
ResultTable over_levels(const ExperimentConfig& cfg, Body&& body) {
    std::vector<ResultTable> parts(cfg.h_levels.size());
    parallel_for(cfg.jobs, parts.size(), [&](std::size_t i) { parts[i] = body(cfg.h_levels[i]); });
    ResultTable out;
    for (const auto& p : parts) out.merge(p);
    return out;
}

std::mt19937_64 probe_stream(const ExperimentConfig& cfg, int tag, int n, int probe) {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed & 0xffffffffu), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(n),
                      static_cast<std::uint32_t>(probe)};
    return std::mt19937_64(seq);
}

Vec normal_vector(std::mt19937_64& rng, Eigen::Index size) {
    std::normal_distribution<double> dist(0.0, 1.0);
    Vec v(size);
    for (Eigen::Index i = 0; i < size; ++i) v[i] = dist(rng);
    return v;
}

void require_levels(const ExperimentConfig& cfg, std::size_t count, const char* what) {
    if (cfg.h_levels.size() < count)
        fail(ErrorKind::Config, std::string(what) + " needs at least " + std::to_string(count) + " h-levels");
}

// --- manufactured runs

struct ManufacturedRun {
    Level level;
    double dt = 0.0;
    long long steps = 0;
    double linf_error = 0.0;
    std::vector<double> lpq;  // [ip * nq + iq]
    double max_uh = 0.0;
    double u0h_inf = 0.0;
    double u_inf = 0.0;
};

ManufacturedRun run_manufactured(const ExperimentConfig& cfg, int n, bool want_lpq) {
    ManufacturedRun run;
    run.level = make_level(cfg, n);
    const Level& l = run.level;
    const auto ms = manufactured_solution(cfg.manufactured, cfg.domain, l.coeff);

    // discrete data of an in-space solution must match the stiffness quadrature exactly
    const LoadAssembler la(l.space, ms.in_space ? l.order : std::min(6, l.order + 2));
    const Vec b0 = la.load(ms.f0) + la.div_load(ms.g0);

    run.steps = std::max<long long>(1, static_cast<long long>(std::ceil(cfg.T / (cfg.dt_factor * l.h * l.h) - 1e-9)));
    run.dt = cfg.T / static_cast<double>(run.steps);
    EvolutionBackend b;
    b.kind = cfg.backend == "spectral" ? BackendKind::Spectral : BackendKind::ThetaScheme;
    b.theta = cfg.theta;
    b.dt = run.dt;
    b.dense_limit = cfg.dense_limit;
    const Evolver ev(assemble_mass(*l.space), assemble_stiffness(*l.space, l.coeff, l.order), b);

    std::vector<double> times(static_cast<std::size_t>(run.steps) + 1);
    for (std::size_t i = 0; i < times.size(); ++i) times[i] = static_cast<double>(i) * run.dt;
    times.back() = cfg.T;

    const SpatialNorms sn(l.space, 4);
    std::vector<double> Uq(sn.points().size());
    for (std::size_t k = 0; k < Uq.size(); ++k) Uq[k] = ms.U(sn.points()[k]);
    const Vec Ui = interpolate_nodal(l.space, ms.U).coeffs;
    double U_inf = Ui.cwiseAbs().maxCoeff();
    for (double v : Uq) U_inf = std::max(U_inf, std::abs(v));
    const Vec u0 = ms.s(0.0) * Ui;
    run.u0h_inf = sn.linf(u0);

    const std::size_t np = cfg.p_list.size(), nq = cfg.q_list.size();
    Vec PU;
    if (want_lpq) PU = l2_project(l.space, ms.U).coeffs;
    const long long thin = std::max<long long>(1, run.steps / 512);
    std::vector<double> sample_t;
    std::vector<std::vector<double>> sample_q(nq);

    std::vector<double> vals;
    ev.solve(u0, [&](double t) { return Vec(ms.s(t) * b0); }, times, [&](std::size_t i, double t, const Vec& u) {
        const double st = ms.s(t);
        double err = (st * Ui - u).cwiseAbs().maxCoeff();
        double mx = u.cwiseAbs().maxCoeff();
        sn.values(u, vals);
        for (std::size_t k = 0; k < vals.size(); ++k) {
            err = std::max(err, std::abs(st * Uq[k] - vals[k]));
            mx = std::max(mx, std::abs(vals[k]));
        }
        run.linf_error = std::max(run.linf_error, err);
        run.max_uh = std::max(run.max_uh, mx);
        run.u_inf = std::max(run.u_inf, std::abs(st) * U_inf);
        if (want_lpq && (static_cast<long long>(i) % thin == 0 || i + 1 == times.size())) {
            const Vec e = st * PU - u;
            sample_t.push_back(t);
            for (std::size_t iq = 0; iq < nq; ++iq) sample_q[iq].push_back(sn.lq(e, cfg.q_list[iq]));
        }
    });
    if (want_lpq) {
        run.lpq.resize(np * nq);
        for (std::size_t ip = 0; ip < np; ++ip)
            for (std::size_t iq = 0; iq < nq; ++iq)
                run.lpq[ip * nq + iq] = temporal_norm(sample_t, sample_q[iq], cfg.p_list[ip]);
    }
    return run;
}

// --- piecewise constant forcing in the eigenbasis

/// Sub-grid of one forcing piece [0, L]: 0, then geometric from
/// 0.01 / lambda_max to L so the initial layers of the fastest modes are resolved.
std::vector<double> piece_grid(double L, double lambda_max) {
    std::vector<double> s{0.0};
    double x = std::min(L, 0.01 / std::max(lambda_max, 1e-12));
    while (x < L) {
        s.push_back(x);
        x *= 1.1;
    }
    if (L - s.back() < 0.05 * (s.back() - s[s.size() - 2])) s.back() = L;
    else s.push_back(L);
    return s;
}

/// int |y|^p ds by the trapezoid rule (for p = inf the max).
double trapz_power(const std::vector<double>& s, const std::vector<double>& y, double p) {
    double acc = 0.0;
    if (std::isinf(p)) {
        for (double v : y) acc = std::max(acc, std::abs(v));
        return acc;
    }
    for (std::size_t j = 1; j < s.size(); ++j)
        acc += 0.5 * (s[j] - s[j - 1]) * (std::pow(std::abs(y[j]), p) + std::pow(std::abs(y[j - 1]), p));
    return acc;
}

double finish_power(double acc, double p) { return std::isinf(p) ? acc : std::pow(acc, 1.0 / p); }

void accumulate(double& acc, double piece, double p) { acc = std::isinf(p) ? std::max(acc, piece) : acc + piece; }

/// Coefficient columns alpha(s_j) = e^{-lambda s} alpha0 + phi1(lambda, s) beta.
DenseMatrix modal_columns(const Vec& lambda, const Vec& alpha0, const Vec& beta, const std::vector<double>& s) {
    DenseMatrix out(lambda.size(), static_cast<Eigen::Index>(s.size()));
    for (std::size_t j = 0; j < s.size(); ++j)
        for (Eigen::Index k = 0; k < lambda.size(); ++k) {
            const double ls = lambda[k] * s[j];
            const double phi1 = std::abs(ls) < 1e-12 ? s[j] : -std::expm1(-ls) / lambda[k];
            out(k, static_cast<Eigen::Index>(j)) = std::exp(-ls) * alpha0[k] + phi1 * beta[k];
        }
    return out;
}

// --- green diagnostics helpers

const char* const kGreenQuantities[] = {"dtF_L1", "t_dttF_L1", "w101", "scaled_w101", "K", "j_star", "schur_row_sum",
                                        "schur_tail", "schur_rate", "F0_L1", "gaussian", "decay_rate",
                                        "decay_constant", "mass_T"};

}  // namespace

// ---------------------------------------------------------------- experiments

ResultTable mesh_info(const ExperimentConfig& cfg) {
    const std::string ex = table_name(Experiment::MeshInfo);
    return over_levels(cfg, [&](int n) {
        ResultTable t;
        const auto mesh = level_mesh(cfg.domain, n);
        const auto space = build_space(mesh, cfg.degree);
        const auto q = mesh->quality();
        const double h = mesh->h();
        const long long dofs = space->num_dofs();
        const std::string meta = "n=" + std::to_string(n) + ";checksum=" + hex64(mesh->checksum());
        t.append(ex, h, dofs, "vertices", mesh->num_vertices(), meta);
        t.append(ex, h, dofs, "triangles", mesh->num_triangles(), meta);
        t.append(ex, h, dofs, "h_max", q.h_max, meta);
        t.append(ex, h, dofs, "h_min", q.h_min, meta);
        t.append(ex, h, dofs, "min_angle_deg", q.min_angle_deg, meta);
        t.append(ex, h, dofs, "max_angle_deg", q.max_angle_deg, meta);
        t.append(ex, h, dofs, "area", q.area, meta);
        t.append(ex, h, dofs, "l_h", log_factor(h), meta);
        return t;
    });
}

ResultTable convergence_study(const ExperimentConfig& cfg) {
    require_levels(cfg, 3, "convergence study");
    const std::string ex = table_name(Experiment::Convergence);
    std::vector<ManufacturedRun> runs(cfg.h_levels.size());
    parallel_for(cfg.jobs, runs.size(), [&](std::size_t i) { runs[i] = run_manufactured(cfg, cfg.h_levels[i], true); });

    ResultTable t;
    const std::size_t nq = cfg.q_list.size();
    std::vector<double> hs, err, err_lh;
    std::vector<std::vector<double>> lpq(cfg.p_list.size() * nq);
    for (const auto& r : runs) {
        const auto& l = r.level;
        const std::string meta = "n=" + std::to_string(l.n) + ";coefficient=" + cfg.coefficient;
        const double lh = log_factor(l.h);
        t.append(ex, l.h, l.dofs, "dt", r.dt, meta);
        t.append(ex, l.h, l.dofs, "steps", static_cast<double>(r.steps), meta);
        t.append(ex, l.h, l.dofs, "linf_error", r.linf_error, meta);
        t.append(ex, l.h, l.dofs, "linf_error_over_lh", r.linf_error / lh, meta);
        for (std::size_t ip = 0; ip < cfg.p_list.size(); ++ip)
            for (std::size_t iq = 0; iq < nq; ++iq) {
                const double v = r.lpq[ip * nq + iq];
                t.append(ex, l.h, l.dofs, "lp_lq_error_" + pq_tag(cfg.p_list[ip], cfg.q_list[iq]), v,
                         meta + ";norm=P_h u - u_h");
                lpq[ip * nq + iq].push_back(v);
            }
        hs.push_back(l.h);
        err.push_back(r.linf_error);
        err_lh.push_back(r.linf_error / lh);
    }
    t.append(ex, 0.0, 0, "slope_linf", loglog_slope(hs, err), "levels=" + std::to_string(hs.size()));
    t.append(ex, 0.0, 0, "slope_linf_over_lh", loglog_slope(hs, err_lh), "levels=" + std::to_string(hs.size()));
    for (std::size_t ip = 0; ip < cfg.p_list.size(); ++ip)
        for (std::size_t iq = 0; iq < nq; ++iq)
            t.append(ex, 0.0, 0, "slope_lp_lq_" + pq_tag(cfg.p_list[ip], cfg.q_list[iq]),
                     loglog_slope(hs, lpq[ip * nq + iq]), "levels=" + std::to_string(hs.size()));
    return t;
}

ResultTable stability_scan(const ExperimentConfig& cfg) {
    const std::string ex = table_name(Experiment::StabilityScan);
    ResultTable t = over_levels(cfg, [&](int n) {
        ResultTable out;
        const Level l = make_level(cfg, n);
        const auto ev = spectral_evolver(cfg, l);
        const auto times = log_time_grid(cfg.dt_factor * l.h * l.h, cfg.T, cfg.t_points);
        // the kernel L1 norm is an extra dense pass per time; kept to moderate sizes
        std::unique_ptr<SpatialNorms> l1;
        if (l.dofs <= 1200) l1 = std::make_unique<SpatialNorms>(l.space, 2);
        double sup = 0.0, sup_dt = 0.0, sup_sum = 0.0, sup_l1 = 0.0, t_sup = 0.0;
        for (std::size_t i = 0; i < times.size(); ++i) {
            const auto k = kernel_sums(*ev, l1.get(), times[i]);
            const std::string meta = "t=" + num(times[i]);
            out.append(ex, l.h, l.dofs, "norm_t" + std::to_string(i), k.norm, meta);
            out.append(ex, l.h, l.dofs, "dt_norm_t" + std::to_string(i), k.dt_norm, meta);
            if (k.norm > sup) {
                sup = k.norm;
                t_sup = times[i];
            }
            sup_dt = std::max(sup_dt, k.dt_norm);
            sup_sum = std::max(sup_sum, k.norm + k.dt_norm);
            sup_l1 = std::max(sup_l1, k.kernel_l1);
        }
        const std::string meta = "n=" + std::to_string(n) + ";t_points=" + std::to_string(times.size());
        out.append(ex, l.h, l.dofs, "sup_norm", sup, meta + ";t_sup=" + num(t_sup));
        out.append(ex, l.h, l.dofs, "sup_dt_norm", sup_dt, meta);
        out.append(ex, l.h, l.dofs, "sup_combined", sup_sum, meta);
        if (l1) out.append(ex, l.h, l.dofs, "sup_kernel_l1", sup_l1, meta);
        return out;
    });
    for (const char* q : {"sup_norm", "sup_combined"}) {
        const auto s = t.series(ex, q);
        double var = 0.0;
        for (std::size_t i = 1; i < s.size(); ++i) var = std::max(var, std::abs(s[i].second / s[i - 1].second - 1.0));
        t.append(ex, 0.0, 0, std::string(q) + "_max_consecutive_variation", var, "levels=" + std::to_string(s.size()));
    }
    return t;
}

ResultTable spacetime_stability(const ExperimentConfig& cfg) {
    const std::string ex = table_name(Experiment::SpacetimeStability);
    std::vector<ManufacturedRun> runs(cfg.h_levels.size());
    parallel_for(cfg.jobs, runs.size(), [&](std::size_t i) { runs[i] = run_manufactured(cfg, cfg.h_levels[i], false); });
    ResultTable t;
    std::vector<double> ratios, free_ratios;
    for (const auto& r : runs) {
        const auto& l = r.level;
        const double lh = log_factor(l.h);
        const double den = r.u0h_inf + lh * r.u_inf;
        const double den_free = r.u0h_inf + r.u_inf;
        const double ratio = den > 0.0 ? r.max_uh / den : 0.0;
        const double free = den_free > 0.0 ? r.max_uh / den_free : 0.0;
        const std::string meta = "n=" + std::to_string(l.n) + ";coefficient=" + cfg.coefficient;
        t.append(ex, l.h, l.dofs, "max_uh", r.max_uh, meta);
        t.append(ex, l.h, l.dofs, "u0h_inf", r.u0h_inf, meta);
        t.append(ex, l.h, l.dofs, "u_inf", r.u_inf, meta);
        t.append(ex, l.h, l.dofs, "l_h", lh, meta);
        t.append(ex, l.h, l.dofs, "ratio_lh", ratio, meta);
        t.append(ex, l.h, l.dofs, "ratio", free, meta);
        ratios.push_back(ratio);
        free_ratios.push_back(free);
    }
    t.append(ex, 0.0, 0, "ratio_lh_max_min", max_min_ratio(ratios), "levels=" + std::to_string(ratios.size()));
    t.append(ex, 0.0, 0, "ratio_max_min", max_min_ratio(free_ratios), "levels=" + std::to_string(ratios.size()));
    return t;
}

ResultTable maxreg_scan(const ExperimentConfig& cfg) {
    if (cfg.probes < 1) fail(ErrorKind::Config, "maxreg scan needs probes");
    const std::string ex = table_name(Experiment::MaxregScan);
    const std::size_t np = cfg.p_list.size(), nq = cfg.q_list.size();
    ResultTable t = over_levels(cfg, [&](int n) {
        ResultTable out;
        const Level l = make_level(cfg, n);
        const auto ev = spectral_evolver(cfg, l);
        const EigenPairs& e = ev->eigen();
        const SparseMatrix& m = ev->mass();
        const DenseMatrix& psi = e.psi;
        const SpatialNorms sn(l.space, 4);
        const SparseMatrix div = assemble_div_operator(*l.space);
        const int nt = l.mesh->num_triangles();
        const double L = cfg.T / cfg.time_pieces;
        const auto s = piece_grid(L, e.lambda[e.lambda.size() - 1]);

        // q-norms per column for the fields of one piece
        auto column_norms = [&](const DenseMatrix& cols, bool grad, std::vector<std::vector<double>>& out_q) {
            out_q.assign(nq + 1, std::vector<double>(static_cast<std::size_t>(cols.cols())));
            for (Eigen::Index j = 0; j < cols.cols(); ++j) {
                const Vec c = cols.col(j);
                for (std::size_t iq = 0; iq < nq; ++iq) {
                    double v = sn.lq(c, cfg.q_list[iq]);
                    if (grad) v += sn.grad_lq(c, cfg.q_list[iq]);
                    out_q[iq][j] = v;
                }
                out_q[nq][j] = sn.lq(c, 2.0);
            }
        };

        std::vector<double> ratio_f(np * nq, 0.0), ratio_g(np * nq, 0.0);
        double a_only = 0.0;
        std::vector<std::vector<double>> qa, qd;
        for (int probe = 0; probe < cfg.probes; ++probe) {
            // f-probe: u' + A_h u = f_h, nodal standard normal f_h per piece
            {
                auto rng = probe_stream(cfg, 1, n, probe);
                Vec alpha = Vec::Zero(e.lambda.size());
                std::vector<double> acc_d(np * nq, 0.0), acc_a(np * nq, 0.0), acc_f(np * nq, 0.0);
                double a2 = 0.0, f2 = 0.0;
                for (int piece = 0; piece < cfg.time_pieces; ++piece) {
                    const Vec fh = normal_vector(rng, l.dofs);
                    const Vec beta = psi.transpose() * (m * fh);
                    const DenseMatrix cols = modal_columns(e.lambda, alpha, beta, s);
                    const DenseMatrix au = psi * (e.lambda.asDiagonal() * cols);
                    const DenseMatrix du = fh.replicate(1, au.cols()) - au;
                    alpha = cols.col(cols.cols() - 1);
                    column_norms(au, false, qa);
                    column_norms(du, false, qd);
                    for (std::size_t ip = 0; ip < np; ++ip)
                        for (std::size_t iq = 0; iq < nq; ++iq) {
                            const double p = cfg.p_list[ip], q = cfg.q_list[iq];
                            accumulate(acc_a[ip * nq + iq], trapz_power(s, qa[iq], p), p);
                            accumulate(acc_d[ip * nq + iq], trapz_power(s, qd[iq], p), p);
                            const double fq = sn.lq(fh, q);
                            accumulate(acc_f[ip * nq + iq], std::isinf(p) ? fq : L * std::pow(fq, p), p);
                        }
                    a2 += trapz_power(s, qa[nq], 2.0);
                    f2 += L * std::pow(sn.lq(fh, 2.0), 2.0);
                }
                for (std::size_t k = 0; k < np * nq; ++k) {
                    const double p = cfg.p_list[k / nq];
                    const double den = finish_power(acc_f[k], p);
                    if (den > 0.0)
                        ratio_f[k] = std::max(ratio_f[k], (finish_power(acc_d[k], p) + finish_power(acc_a[k], p)) / den);
                }
                if (f2 > 0.0) a_only = std::max(a_only, std::sqrt(a2 / f2));
            }
            // g-probe: u' + A_h u = div_h g, elementwise standard normal g per piece
            {
                auto rng = probe_stream(cfg, 2, n, probe);
                Vec alpha = Vec::Zero(e.lambda.size());
                std::vector<double> acc_u(np * nq, 0.0), acc_g(np * nq, 0.0);
                for (int piece = 0; piece < cfg.time_pieces; ++piece) {
                    const Vec g = normal_vector(rng, 2 * nt);
                    const Vec beta = psi.transpose() * (div * g);
                    const DenseMatrix cols = modal_columns(e.lambda, alpha, beta, s);
                    const DenseMatrix u = psi * cols;
                    alpha = cols.col(cols.cols() - 1);
                    column_norms(u, true, qa);
                    for (std::size_t iq = 0; iq < nq; ++iq) {
                        const double q = cfg.q_list[iq];
                        double gq = 0.0;
                        for (int tri = 0; tri < nt; ++tri) {
                            const double mag = std::hypot(g[2 * tri], g[2 * tri + 1]);
                            gq = std::isinf(q) ? std::max(gq, mag) : gq + l.mesh->area(tri) * std::pow(mag, q);
                        }
                        if (!std::isinf(q)) gq = std::pow(gq, 1.0 / q);
                        for (std::size_t ip = 0; ip < np; ++ip) {
                            const double p = cfg.p_list[ip];
                            accumulate(acc_u[ip * nq + iq], trapz_power(s, qa[iq], p), p);
                            accumulate(acc_g[ip * nq + iq], std::isinf(p) ? gq : L * std::pow(gq, p), p);
                        }
                    }
                }
                for (std::size_t k = 0; k < np * nq; ++k) {
                    const double p = cfg.p_list[k / nq];
                    const double den = finish_power(acc_g[k], p);
                    if (den > 0.0) ratio_g[k] = std::max(ratio_g[k], finish_power(acc_u[k], p) / den);
                }
            }
        }
        const std::string meta = "n=" + std::to_string(n) + ";probes=" + std::to_string(cfg.probes) +
                                 ";pieces=" + std::to_string(cfg.time_pieces) + ";lower_bound";
        for (std::size_t k = 0; k < np * nq; ++k) {
            const std::string tag = pq_tag(cfg.p_list[k / nq], cfg.q_list[k % nq]);
            out.append(ex, l.h, l.dofs, "maxreg_" + tag, ratio_f[k], meta);
            out.append(ex, l.h, l.dofs, "grad_" + tag, ratio_g[k], meta);
        }
        out.append(ex, l.h, l.dofs, "A_ratio_p2_q2", a_only, meta);
        return out;
    });
    std::vector<double> a;
    for (const auto& [h, v] : t.series(ex, "A_ratio_p2_q2")) a.push_back(v);
    t.append(ex, 0.0, 0, "A_ratio_p2_q2_max", a.empty() ? 0.0 : *std::max_element(a.begin(), a.end()),
             "levels=" + std::to_string(a.size()));
    for (std::size_t k = 0; k < np * nq; ++k) {
        const std::string tag = pq_tag(cfg.p_list[k / nq], cfg.q_list[k % nq]);
        for (const std::string kind : {"maxreg_", "grad_"}) {
            std::vector<double> v;
            for (const auto& [h, x] : t.series(ex, kind + tag)) v.push_back(x);
            t.append(ex, 0.0, 0, kind + tag + "_max_min", max_min_ratio(v), "levels=" + std::to_string(v.size()));
        }
    }
    return t;
}

ResultTable maximal_semigroup_scan(const ExperimentConfig& cfg) {
    std::vector<double> qs;
    for (double q : cfg.q_list) {
        if (q <= 1.0) fail(ErrorKind::Config, "semigroup scan needs q > 1");
        qs.push_back(q);
    }
    if (std::none_of(qs.begin(), qs.end(), [](double q) { return std::isinf(q); })) qs.push_back(INFINITY);
    const std::string ex = table_name(Experiment::SemigroupScan);
    ResultTable t = over_levels(cfg, [&](int n) {
        ResultTable out;
        const Level l = make_level(cfg, n);
        const auto ev = spectral_evolver(cfg, l);
        const EigenPairs& e = ev->eigen();
        const SparseMatrix& m = ev->mass();
        const SpatialNorms sn(l.space, 4);
        const auto times = log_time_grid(cfg.dt_factor * l.h * l.h, cfg.T, cfg.t_points);

        // pointwise sup over the time grid at dofs and quadrature points
        std::vector<double> vals;
        auto sup_ratios = [&](const Vec& v) {
            const Vec alpha = e.psi.transpose() * (m * v);
            DenseMatrix cols(alpha.size(), static_cast<Eigen::Index>(times.size()));
            for (std::size_t j = 0; j < times.size(); ++j)
                cols.col(static_cast<Eigen::Index>(j)) = (-e.lambda * times[j]).array().exp() * alpha.array();
            const DenseMatrix u = e.psi * cols;
            Vec sup_dof = Vec::Zero(l.dofs);
            std::vector<double> sup_q(sn.points().size(), 0.0);
            for (Eigen::Index j = 0; j < u.cols(); ++j) {
                sup_dof = sup_dof.cwiseMax(u.col(j).cwiseAbs());
                sn.values(u.col(j), vals);
                for (std::size_t k = 0; k < vals.size(); ++k) sup_q[k] = std::max(sup_q[k], std::abs(vals[k]));
            }
            std::vector<double> r(qs.size());
            for (std::size_t iq = 0; iq < qs.size(); ++iq) {
                double top = sn.sample_lq(sup_q, qs[iq]);
                if (std::isinf(qs[iq])) top = std::max(top, sup_dof.maxCoeff());
                const double bottom = sn.lq(v, qs[iq]);
                r[iq] = bottom > 0.0 ? top / bottom : 0.0;
            }
            return r;
        };

        std::vector<double> best(qs.size(), 0.0);
        for (int probe = 0; probe < cfg.probes; ++probe) {
            auto rng = probe_stream(cfg, 3, n, probe);
            const auto r = sup_ratios(normal_vector(rng, l.dofs));
            for (std::size_t iq = 0; iq < qs.size(); ++iq) best[iq] = std::max(best[iq], r[iq]);
        }
        const std::string meta = "n=" + std::to_string(n) + ";probes=" + std::to_string(cfg.probes) +
                                 ";t_points=" + std::to_string(times.size());
        for (std::size_t iq = 0; iq < qs.size(); ++iq)
            out.append(ex, l.h, l.dofs, "random_q" + num(qs[iq]), best[iq], meta + ";lower_bound");

        // the L-infinity extremal probe: sign of the maximizing kernel row
        double top = -1.0, t_top = 0.0;
        Vec extremal;
        for (double tt : times) {
            auto k = kernel_sums(*ev, nullptr, tt);
            if (k.norm > top) {
                top = k.norm;
                t_top = tt;
                extremal = std::move(k.extremal);
            }
        }
        const auto r = sup_ratios(extremal);
        for (std::size_t iq = 0; iq < qs.size(); ++iq) {
            const double v = std::max(best[iq], r[iq]);
            out.append(ex, l.h, l.dofs, "ratio_q" + num(qs[iq]), v, meta + ";with_extremal_probe");
        }
        out.append(ex, l.h, l.dofs, "extremal_ratio_qinf", r.back(), meta + ";t_extremal=" + num(t_top));
        out.append(ex, l.h, l.dofs, "operator_norm_sup", top, meta);
        return out;
    });
    for (double q : qs) {
        std::vector<double> v;
        for (const auto& [h, x] : t.series(ex, "ratio_q" + num(q))) v.push_back(x);
        t.append(ex, 0.0, 0, "ratio_q" + num(q) + "_max_min", max_min_ratio(v), "levels=" + std::to_string(v.size()));
    }
    return t;
}

ResultTable green_diagnostics(const ExperimentConfig& cfg) {
    const std::string ex = table_name(Experiment::GreenDiagnostics);
    int refinements = 0;
    while ((1 << refinements) < cfg.rho_ref) ++refinements;
    for (int n : cfg.h_levels) {
        const double h = level_mesh(cfg.domain, n)->h();
        if (!(cfg.c_star * h < 0.25))
            fail(ErrorKind::MeshTooCoarse, "level n=" + std::to_string(n) + " has C_star * h = " +
                                               num(cfg.c_star * h) + " >= 1/4; lower experiment.C_star or refine");
    }
    ResultTable t = over_levels(cfg, [&](int n) {
        ResultTable out;
        const Level l = make_level(cfg, n);
        MeshPtr fine_mesh = l.mesh;
        for (int r = 0; r < refinements; ++r) fine_mesh = refine_uniform(*fine_mesh);
        const auto coarse_ev = spectral_evolver(cfg, l);
        std::unique_ptr<Evolver> fine_owned;
        SpacePtr fine_space = l.space;
        const Evolver* fine_ev = coarse_ev.get();
        const double dt = cfg.dt_factor * l.h * l.h;
        if (refinements > 0) {
            fine_space = build_space(fine_mesh, cfg.degree);
            EvolutionBackend fb;
            fb.kind = BackendKind::ThetaScheme;
            fb.theta = cfg.theta;
            fb.dt = dt / (cfg.rho_ref * cfg.rho_ref);
            fb.startup_steps = 2;
            fb.graded_kappa = 0.1;
            fine_owned = std::make_unique<Evolver>(assemble_mass(*fine_space),
                                                   assemble_stiffness(*fine_space, l.coeff, l.order), fb);
            fine_ev = fine_owned.get();
        }
        const SampleGrid grid(l.space, fine_space, 2);
        const auto times = graded_time_grid(dt, 0.1, 0.05, 3.0 * cfg.T, {cfg.T});
        DiagnosticsOptions opts;
        opts.T = cfg.T;
        opts.c_star = cfg.c_star;
        opts.c0 = std::max(l.coeff.c0, 1e-3);
        for (std::size_t si = 0; si < cfg.sources.size(); ++si) {
            const Point2 x0 = centroid_source(*l.space, cfg.sources[si]);
            const auto d = diagnose_source(grid, *coarse_ev, *fine_ev, x0, times, opts);
            const std::string sfx = "_s" + std::to_string(si);
            const std::string meta = "n=" + std::to_string(n) + ";x0=" + num(x0.x1) + " " + num(x0.x2) +
                                     ";rho_ref=" + std::to_string(cfg.rho_ref) + ";C_star=" + num(cfg.c_star);
            const double vals[] = {d.lemma.dtF_L1, d.lemma.t_dttF_L1, d.lemma.w101, d.lemma.scaled_w101,
                                   d.K.curlyK, static_cast<double>(d.j_star), d.schur.row_sum, d.schur.tail,
                                   d.schur.rate, d.F0_L1, d.gaussian, d.decay.rate, d.decay.constant, d.mass_T};
            for (std::size_t k = 0; k < std::size(vals); ++k)
                out.append(ex, l.h, l.dofs, kGreenQuantities[k] + sfx, vals[k], meta);
        }
        return out;
    });
    for (std::size_t si = 0; si < cfg.sources.size(); ++si)
        for (const char* q : {"dtF_L1", "scaled_w101", "K", "schur_row_sum"}) {
            const std::string name = q + ("_s" + std::to_string(si));
            std::vector<double> v;
            for (const auto& [h, x] : t.series(ex, name)) v.push_back(x);
            t.append(ex, 0.0, 0, name + "_max_min", max_min_ratio(v), "levels=" + std::to_string(v.size()));
        }
    return t;
}

ResultTable run_experiment(Experiment e, const ExperimentConfig& cfg) {
    switch (e) {
        case Experiment::MeshInfo: return mesh_info(cfg);
        case Experiment::Convergence: return convergence_study(cfg);
        case Experiment::StabilityScan: return stability_scan(cfg);
        case Experiment::SpacetimeStability: return spacetime_stability(cfg);
        case Experiment::MaxregScan: return maxreg_scan(cfg);
        case Experiment::SemigroupScan: return maximal_semigroup_scan(cfg);
        case Experiment::GreenDiagnostics: return green_diagnostics(cfg);
    }
    fail(ErrorKind::InvalidArgument, "unknown experiment");
}

// ---------------------------------------------------------------- checks

namespace {

void check_summary(std::vector<CheckResult>& out, const ResultTable& t, const std::string& ex, const std::string& q,
                   double lo, double hi) {
    const auto v = t.find(ex, 0.0, q);
    CheckResult c;
    c.name = q;
    if (!v) {
        c.detail = "missing";
    } else {
        c.pass = *v >= lo && *v <= hi && std::isfinite(*v);
        c.detail = num(*v) + " in [" + num(lo) + ", " + num(hi) + "]";
    }
    out.push_back(std::move(c));
}

}  // namespace

std::vector<CheckResult> check_results(Experiment e, const ResultTable& t, const ExperimentConfig& cfg) {
    std::vector<CheckResult> out;
    const std::string ex = table_name(e);
    const std::size_t np = cfg.p_list.size(), nq = cfg.q_list.size();
    switch (e) {
        case Experiment::MeshInfo:
            for (const auto& [h, a] : t.series(ex, "min_angle_deg"))
                out.push_back({"min_angle_h" + num(h), a > 0.0, num(a) + " deg"});
            break;
        case Experiment::Convergence:
            if (cfg.manufactured == Manufactured::Cosine) {
                check_summary(out, t, ex, "slope_linf", 1.8, 2.3);
            } else if (cfg.manufactured == Manufactured::Constant) {
                // in the discrete space in x, so only the O(dt) error of the time integration remains
                const auto dt = t.series(ex, "dt");
                const auto err = t.series(ex, "linf_error");
                for (std::size_t i = 0; i < err.size() && i < dt.size(); ++i)
                    out.push_back({"time_error_h" + num(err[i].first), err[i].second <= dt[i].second,
                                   num(err[i].second) + " <= dt = " + num(dt[i].second)});
            } else {
                for (const auto& [h, v] : t.series(ex, "linf_error"))
                    out.push_back({"exact_h" + num(h), v <= 1e-9, num(v)});
            }
            break;
        case Experiment::StabilityScan:
            check_summary(out, t, ex, "sup_norm_max_consecutive_variation", 0.0, 0.25);
            break;
        case Experiment::SpacetimeStability:
            check_summary(out, t, ex, "ratio_lh_max_min", 1.0, 2.0);
            break;
        case Experiment::MaxregScan:
            check_summary(out, t, ex, "A_ratio_p2_q2_max", 0.0, 1.05);
            for (std::size_t k = 0; k < np * nq; ++k) {
                const std::string tag = pq_tag(cfg.p_list[k / nq], cfg.q_list[k % nq]);
                check_summary(out, t, ex, "maxreg_" + tag + "_max_min", 1.0, 2.0);
                check_summary(out, t, ex, "grad_" + tag + "_max_min", 1.0, 2.0);
            }
            break;
        case Experiment::SemigroupScan:
            for (const auto& r : t.rows())
                if (r.h == 0.0) check_summary(out, t, ex, r.quantity, 1.0, 2.0);
            break;
        case Experiment::GreenDiagnostics:
            for (const auto& r : t.rows())
                if (r.h == 0.0) check_summary(out, t, ex, r.quantity, 1.0, 2.0);
            break;
    }
    return out;
}

// ---------------------------------------------------------------- persistence

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_run(const std::filesystem::path& dir, Experiment e, const ConfigStore& store, const ResultTable& table,
               const std::string& started, const std::string& finished) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) fail(ErrorKind::Io, "cannot create output directory " + dir.string() + ": " + ec.message());
    {
        std::ofstream csv(dir / "results.csv");
        if (!csv) fail(ErrorKind::Io, "cannot write " + (dir / "results.csv").string());
        table.write_csv(csv);
    }
    nlohmann::ordered_json j;
    j["experiment"] = to_string(e);
    j["version"] = version_string();
    j["seed"] = build_config(store).seed;
    j["started"] = started;
    j["finished"] = finished;
    j["rows"] = table.size();
    j["results"] = "results.csv";
    nlohmann::ordered_json c = nlohmann::ordered_json::object();
    for (const auto& [k, v] : store.values()) c[k] = v;
    j["config"] = c;
    std::ofstream man(dir / "manifest.json");
    if (!man) fail(ErrorKind::Io, "cannot write " + (dir / "manifest.json").string());
    man << j.dump(2) << '\n';
}

}  // namespace lipfem
