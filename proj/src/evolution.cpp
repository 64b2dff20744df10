#include "lipfem/evolution.hpp"

#include <lapacke.h>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <sstream>

#include "lipfem/assembly.hpp"
#include "lipfem/error.hpp"
#include "lipfem/text.hpp"

namespace lipfem {

const char* to_string(BackendKind kind) noexcept {
    return kind == BackendKind::Spectral ? "spectral" : "theta_scheme";
}

BackendKind backend_kind_from_string(const std::string& name) {
    if (name == "spectral") return BackendKind::Spectral;
    if (name == "theta_scheme" || name == "theta") return BackendKind::ThetaScheme;
    fail(ErrorKind::InvalidArgument, "unknown backend '" + name + "'");
}

void validate_backend(const EvolutionBackend& b) {
    if (b.kind == BackendKind::ThetaScheme) {
        if (!(b.theta >= 0.5 && b.theta <= 1.0))
            fail(ErrorKind::InvalidArgument, "theta must lie in [0.5, 1], got " + format_double(b.theta));
        if (!(b.dt > 0.0) || !std::isfinite(b.dt))
            fail(ErrorKind::InvalidArgument, "theta scheme needs a positive time step");
    }
    if (b.dense_limit < 1) fail(ErrorKind::InvalidArgument, "dense_limit must be positive");
    if (b.startup_steps < 0) fail(ErrorKind::InvalidArgument, "startup_steps must be non-negative");
    if (b.graded_kappa < 0.0) fail(ErrorKind::InvalidArgument, "graded_kappa must be non-negative");
}

EigenPairs spectral_decompose(const SparseMatrix& m, const SparseMatrix& k, int dense_limit) {
    const auto n = m.rows();
    if (m.cols() != n || k.rows() != n || k.cols() != n)
        fail(ErrorKind::InvalidArgument, "mass and stiffness sizes differ");
    if (n > dense_limit)
        fail(ErrorKind::InvalidArgument, "spectral backend limited to " + std::to_string(dense_limit) + " dofs, got " +
                                             std::to_string(n));
    DenseMatrix a = to_dense(k);
    DenseMatrix b = to_dense(m);
    Vec w(n);
    const lapack_int info = LAPACKE_dsygvd(LAPACK_COL_MAJOR, 1, 'V', 'U', static_cast<lapack_int>(n), a.data(),
                                           static_cast<lapack_int>(n), b.data(), static_cast<lapack_int>(n), w.data());
    if (info != 0) fail(ErrorKind::Solver, "generalized eigensolver failed (info " + std::to_string(info) + ")");
    return {std::move(w), std::move(a)};
}

double eigen_residual(const SparseMatrix& m, const SparseMatrix& k, const EigenPairs& pairs) {
    const DenseMatrix kp = k * pairs.psi;
    const DenseMatrix mp = m * pairs.psi;
    double worst = 0.0;
    for (Eigen::Index j = 0; j < pairs.psi.cols(); ++j) {
        const double r = (kp.col(j) - pairs.lambda[j] * mp.col(j)).norm() / std::max(1.0, std::abs(pairs.lambda[j]));
        worst = std::max(worst, r);
    }
    return worst;
}

void check_trajectory(const Trajectory& traj) {
    if (traj.times.size() != traj.snapshots.size())
        fail(ErrorKind::InvalidArgument, "trajectory has " + std::to_string(traj.times.size()) + " times but " +
                                             std::to_string(traj.snapshots.size()) + " snapshots");
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        if (!std::isfinite(traj.times[i]) || (i > 0 && !(traj.times[i] > traj.times[i - 1])))
            fail(ErrorKind::InvalidArgument, "trajectory times must increase strictly (index " + std::to_string(i) + ")");
        if (traj.space && traj.snapshots[i].size() != traj.space->num_dofs())
            fail(ErrorKind::InvalidArgument, "snapshot " + std::to_string(i) + " has the wrong length");
        if (!traj.snapshots[i].allFinite())
            fail(ErrorKind::InvalidArgument, "snapshot " + std::to_string(i) + " has non-finite values");
    }
}

Evolver::Evolver(SparseMatrix m, SparseMatrix k, EvolutionBackend backend)
    : m_(std::move(m)), k_(std::move(k)), backend_(backend) {
    validate_backend(backend_);
    if (m_.rows() != k_.rows() || m_.rows() != m_.cols() || k_.rows() != k_.cols())
        fail(ErrorKind::InvalidArgument, "mass and stiffness sizes differ");
    if (backend_.kind == BackendKind::Spectral && m_.rows() > backend_.dense_limit)
        fail(ErrorKind::InvalidArgument, "spectral backend limited to " + std::to_string(backend_.dense_limit) +
                                             " dofs, got " + std::to_string(m_.rows()));
}

Evolver::~Evolver() = default;

const SpdSolver& Evolver::mass_solver() const {
    std::lock_guard lock(mutex_);
    if (!mass_solver_) mass_solver_ = std::make_unique<SpdSolver>(m_);
    return *mass_solver_;
}

const EigenPairs& Evolver::eigen() const {
    if (backend_.kind != BackendKind::Spectral) fail(ErrorKind::InvalidArgument, "eigenpairs need the spectral backend");
    std::lock_guard lock(mutex_);
    if (!eigen_) eigen_ = std::make_unique<EigenPairs>(spectral_decompose(m_, k_, backend_.dense_limit));
    return *eigen_;
}

std::shared_ptr<const SpdSolver> Evolver::step_solver(double tau, double theta, bool keep) const {
    const auto key = std::make_pair(tau, theta);
    {
        std::lock_guard lock(mutex_);
        if (auto it = factors_.find(key); it != factors_.end()) return it->second;
    }
    const SparseMatrix a = m_ + (theta * tau) * k_;
    auto solver = std::make_shared<const SpdSolver>(a);
    if (keep) {
        std::lock_guard lock(mutex_);
        factors_.emplace(key, solver);
    }
    return solver;
}

void Evolver::theta_step(Vec& u, double t, double tau, double theta, bool keep, const LoadFunction* load,
                         Vec& b_now) const {
    Vec rhs = m_ * u;
    if (theta < 1.0) rhs -= ((1.0 - theta) * tau) * (k_ * u);
    if (load) {
        Vec b_next = (*load)(t + tau);
        rhs += tau * (theta * b_next + (1.0 - theta) * b_now);
        b_now = std::move(b_next);
    }
    u = step_solver(tau, theta, keep)->solve(rhs);
    ++steps_;
}

void Evolver::theta_advance(Vec& u, double t0, double t1, const LoadFunction* load, Vec& b_now,
                            long long& step_index) const {
    const double dt = backend_.dt;
    const double slack = 1e-9 * dt;
    double t = t0;
    while (t1 - t > slack) {
        double regular = dt;
        if (backend_.graded_kappa > 0.0 && t > 0.0) {
            const double target = backend_.graded_kappa * t;
            if (target > dt) regular = std::ldexp(dt, static_cast<int>(std::floor(std::log2(target / dt))));
        }
        double tau = std::min(regular, t1 - t);
        if (t1 - t - tau <= slack) tau = t1 - t;
        // steps of dt * 2^k recur (snapped against rounding), anything else is a one-off remainder
        const double pow2 = std::ldexp(dt, static_cast<int>(std::lround(std::log2(tau / dt))));
        const bool keep = std::abs(tau - pow2) <= 1e-9 * pow2;
        if (keep) tau = pow2;
        if (step_index < backend_.startup_steps) {
            theta_step(u, t, 0.5 * tau, 1.0, keep, load, b_now);
            theta_step(u, t + 0.5 * tau, 0.5 * tau, 1.0, keep, load, b_now);
        } else {
            theta_step(u, t, tau, backend_.theta, keep, load, b_now);
        }
        ++step_index;
        t = (t1 - (t + tau) <= slack) ? t1 : t + tau;
    }
}

namespace {

void check_times(const std::vector<double>& times) {
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!std::isfinite(times[i]) || times[i] < 0.0)
            fail(ErrorKind::InvalidArgument, "output times must be finite and non-negative");
        if (i > 0 && times[i] < times[i - 1]) fail(ErrorKind::InvalidArgument, "output times must be sorted");
    }
}

// (1 - e^{-lambda tau}) / lambda
double phi1(double lambda, double tau) {
    const double x = lambda * tau;
    if (std::abs(x) < 1e-12) return tau;
    return -std::expm1(-x) / lambda;
}

}  // namespace

void Evolver::propagate(const Vec& v0, const std::vector<double>& times, const SnapshotSink& sink) const {
    check_times(times);
    if (v0.size() != m_.rows()) fail(ErrorKind::InvalidArgument, "initial vector has the wrong length");
    if (backend_.kind == BackendKind::Spectral) {
        const EigenPairs& e = eigen();
        const Vec alpha = e.psi.transpose() * (m_ * v0);
        for (std::size_t i = 0; i < times.size(); ++i) {
            if (times[i] == 0.0) {
                sink(i, 0.0, v0);
                continue;
            }
            const Vec decayed = alpha.cwiseProduct((-times[i] * e.lambda).array().exp().matrix());
            sink(i, times[i], e.psi * decayed);
        }
        return;
    }
    Vec u = v0;
    Vec b_unused;
    double t = 0.0;
    long long step_index = 0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        theta_advance(u, t, times[i], nullptr, b_unused, step_index);
        t = times[i];
        sink(i, t, u);
    }
}

Vec Evolver::apply(const Vec& v, double t) const {
    Vec out;
    propagate(v, {t}, [&](std::size_t, double, const Vec& u) { out = u; });
    return out;
}

void Evolver::solve(const Vec& u0, const LoadFunction& load, const std::vector<double>& times,
                    const SnapshotSink& sink) const {
    check_times(times);
    if (u0.size() != m_.rows()) fail(ErrorKind::InvalidArgument, "initial vector has the wrong length");
    if (backend_.kind == BackendKind::Spectral) {
        const EigenPairs& e = eigen();
        Vec alpha = e.psi.transpose() * (m_ * u0);
        double t = 0.0;
        for (std::size_t i = 0; i < times.size(); ++i) {
            const double span = times[i] - t;
            if (span > 0.0) {
                const int pieces =
                    backend_.dt > 0.0 ? std::max(1, static_cast<int>(std::ceil(span / backend_.dt - 1e-9))) : 1;
                const double tau = span / pieces;
                for (int p = 0; p < pieces; ++p) {
                    const double s = t + p * tau;
                    const Vec beta = e.psi.transpose() * load(s + 0.5 * tau);
                    for (Eigen::Index k = 0; k < alpha.size(); ++k)
                        alpha[k] = std::exp(-e.lambda[k] * tau) * alpha[k] + phi1(e.lambda[k], tau) * beta[k];
                }
                t = times[i];
            }
            sink(i, times[i], times[i] == 0.0 ? u0 : Vec(e.psi * alpha));
        }
        return;
    }
    Vec u = u0;
    Vec b_now = load(0.0);
    double t = 0.0;
    long long step_index = 0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        theta_advance(u, t, times[i], &load, b_now, step_index);
        t = times[i];
        sink(i, t, u);
    }
}

Trajectory record_trajectory(const SpacePtr& space, const Evolver& evolver, const Vec& u0,
                             const std::vector<double>& times) {
    Trajectory traj{space, times, {}};
    traj.snapshots.reserve(times.size());
    evolver.propagate(u0, times, [&](std::size_t, double, const Vec& u) { traj.snapshots.push_back(u); });
    return traj;
}

Vec semigroup_apply(const Evolver& evolver, const Vec& v, double t) {
    if (!(t >= 0.0)) fail(ErrorKind::InvalidArgument, "semigroup time must be non-negative");
    return evolver.apply(v, t);
}

Trajectory solve_inhomogeneous(const SpacePtr& space, const Evolver& evolver, const Vec& u0, const LoadFunction& load,
                               const std::vector<double>& times) {
    Trajectory traj{space, times, {}};
    traj.snapshots.reserve(times.size());
    evolver.solve(u0, load, times, [&](std::size_t, double, const Vec& u) { traj.snapshots.push_back(u); });
    return traj;
}

LoadFunction make_load(const SpacePtr& space, SpaceTimeScalar f, SpaceTimeVector g, int quad_order) {
    auto assembler = std::make_shared<LoadAssembler>(space, quad_order);
    return [assembler, f = std::move(f), g = std::move(g)](double t) {
        Vec b = Vec::Zero(assembler->space().num_dofs());
        if (f) b += assembler->load([&](Point2 p) { return f(p, t); });
        if (g) b += assembler->div_load([&](Point2 p) { return g(p, t); });
        return b;
    };
}

Vec apply_Ah(const SpdSolver& mass, const SparseMatrix& k, const Vec& v) {
    if (v.size() != k.cols()) fail(ErrorKind::InvalidArgument, "vector has the wrong length");
    return mass.solve(Vec(k * v));
}

void write_trajectory(const std::filesystem::path& dir, const Trajectory& traj, const EvolutionBackend& backend,
                      int thinning, const std::string& annotation) {
    if (thinning < 1) fail(ErrorKind::InvalidArgument, "thinning factor must be at least 1");
    if (!traj.space) fail(ErrorKind::InvalidArgument, "trajectory has no space");
    check_trajectory(traj);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) fail(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
    nlohmann::json manifest;
    manifest["mesh_checksum"] = hex64(traj.space->mesh().checksum());
    manifest["degree"] = traj.space->degree();
    manifest["dofs"] = traj.space->num_dofs();
    manifest["backend"] = {{"kind", to_string(backend.kind)},
                           {"theta", backend.theta},
                           {"dt", backend.dt},
                           {"dense_limit", backend.dense_limit}};
    manifest["thinning"] = thinning;
    if (!annotation.empty()) manifest["annotation"] = annotation;
    nlohmann::json times = nlohmann::json::array();
    nlohmann::json files = nlohmann::json::array();
    const std::size_t n = traj.times.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (i % thinning != 0 && i + 1 != n) continue;
        std::ostringstream name;
        name << "snapshot_" << std::setw(5) << std::setfill('0') << i << ".txt";
        std::ofstream out(dir / name.str());
        if (!out) fail(ErrorKind::Io, "cannot write " + (dir / name.str()).string());
        write_snapshot(out, *traj.space, traj.snapshots[i]);
        times.push_back(traj.times[i]);
        files.push_back(name.str());
    }
    manifest["times"] = std::move(times);
    manifest["files"] = std::move(files);
    std::ofstream out(dir / "manifest.json");
    if (!out) fail(ErrorKind::Io, "cannot write manifest in " + dir.string());
    out << manifest.dump(2) << '\n';
}

Trajectory read_trajectory(const std::filesystem::path& dir, const SpacePtr& space) {
    std::ifstream in(dir / "manifest.json");
    if (!in) fail(ErrorKind::Io, "missing manifest in " + dir.string());
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Io, std::string("bad trajectory manifest: ") + e.what());
    }
    if (manifest.value("mesh_checksum", std::string{}) != hex64(space->mesh().checksum()))
        fail(ErrorKind::GridMismatch, "trajectory was written for a different mesh");
    Trajectory traj{space, {}, {}};
    const auto& files = manifest.at("files");
    const auto& times = manifest.at("times");
    if (files.size() != times.size()) fail(ErrorKind::Io, "manifest lists mismatched times and files");
    for (std::size_t i = 0; i < files.size(); ++i) {
        std::ifstream snap(dir / files[i].get<std::string>());
        if (!snap) fail(ErrorKind::Io, "missing snapshot " + files[i].get<std::string>());
        traj.times.push_back(times[i].get<double>());
        traj.snapshots.push_back(read_snapshot(snap, *space));
    }
    check_trajectory(traj);
    return traj;
}

}  // namespace lipfem
