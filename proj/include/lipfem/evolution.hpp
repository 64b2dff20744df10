#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "lipfem/fespace.hpp"
#include "lipfem/linalg.hpp"

namespace lipfem {

enum class BackendKind { Spectral, ThetaScheme };

const char* to_string(BackendKind kind) noexcept;
BackendKind backend_kind_from_string(const std::string& name);

struct EvolutionBackend {
    BackendKind kind = BackendKind::ThetaScheme;
    double theta = 0.5;
    double dt = 0.0;          // theta scheme step; must be set before use
    int dense_limit = 5000;   // spectral dof cap
    // Number of initial steps replaced by two backward Euler half steps
    // (damps the Crank-Nicolson response to rough initial data).
    int startup_steps = 0;
    // When positive, steps grow geometrically with t: dt * 2^k <= kappa * t.
    double graded_kappa = 0.0;
};

/// Throws InvalidArgument for theta outside [1/2, 1] or a missing step.
void validate_backend(const EvolutionBackend& backend);

/// Solution of K psi = lambda M psi with M-orthonormal columns, ascending lambda.
struct EigenPairs {
    Vec lambda;
    DenseMatrix psi;
};

EigenPairs spectral_decompose(const SparseMatrix& m, const SparseMatrix& k, int dense_limit);
/// max_k ||K psi_k - lambda_k M psi_k|| / max(1, |lambda_k|)
double eigen_residual(const SparseMatrix& m, const SparseMatrix& k, const EigenPairs& pairs);

struct Trajectory {
    SpacePtr space;
    std::vector<double> times;
    std::vector<Vec> snapshots;
};

/// Throws InvalidArgument unless times increase strictly, counts match and values are finite.
void check_trajectory(const Trajectory& traj);

/// Called once per output time, in order. `u` is only valid during the call.
using SnapshotSink = std::function<void(std::size_t index, double t, const Vec& u)>;
/// Load vector b(t) of the semi-discrete system M u' + K u = b.
using LoadFunction = std::function<Vec(double t)>;

/// Time integrator for M u' + K u = b. Factorizations are computed lazily and
/// cached; an Evolver may be shared between threads.
class Evolver {
public:
    Evolver(SparseMatrix m, SparseMatrix k, EvolutionBackend backend);
    ~Evolver();

    const EvolutionBackend& backend() const { return backend_; }
    const SparseMatrix& mass() const { return m_; }
    const SparseMatrix& stiffness() const { return k_; }
    const SpdSolver& mass_solver() const;
    /// Spectral backend only.
    const EigenPairs& eigen() const;

    /// Homogeneous flow from v0 at t = 0 through `times` (non-decreasing, >= 0).
    void propagate(const Vec& v0, const std::vector<double>& times, const SnapshotSink& sink) const;
    Vec apply(const Vec& v, double t) const;

    /// Inhomogeneous flow; spectral uses the exponential integrator with the
    /// load at interval midpoints, exact for piecewise constant loads whose
    /// breakpoints are output times.
    void solve(const Vec& u0, const LoadFunction& load, const std::vector<double>& times,
               const SnapshotSink& sink) const;

    /// Number of linear solves performed so far (theta scheme).
    long long steps_taken() const { return steps_; }

private:
    std::shared_ptr<const SpdSolver> step_solver(double tau, double theta, bool keep) const;
    void theta_step(Vec& u, double t, double tau, double theta, bool keep, const LoadFunction* load, Vec& b_now) const;
    void theta_advance(Vec& u, double t0, double t1, const LoadFunction* load, Vec& b_now, long long& step_index) const;

    SparseMatrix m_;
    SparseMatrix k_;
    EvolutionBackend backend_;
    mutable std::mutex mutex_;
    mutable std::unique_ptr<SpdSolver> mass_solver_;
    mutable std::unique_ptr<EigenPairs> eigen_;
    mutable std::map<std::pair<double, double>, std::shared_ptr<const SpdSolver>> factors_;
    mutable std::atomic<long long> steps_{0};
};

Trajectory record_trajectory(const SpacePtr& space, const Evolver& evolver, const Vec& u0,
                             const std::vector<double>& times);

Vec semigroup_apply(const Evolver& evolver, const Vec& v, double t);
Trajectory solve_inhomogeneous(const SpacePtr& space, const Evolver& evolver, const Vec& u0, const LoadFunction& load,
                               const std::vector<double>& times);

/// Load function b(t) = int f(., t) phi + int g(., t) . grad phi.
using SpaceTimeScalar = std::function<double(Point2, double)>;
using SpaceTimeVector = std::function<Vec2(Point2, double)>;
LoadFunction make_load(const SpacePtr& space, SpaceTimeScalar f, SpaceTimeVector g, int quad_order);

/// w = M^{-1} K v
Vec apply_Ah(const SpdSolver& mass, const SparseMatrix& k, const Vec& v);

/// Writes manifest.json plus snapshot_NNNNN.txt for every `thinning`-th time
/// (the last time is always kept).
void write_trajectory(const std::filesystem::path& dir, const Trajectory& traj, const EvolutionBackend& backend,
                      int thinning = 1, const std::string& annotation = "");
Trajectory read_trajectory(const std::filesystem::path& dir, const SpacePtr& space);

}  // namespace lipfem
