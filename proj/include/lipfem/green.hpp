#pragma once

#include <functional>
#include <string>
#include <vector>

#include "lipfem/assembly.hpp"
#include "lipfem/evolution.hpp"
#include "lipfem/norms.hpp"
#include "lipfem/projections.hpp"

namespace lipfem {

enum class GreenRole { Discrete, Reference };

struct GreenRecord {
    Point2 source;
    Trajectory trajectory;
    GreenRole role = GreenRole::Discrete;
};

/// Centroid of the element that contains p (lowest index on ties).
Point2 centroid_source(const FeSpace& space, Point2 p);

/// Homogeneous flow started from P_h delta_{x0}.
GreenRecord discrete_green(const SpacePtr& space, const Evolver& evolver, Point2 x0, const std::vector<double>& times);
GreenRecord discrete_green(const SpacePtr& space, const CoefficientField& coeff, Point2 x0,
                           const EvolutionBackend& backend, const std::vector<double>& times);

/// Initial value of the reference kernel: fine L2 projection of the coarse
/// regularized delta.
Vec reference_initial(const SpacePtr& coarse, const SpacePtr& fine, const SpdSolver& fine_mass,
                      const std::vector<int>& parent, Point2 x0);
GreenRecord reference_green(const SpacePtr& coarse, const SpacePtr& fine, const Evolver& fine_evolver, Point2 x0,
                            const std::vector<double>& times);
GreenRecord reference_green(const SpacePtr& coarse, const SpacePtr& fine, const CoefficientField& coeff, Point2 x0,
                            const EvolutionBackend& backend, const std::vector<double>& times);

/// Quadrature points of the fine mesh, each tagged with the fine and coarse
/// cells containing it, used to compare coarse and fine functions.
class SampleGrid {
public:
    SampleGrid(SpacePtr coarse, SpacePtr fine, int quad_order = 2);

    std::size_t size() const { return points_.size(); }
    const std::vector<Point2>& points() const { return points_; }
    const std::vector<double>& weights() const { return weights_; }
    const FeSpace& coarse() const { return *coarse_; }
    const FeSpace& fine() const { return *fine_; }
    const std::vector<int>& parent() const { return parent_; }

    void sample_coarse(const Vec& u, std::vector<double>& values, std::vector<Vec2>* grads) const;
    void sample_fine(const Vec& u, std::vector<double>& values, std::vector<Vec2>* grads) const;

private:
    void sample(const FeSpace& space, const std::vector<int>& cells, const std::vector<double>& phi,
                const std::vector<Vec2>& dphi, const Vec& u, std::vector<double>& values,
                std::vector<Vec2>* grads) const;

    SpacePtr coarse_;
    SpacePtr fine_;
    std::vector<int> parent_;
    std::vector<Point2> points_;
    std::vector<double> weights_;
    std::vector<int> fine_cell_, coarse_cell_;
    std::vector<double> fine_phi_, coarse_phi_;
    std::vector<Vec2> fine_dphi_, coarse_dphi_;
};

/// F and grad F on a SampleGrid at a sequence of times.
struct SampledField {
    const SampleGrid* grid = nullptr;
    std::vector<double> times;
    std::vector<std::vector<double>> values;
    std::vector<std::vector<Vec2>> grads;
};

/// F = Gamma_h - Gamma on the grid; throws GridMismatch unless the time grids agree.
SampledField difference_F(const GreenRecord& gh, const GreenRecord& gref, const SampleGrid& grid);

/// Consumes a field snapshot by snapshot and hands out first and second time
/// differences per node: central (non-uniform) in the interior, one-sided at
/// the ends with the second difference copied from the neighbour.
class TimeDerivativeStream {
public:
    using Callback = std::function<void(std::size_t index, double t, const std::vector<double>& f,
                                        const std::vector<Vec2>& grad, const std::vector<double>& d1,
                                        const std::vector<double>& d2)>;

    explicit TimeDerivativeStream(Callback cb) : cb_(std::move(cb)) {}
    void push(double t, std::vector<double> f, std::vector<Vec2> grad = {});
    /// Throws InvalidArgument for fewer than three snapshots.
    void finish();

private:
    void emit(std::size_t slot, const std::vector<double>& d1, const std::vector<double>& d2);

    Callback cb_;
    std::vector<double> t_;
    std::vector<std::vector<double>> f_;
    std::vector<std::vector<Vec2>> g_;
    std::vector<double> d2_prev_;
    std::size_t count_ = 0;
    bool finished_ = false;
};

struct Lemma31Record {
    double dtF_L1 = 0.0;
    double t_dttF_L1 = 0.0;
    double w101 = 0.0;
    double scaled_w101 = 0.0;  // h^{-1} l_h^{-1} ||F||_{W^{1,0}_1}
};

/// Accumulates the space-time L1 functionals over [0, T].
class Lemma31Accumulator {
public:
    Lemma31Accumulator(const std::vector<double>& weights, double h, double T);
    void node(double t, const std::vector<double>& f, const std::vector<Vec2>& grad, const std::vector<double>& d1,
              const std::vector<double>& d2);
    Lemma31Record result() const;

private:
    const std::vector<double>& w_;
    double h_, T_;
    std::vector<double> t_, a_, b_, c_;
};

Lemma31Record lemma31_functionals(const SampledField& F, double h, double T);

/// Parabolic annuli around x0: innermost set max(|x - x0|, sqrt t) <= d_{J*},
/// annuli d_j <= rho < 2 d_j for 1 <= j <= J*, index 0 for the remainder.
class DyadicDecomposition {
public:
    static constexpr int kInnermost = -1;

    DyadicDecomposition(Point2 x0, double h, double c_star, double T = 1.0);

    Point2 source() const { return x0_; }
    double h() const { return h_; }
    double c_star() const { return c_star_; }
    int j_star() const { return j_star_; }
    double d(int j) const;
    double T() const { return T_; }
    int classify(Point2 x, double t) const;
    int classify_rho(double rho) const;

private:
    Point2 x0_;
    double h_, c_star_, T_;
    int j_star_;
};

struct WeightedKRecord {
    std::vector<double> K;          // K_j, j = 0..J*
    std::vector<char> empty;        // annulus received no samples
    std::vector<double> mu;
    double curlyK = 0.0;
};

class WeightedKAccumulator {
public:
    WeightedKAccumulator(const SampleGrid& grid, const DyadicDecomposition& decomp);
    void node(double t, const std::vector<double>& f, const std::vector<Vec2>& grad, const std::vector<double>& d1,
              const std::vector<double>& d2);
    WeightedKRecord result() const;
    /// mu_j = [h l_h]^{-1} + d_j^{-1}
    double mu(int j) const;

private:
    const SampleGrid& grid_;
    DyadicDecomposition decomp_;
    std::vector<double> dist_;
    std::vector<double> t_;
    std::vector<std::vector<double>> a_, b_, c_;  // [node][annulus]
    std::vector<long long> hits_;
};

WeightedKRecord weighted_K_functionals(const SampledField& F, const DyadicDecomposition& decomp);

/// Cubic smoothstep ramp: 0 for rho <= 1/2, 1 for rho >= 1.
double eta_ramp(double rho);
/// chi_eps = eta((|x - y| / eps)^4 + (t / eps^2)^2)
double truncation_weight(double dist, double t, double eps);
/// Gamma_ref * chi_eps at the grid points for one time.
std::vector<double> truncated_green(const std::vector<double>& reference, const std::vector<Point2>& points,
                                    Point2 source, double t, double eps);

/// int_0^inf int |d_t D| dx dt for a sampled D; the tail beyond the last time
/// is extrapolated with the decay rate fitted on the last samples (fallback_rate
/// when the fit is not decreasing).
class SchurRowAccumulator {
public:
    SchurRowAccumulator(const std::vector<double>& weights, double fallback_rate);
    void node(double t, const std::vector<double>& d1);
    struct Result {
        double row_sum = 0.0;
        double tail = 0.0;
        double rate = 0.0;
    };
    Result result() const;

private:
    const std::vector<double>& w_;
    double fallback_;
    std::vector<double> t_, s_;
};

struct SchurSource {
    Point2 source;
    double row_sum = 0.0;
    double tail = 0.0;
    double rate = 0.0;
};

/// Row sums of |d_t Gamma_h - d_t (chi_eps Gamma_ref)| for each source. The
/// discrete kernel uses `coarse_evolver`, the reference `fine_evolver`.
std::vector<SchurSource> schur_rowsums(const SampleGrid& grid, const Evolver& coarse_evolver,
                                       const Evolver& fine_evolver, const std::vector<Point2>& sources,
                                       const std::vector<double>& times, double eps, double c0);

/// sup over samples with max(sqrt t, |x - x0|) >= 2h of |G| (sqrt t + |x - x0|)^2 exp(|x - x0|^2 / (C t)).
double gaussian_envelope(const std::vector<double>& values, const std::vector<Point2>& points, Point2 x0, double t,
                         double h, double C);

struct DecayRate {
    double rate = 0.0;       // fitted c in ||G(t)|| ~ exp(-c t)
    double constant = 0.0;   // max ||G(t)|| exp(c0 (t - 1)) over the window
};
DecayRate fit_decay(const std::vector<double>& times, const std::vector<double>& norms, double t_from, double c0);

/// Output times: spacing dt_min until t = dt_min / growth, then the largest
/// dt_min * 2^k not above growth * t (capped at dt_max), with t = T and every
/// entry of `stops` hit exactly.
std::vector<double> graded_time_grid(double dt_min, double growth, double dt_max, double T,
                                     const std::vector<double>& stops = {});
std::vector<double> log_time_grid(double t_min, double t_max, int count);

/// Exact L-infinity operator norms of the semigroup at one time through the
/// kernel duality (E_h(t) v)(x_i) = (Gamma_h(t, ., x_i), v): row sums of
/// Gamma M over nodal sources. Spectral backend only.
struct KernelSums {
    double t = 0.0;
    double norm = 0.0;          // max_i ||M gamma_i||_1
    int argmax = -1;            // dof of the maximizing source
    double dt_norm = 0.0;       // t * max_i ||M d_t gamma_i||_1
    int dt_argmax = -1;
    double kernel_l1 = 0.0;     // max_i ||Gamma_h(t, ., x_i)||_L1 (upper bound of norm)
    Vec extremal;               // sign(M gamma_argmax), the maximizing L-infinity probe
};
KernelSums kernel_sums(const Evolver& evolver, const SpatialNorms* l1, double t);

struct DiagnosticsOptions {
    double T = 1.0;           // horizon of the Lemma 3.1 functionals
    double c_star = 16.0;
    double c0 = 1.0;          // fallback decay rate
    double gaussian_C = 8.0;
    bool weighted_K = true;
    bool schur = true;
};

/// Everything measured for one source in a single pass over the reference run.
struct SourceDiagnostics {
    Point2 source;
    Lemma31Record lemma;
    WeightedKRecord K;
    int j_star = 0;
    double eps = 0.0;
    SchurRowAccumulator::Result schur;
    double F0_L1 = 0.0;
    double gaussian = 0.0;
    DecayRate decay;
    double mass_T = 0.0;       // (Gamma_h(T), 1)
};

/// `times` must contain opts.T; times beyond T feed only the Schur sums and the decay fit.
SourceDiagnostics diagnose_source(const SampleGrid& grid, const Evolver& coarse_evolver, const Evolver& fine_evolver,
                                  Point2 x0, const std::vector<double>& times, const DiagnosticsOptions& opts);

}  // namespace lipfem
