#pragma once

#include <limits>
#include <vector>

#include "lipfem/evolution.hpp"
#include "lipfem/fespace.hpp"

namespace lipfem {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// ln(2 + 1/h)
double log_factor(double h);

/// Throws InvalidArgument unless 1 <= p <= inf.
void check_exponent(double p, const char* what);

/// Tabulated evaluation of FE functions on element quadrature points, reused
/// across snapshots.
class SpatialNorms {
public:
    explicit SpatialNorms(SpacePtr space, int quad_order = 4);

    const FeSpace& space() const { return *space_; }
    /// (int |u|^q)^{1/q}; q = inf is the max over dofs and quadrature points.
    double lq(const Vec& u, double q) const;
    /// Lq norm of |grad u| (Euclidean length), elementwise.
    double grad_lq(const Vec& u, double q) const;
    /// int |d1 u| + |d2 u| over elements (broken gradient).
    double grad_l1_broken(const Vec& u) const;
    /// Same integral with gradients obtained by global point evaluation.
    double grad_l1_global(const Vec& u) const;
    double linf(const Vec& u) const;

    /// Quadrature points in cell order with their weights (area included).
    const std::vector<Point2>& points() const { return points_; }
    const std::vector<double>& weights() const { return weights_; }
    /// Values of u at points().
    void values(const Vec& u, std::vector<double>& out) const;
    /// (sum_k w_k |s_k|^q)^{1/q} for samples given at points(); q = inf is the max.
    double sample_lq(const std::vector<double>& s, double q) const;

private:
    SpacePtr space_;
    int per_ = 0;
    int nq_ = 0;
    std::vector<double> weights_;  // per point, area included
    std::vector<double> phi_;      // [point][local]
    std::vector<Vec2> dphi_;       // [point][local]
    std::vector<Point2> points_;
};

/// Composite trapezoid of |s|^p over the sample times, returned as the p-th root;
/// p = inf returns the max.
double temporal_norm(const std::vector<double>& times, const std::vector<double>& values, double p);

double lp_lq_norm(const Trajectory& traj, double p, double q);
double max_norm_QT(const Trajectory& traj);

enum class GradientPath { Broken, Global };
/// int_0^T ||f||_L1 + ||d1 f||_L1 + ||d2 f||_L1 dt over the trajectory.
double w101_norm(const Trajectory& traj, GradientPath path = GradientPath::Broken);

}  // namespace lipfem
