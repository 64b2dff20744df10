#include "lipfem/norms.hpp"

#include <cmath>

#include "lipfem/error.hpp"
#include "lipfem/text.hpp"

namespace lipfem {

double log_factor(double h) {
    if (!(h > 0.0) || !std::isfinite(h)) fail(ErrorKind::InvalidArgument, "mesh size must be positive");
    return std::log(2.0 + 1.0 / h);
}

void check_exponent(double p, const char* what) {
    if (!(p >= 1.0)) fail(ErrorKind::InvalidArgument, std::string(what) + " exponent must be >= 1, got " + format_double(p));
}

SpatialNorms::SpatialNorms(SpacePtr space, int quad_order) : space_(std::move(space)) {
    const auto& rule = quadrature(quad_order);
    const Mesh& mesh = space_->mesh();
    per_ = space_->dofs_per_cell();
    nq_ = static_cast<int>(rule.points.size());
    const std::size_t total = static_cast<std::size_t>(mesh.num_triangles()) * nq_;
    weights_.reserve(total);
    points_.reserve(total);
    phi_.resize(total * per_);
    dphi_.resize(total * per_);
    std::size_t k = 0;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto geo = space_->geometry(t);
        const auto c = mesh.corners(t);
        for (int q = 0; q < nq_; ++q, ++k) {
            const auto& l = rule.points[q];
            weights_.push_back(geo.area * rule.weights[q]);
            points_.push_back({l[0] * c[0].x1 + l[1] * c[1].x1 + l[2] * c[2].x1,
                               l[0] * c[0].x2 + l[1] * c[1].x2 + l[2] * c[2].x2});
            space_->basis(l, std::span<double>(phi_.data() + k * per_, per_));
            space_->basis_gradients(geo, l, std::span<Vec2>(dphi_.data() + k * per_, per_));
        }
    }
}

double SpatialNorms::linf(const Vec& u) const {
    double m = u.cwiseAbs().maxCoeff();
    const int nt = space_->mesh().num_triangles();
    std::size_t k = 0;
    for (int t = 0; t < nt; ++t) {
        const auto dofs = space_->cell_dofs(t);
        for (int q = 0; q < nq_; ++q, ++k) {
            double v = 0.0;
            for (int i = 0; i < per_; ++i) v += phi_[k * per_ + i] * u[dofs[i]];
            m = std::max(m, std::abs(v));
        }
    }
    return m;
}

void SpatialNorms::values(const Vec& u, std::vector<double>& out) const {
    if (u.size() != space_->num_dofs()) fail(ErrorKind::InvalidArgument, "vector has the wrong length");
    out.resize(points_.size());
    const int nt = space_->mesh().num_triangles();
    std::size_t k = 0;
    for (int t = 0; t < nt; ++t) {
        const auto dofs = space_->cell_dofs(t);
        for (int q = 0; q < nq_; ++q, ++k) {
            double v = 0.0;
            for (int i = 0; i < per_; ++i) v += phi_[k * per_ + i] * u[dofs[i]];
            out[k] = v;
        }
    }
}

double SpatialNorms::sample_lq(const std::vector<double>& s, double q) const {
    check_exponent(q, "spatial");
    if (s.size() != points_.size()) fail(ErrorKind::InvalidArgument, "sample count does not match the quadrature");
    double r = 0.0;
    if (std::isinf(q)) {
        for (double v : s) r = std::max(r, std::abs(v));
        return r;
    }
    for (std::size_t k = 0; k < s.size(); ++k) r += weights_[k] * std::pow(std::abs(s[k]), q);
    return std::pow(r, 1.0 / q);
}

double SpatialNorms::lq(const Vec& u, double q) const {
    check_exponent(q, "spatial");
    if (u.size() != space_->num_dofs()) fail(ErrorKind::InvalidArgument, "vector has the wrong length");
    if (std::isinf(q)) return linf(u);
    const int nt = space_->mesh().num_triangles();
    double s = 0.0;
    std::size_t k = 0;
    for (int t = 0; t < nt; ++t) {
        const auto dofs = space_->cell_dofs(t);
        for (int j = 0; j < nq_; ++j, ++k) {
            double v = 0.0;
            for (int i = 0; i < per_; ++i) v += phi_[k * per_ + i] * u[dofs[i]];
            const double a = std::abs(v);
            s += weights_[k] * (q == 1.0 ? a : q == 2.0 ? a * a : std::pow(a, q));
        }
    }
    return q == 1.0 ? s : q == 2.0 ? std::sqrt(s) : std::pow(s, 1.0 / q);
}

double SpatialNorms::grad_lq(const Vec& u, double q) const {
    check_exponent(q, "spatial");
    const int nt = space_->mesh().num_triangles();
    double s = 0.0;
    std::size_t k = 0;
    for (int t = 0; t < nt; ++t) {
        const auto dofs = space_->cell_dofs(t);
        for (int j = 0; j < nq_; ++j, ++k) {
            Vec2 g = Vec2::Zero();
            for (int i = 0; i < per_; ++i) g += u[dofs[i]] * dphi_[k * per_ + i];
            const double a = g.norm();
            if (std::isinf(q))
                s = std::max(s, a);
            else
                s += weights_[k] * std::pow(a, q);
        }
    }
    return std::isinf(q) ? s : std::pow(s, 1.0 / q);
}

double SpatialNorms::grad_l1_broken(const Vec& u) const {
    const int nt = space_->mesh().num_triangles();
    double s = 0.0;
    std::size_t k = 0;
    for (int t = 0; t < nt; ++t) {
        const auto dofs = space_->cell_dofs(t);
        for (int j = 0; j < nq_; ++j, ++k) {
            Vec2 g = Vec2::Zero();
            for (int i = 0; i < per_; ++i) g += u[dofs[i]] * dphi_[k * per_ + i];
            s += weights_[k] * (std::abs(g[0]) + std::abs(g[1]));
        }
    }
    return s;
}

double SpatialNorms::grad_l1_global(const Vec& u) const {
    const FeFunction f(space_, u);
    double s = 0.0;
    for (std::size_t k = 0; k < points_.size(); ++k) {
        const Vec2 g = eval_grad(f, points_[k]);
        s += weights_[k] * (std::abs(g[0]) + std::abs(g[1]));
    }
    return s;
}

double temporal_norm(const std::vector<double>& times, const std::vector<double>& values, double p) {
    check_exponent(p, "temporal");
    if (times.size() != values.size() || times.empty())
        fail(ErrorKind::InvalidArgument, "temporal samples and times differ in length");
    if (std::isinf(p)) {
        double m = 0.0;
        for (double v : values) m = std::max(m, std::abs(v));
        return m;
    }
    if (times.size() == 1) return std::abs(values[0]);
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < times.size(); ++i)
        s += 0.5 * (times[i + 1] - times[i]) * (std::pow(std::abs(values[i]), p) + std::pow(std::abs(values[i + 1]), p));
    return std::pow(s, 1.0 / p);
}

double lp_lq_norm(const Trajectory& traj, double p, double q) {
    check_exponent(p, "temporal");
    check_exponent(q, "spatial");
    if (traj.times.empty()) fail(ErrorKind::InvalidArgument, "empty trajectory");
    const SpatialNorms norms(traj.space, 4);
    std::vector<double> s;
    s.reserve(traj.times.size());
    for (const auto& u : traj.snapshots) s.push_back(norms.lq(u, q));
    return temporal_norm(traj.times, s, p);
}

double max_norm_QT(const Trajectory& traj) {
    if (traj.times.empty()) fail(ErrorKind::InvalidArgument, "empty trajectory");
    const SpatialNorms norms(traj.space, 4);
    double m = 0.0;
    for (const auto& u : traj.snapshots) m = std::max(m, norms.linf(u));
    return m;
}

double w101_norm(const Trajectory& traj, GradientPath path) {
    if (traj.times.empty()) fail(ErrorKind::InvalidArgument, "empty trajectory");
    const SpatialNorms norms(traj.space, 4);
    std::vector<double> s;
    for (const auto& u : traj.snapshots)
        s.push_back(norms.lq(u, 1.0) +
                    (path == GradientPath::Broken ? norms.grad_l1_broken(u) : norms.grad_l1_global(u)));
    if (traj.times.size() == 1) return s[0];
    return temporal_norm(traj.times, s, 1.0);
}

}  // namespace lipfem
