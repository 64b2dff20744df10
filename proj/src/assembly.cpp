#include "lipfem/assembly.hpp"

#include <cmath>
#include <numbers>

#include "lipfem/error.hpp"
#include "lipfem/text.hpp"

namespace lipfem {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

Point2 map_to_cell(const std::array<Point2, 3>& c, const std::array<double, 3>& l) {
    return {l[0] * c[0].x1 + l[1] * c[1].x1 + l[2] * c[2].x1, l[0] * c[0].x2 + l[1] * c[1].x2 + l[2] * c[2].x2};
}

std::string where(Point2 p) { return "(" + format_double(p.x1) + ", " + format_double(p.x2) + ")"; }

void check_point(const CoefficientField& coeff, const Mat2& a, double c, Point2 p) {
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    if (std::abs(a(0, 1) - a(1, 0)) > 1e-14 * scale)
        fail(ErrorKind::Ellipticity, "coefficient '" + coeff.name + "' is not symmetric at " + where(p));
    const double mean = 0.5 * (a(0, 0) + a(1, 1));
    const double rad = std::hypot(0.5 * (a(0, 0) - a(1, 1)), a(0, 1));
    const double lo = mean - rad;
    const double hi = mean + rad;
    if (!(lo >= coeff.lambda1 * (1.0 - 1e-12)) || !(hi <= coeff.lambda2 * (1.0 + 1e-12)))
        fail(ErrorKind::Ellipticity, "coefficient '" + coeff.name + "' leaves [lambda1, lambda2] = [" +
                                         format_double(coeff.lambda1) + ", " + format_double(coeff.lambda2) +
                                         "] at " + where(p) + " (eigenvalues " + format_double(lo) + ", " +
                                         format_double(hi) + ")");
    if (!(c >= coeff.c0 - 1e-14 * std::max(1.0, std::abs(coeff.c0))))
        fail(ErrorKind::Ellipticity, "coefficient '" + coeff.name + "' has c = " + format_double(c) + " < c0 at " +
                                         where(p));
}

SparseMatrix from_triplets(int n, const Triplets& trips) {
    SparseMatrix m(n, n);
    m.setFromTriplets(trips.begin(), trips.end());
    m.makeCompressed();
    return m;
}

}  // namespace

CoefficientField coefficient_library(const std::string& name) {
    CoefficientField f;
    f.name = name;
    f.c0 = 1.0;
    f.lambda1 = 1.0;
    if (name == "identity") {
        f.a = [](Point2) { return Mat2::Identity().eval(); };
        f.c = [](Point2) { return 1.0; };
        f.lambda2 = 1.0;
        f.lipschitz_bound = 0.0;
    } else if (name == "smooth_aniso") {
        f.a = [](Point2 p) {
            const double s = std::sin(std::numbers::pi * p.x1);
            const double c = std::cos(std::numbers::pi * p.x2);
            Mat2 a = Mat2::Zero();
            a(0, 0) = 1.0 + 0.5 * s * s;
            a(1, 1) = 1.0 + 0.5 * c * c;
            return a;
        };
        f.c = [](Point2) { return 1.0; };
        f.lambda2 = 1.5;
        f.lipschitz_bound = 0.5 * std::numbers::pi;
    } else if (name == "lipschitz_kink") {
        f.a = [](Point2 p) { return ((1.0 + 0.5 * std::abs(p.x1 - 0.5)) * Mat2::Identity()).eval(); };
        f.c = [](Point2 p) { return 1.0 + 0.25 * std::abs(p.x2 - 0.5); };
        f.lambda2 = 1.75;
        f.lipschitz_bound = 0.5;
    } else if (name == "lipschitz_radial") {
        f.a = [](Point2 p) {
            const double r = std::hypot(p.x1 - 0.5, p.x2 - 0.5);
            return ((1.0 + 0.5 * std::abs(r - 0.25)) * Mat2::Identity()).eval();
        };
        f.c = [](Point2) { return 1.0; };
        f.lambda2 = 1.0 + 0.5 * (std::hypot(1.5, 1.5) - 0.25);
        f.lipschitz_bound = 0.5;
    } else {
        fail(ErrorKind::InvalidArgument, "unknown coefficient field '" + name + "'");
    }
    return f;
}

std::vector<std::string> coefficient_names() {
    return {"identity", "smooth_aniso", "lipschitz_kink", "lipschitz_radial"};
}

int default_assembly_order(const FeSpace& space) { return std::max(2, 2 * space.degree()); }

void check_coefficient(const FeSpace& space, const CoefficientField& coeff, int quad_order) {
    const auto& rule = quadrature(quad_order);
    const Mesh& mesh = space.mesh();
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto c = mesh.corners(t);
        for (const auto& l : rule.points) {
            const Point2 p = map_to_cell(c, l);
            check_point(coeff, coeff.a(p), coeff.c(p), p);
        }
    }
}

SparseMatrix assemble_mass(const FeSpace& space) {
    const auto& rule = quadrature(2 * space.degree());
    const int per = space.dofs_per_cell();
    Triplets trips;
    trips.reserve(static_cast<std::size_t>(space.mesh().num_triangles()) * per * per);
    std::array<double, 6> phi{};
    std::array<double, 36> local{};
    for (int t = 0; t < space.mesh().num_triangles(); ++t) {
        const double area = space.mesh().area(t);
        local.fill(0.0);
        for (std::size_t q = 0; q < rule.points.size(); ++q) {
            space.basis(rule.points[q], phi);
            const double w = rule.weights[q] * area;
            for (int i = 0; i < per; ++i)
                for (int j = 0; j < per; ++j) local[i * per + j] += w * phi[i] * phi[j];
        }
        const auto dofs = space.cell_dofs(t);
        for (int i = 0; i < per; ++i)
            for (int j = 0; j < per; ++j) trips.emplace_back(dofs[i], dofs[j], local[i * per + j]);
    }
    return from_triplets(space.num_dofs(), trips);
}

SparseMatrix assemble_stiffness(const FeSpace& space, const CoefficientField& coeff, int quad_order) {
    const auto& rule = quadrature(quad_order > 0 ? quad_order : default_assembly_order(space));
    const int per = space.dofs_per_cell();
    const Mesh& mesh = space.mesh();
    Triplets trips;
    trips.reserve(static_cast<std::size_t>(mesh.num_triangles()) * per * per);
    std::array<double, 6> phi{};
    std::array<Vec2, 6> dphi;
    std::array<double, 36> local{};
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto geo = space.geometry(t);
        const auto corners = mesh.corners(t);
        local.fill(0.0);
        for (std::size_t q = 0; q < rule.points.size(); ++q) {
            const auto& l = rule.points[q];
            const Point2 x = map_to_cell(corners, l);
            const Mat2 a = coeff.a(x);
            const double c = coeff.c(x);
            check_point(coeff, a, c, x);
            space.basis(l, phi);
            space.basis_gradients(geo, l, dphi);
            const double w = rule.weights[q] * geo.area;
            for (int j = 0; j < per; ++j) {
                const Vec2 adj = a * dphi[j];
                for (int i = 0; i < per; ++i) local[i * per + j] += w * (adj.dot(dphi[i]) + c * phi[j] * phi[i]);
            }
        }
        const auto dofs = space.cell_dofs(t);
        for (int i = 0; i < per; ++i)
            for (int j = 0; j < per; ++j) trips.emplace_back(dofs[i], dofs[j], local[i * per + j]);
    }
    return from_triplets(space.num_dofs(), trips);
}

LoadAssembler::LoadAssembler(SpacePtr space, int quad_order) : space_(std::move(space)) {
    const auto& rule = quadrature(quad_order);
    const Mesh& mesh = space_->mesh();
    per_cell_ = space_->dofs_per_cell();
    nq_ = static_cast<int>(rule.points.size());
    const std::size_t total = static_cast<std::size_t>(mesh.num_triangles()) * nq_;
    points_.reserve(total);
    weights_.reserve(total);
    phi_.resize(total * per_cell_);
    dphi_.resize(total * per_cell_);
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto geo = space_->geometry(t);
        const auto corners = mesh.corners(t);
        for (int q = 0; q < nq_; ++q) {
            const std::size_t k = points_.size();
            points_.push_back(map_to_cell(corners, rule.points[q]));
            weights_.push_back(rule.weights[q] * geo.area);
            space_->basis(rule.points[q], std::span<double>(phi_.data() + k * per_cell_, per_cell_));
            space_->basis_gradients(geo, rule.points[q], std::span<Vec2>(dphi_.data() + k * per_cell_, per_cell_));
        }
    }
}

Vec LoadAssembler::load_from_samples(const std::vector<double>& values) const {
    Vec b = Vec::Zero(space_->num_dofs());
    const int nt = space_->mesh().num_triangles();
    for (int t = 0; t < nt; ++t) {
        const auto dofs = space_->cell_dofs(t);
        for (int q = 0; q < nq_; ++q) {
            const std::size_t k = static_cast<std::size_t>(t) * nq_ + q;
            const double wf = weights_[k] * values[k];
            for (int i = 0; i < per_cell_; ++i) b[dofs[i]] += wf * phi_[k * per_cell_ + i];
        }
    }
    return b;
}

Vec LoadAssembler::load(const ScalarField& f) const {
    std::vector<double> values(points_.size());
    for (std::size_t k = 0; k < points_.size(); ++k) {
        values[k] = f(points_[k]);
        if (!std::isfinite(values[k])) fail(ErrorKind::InvalidArgument, "non-finite load value at " + where(points_[k]));
    }
    return load_from_samples(values);
}

Vec LoadAssembler::div_load(const VectorField& g) const {
    Vec b = Vec::Zero(space_->num_dofs());
    const int nt = space_->mesh().num_triangles();
    for (int t = 0; t < nt; ++t) {
        const auto dofs = space_->cell_dofs(t);
        for (int q = 0; q < nq_; ++q) {
            const std::size_t k = static_cast<std::size_t>(t) * nq_ + q;
            const Vec2 gv = g(points_[k]);
            if (!std::isfinite(gv[0]) || !std::isfinite(gv[1]))
                fail(ErrorKind::InvalidArgument, "non-finite flux value at " + where(points_[k]));
            for (int i = 0; i < per_cell_; ++i) b[dofs[i]] += weights_[k] * gv.dot(dphi_[k * per_cell_ + i]);
        }
    }
    return b;
}

Vec assemble_load(const FeSpace& space, const ScalarField& f, int quad_order) {
    // LoadAssembler wants shared ownership; alias without taking it.
    const SpacePtr alias(std::shared_ptr<const FeSpace>{}, &space);
    return LoadAssembler(alias, quad_order).load(f);
}

Vec assemble_div_load(const FeSpace& space, const VectorField& g, int quad_order) {
    const SpacePtr alias(std::shared_ptr<const FeSpace>{}, &space);
    return LoadAssembler(alias, quad_order).div_load(g);
}

SparseMatrix assemble_div_operator(const FeSpace& space) {
    const auto& rule = quadrature(std::max(1, space.degree() - 1));
    const int per = space.dofs_per_cell();
    const Mesh& mesh = space.mesh();
    Triplets trips;
    std::array<Vec2, 6> dphi;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto geo = space.geometry(t);
        std::array<Vec2, 6> integral;
        integral.fill(Vec2::Zero());
        for (std::size_t q = 0; q < rule.points.size(); ++q) {
            space.basis_gradients(geo, rule.points[q], dphi);
            for (int i = 0; i < per; ++i) integral[i] += rule.weights[q] * geo.area * dphi[i];
        }
        const auto dofs = space.cell_dofs(t);
        for (int i = 0; i < per; ++i) {
            trips.emplace_back(dofs[i], 2 * t, integral[i][0]);
            trips.emplace_back(dofs[i], 2 * t + 1, integral[i][1]);
        }
    }
    SparseMatrix d(space.num_dofs(), 2 * mesh.num_triangles());
    d.setFromTriplets(trips.begin(), trips.end());
    d.makeCompressed();
    return d;
}

}  // namespace lipfem
