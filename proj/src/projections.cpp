#include "lipfem/projections.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <map>

#include "lipfem/error.hpp"

namespace lipfem {

namespace {

Eigen::MatrixXd local_mass(const FeSpace& space, int t) {
    const int per = space.dofs_per_cell();
    const auto& rule = quadrature(2 * space.degree());
    const double area = space.mesh().area(t);
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(per, per);
    std::array<double, 6> phi{};
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
        space.basis(rule.points[q], phi);
        for (int i = 0; i < per; ++i)
            for (int j = 0; j < per; ++j) g(i, j) += rule.weights[q] * area * phi[i] * phi[j];
    }
    return g;
}

std::vector<std::array<double, 3>> sample_lattice(int m) {
    std::vector<std::array<double, 3>> pts;
    for (int i = 0; i <= m; ++i)
        for (int j = 0; i + j <= m; ++j) pts.push_back({double(m - i - j) / m, double(i) / m, double(j) / m});
    return pts;
}

}  // namespace

double RegularizedDelta::pair(const Vec& chi) const {
    const auto dofs = space->cell_dofs(element);
    const Eigen::MatrixXd g = local_mass(*space, element);
    double s = 0.0;
    for (std::size_t j = 0; j < dofs.size(); ++j)
        for (std::size_t k = 0; k < dofs.size(); ++k) s += local_coeffs[j] * g(j, k) * chi[dofs[k]];
    return s;
}

double RegularizedDelta::value(const std::array<double, 3>& bary) const {
    std::array<double, 6> phi{};
    space->basis(bary, phi);
    double v = 0.0;
    for (std::size_t j = 0; j < local_coeffs.size(); ++j) v += local_coeffs[j] * phi[j];
    return v;
}

double RegularizedDelta::linf_norm() const {
    if (space->degree() == 1) {
        double m = 0.0;
        for (double a : local_coeffs) m = std::max(m, std::abs(a));
        return m;
    }
    double m = 0.0;
    for (const auto& l : sample_lattice(24)) m = std::max(m, std::abs(value(l)));
    return m;
}

double RegularizedDelta::linf_grad_norm() const {
    const auto geo = space->geometry(element);
    std::array<Vec2, 6> dphi;
    double m = 0.0;
    const auto pts = space->degree() == 1 ? std::vector<std::array<double, 3>>{{1.0 / 3, 1.0 / 3, 1.0 / 3}}
                                          : sample_lattice(24);
    for (const auto& l : pts) {
        space->basis_gradients(geo, l, dphi);
        Vec2 g = Vec2::Zero();
        for (std::size_t j = 0; j < local_coeffs.size(); ++j) g += local_coeffs[j] * dphi[j];
        m = std::max(m, g.norm());
    }
    return m;
}

RegularizedDelta regularized_delta(const SpacePtr& space, Point2 x0) {
    const auto loc = space->mesh().locate(x0);
    const int per = space->dofs_per_cell();
    const Eigen::MatrixXd g = local_mass(*space, loc.triangle);
    std::array<double, 6> phi{};
    space->basis(loc.bary, phi);
    Eigen::VectorXd rhs(per);
    for (int k = 0; k < per; ++k) rhs[k] = phi[k];
    Eigen::LDLT<Eigen::MatrixXd> ldlt(g);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
        fail(ErrorKind::Solver, "degenerate element " + std::to_string(loc.triangle) + " for the regularized delta");
    const Eigen::VectorXd alpha = ldlt.solve(rhs);
    RegularizedDelta d;
    d.space = space;
    d.source = x0;
    d.element = loc.triangle;
    d.local_coeffs.assign(alpha.data(), alpha.data() + per);
    return d;
}

Vec point_evaluation_vector(const FeSpace& space, Point2 x0) {
    const auto loc = space.mesh().locate(x0);
    std::array<double, 6> phi{};
    space.basis(loc.bary, phi);
    Vec e = Vec::Zero(space.num_dofs());
    const auto dofs = space.cell_dofs(loc.triangle);
    for (std::size_t k = 0; k < dofs.size(); ++k) e[dofs[k]] = phi[k];
    return e;
}

FeFunction l2_project(const SpacePtr& space, const ScalarField& f, int quad_order) {
    const int order = quad_order > 0 ? quad_order : std::min(6, 2 * space->degree() + 2);
    const Vec b = assemble_load(*space, f, order);
    const SpdSolver mass(assemble_mass(*space));
    return {space, mass.solve(b)};
}

FeFunction ritz_project(const SpacePtr& space, const CoefficientField& coeff, const ScalarField& w,
                        const VectorField& grad_w, int quad_order) {
    const int order = quad_order > 0 ? quad_order : default_assembly_order(*space);
    const SparseMatrix k = assemble_stiffness(*space, coeff, order);
    const LoadAssembler loads(std::shared_ptr<const FeSpace>(std::shared_ptr<const FeSpace>{}, space.get()), order);
    const Vec b = loads.div_load([&](Point2 p) { return (coeff.a(p) * grad_w(p)).eval(); }) +
                  loads.load([&](Point2 p) { return coeff.c(p) * w(p); });
    const SpdSolver solver(k);
    return {space, solver.solve(b)};
}

FeFunction ph_delta(const SpacePtr& space, Point2 x0) {
    const SpdSolver mass(assemble_mass(*space));
    return {space, ph_delta(*space, mass, x0)};
}

Vec ph_delta(const FeSpace& space, const SpdSolver& mass, Point2 x0) {
    return mass.solve(point_evaluation_vector(space, x0));
}

Vec delta_load_on_refinement(const RegularizedDelta& delta, const FeSpace& fine, const std::vector<int>& parent) {
    if (static_cast<int>(parent.size()) != fine.mesh().num_triangles())
        fail(ErrorKind::Refinement, "parent map does not match the fine mesh");
    const auto& rule = quadrature(std::min(6, fine.degree() + delta.space->degree()));
    const Mesh& coarse = delta.space->mesh();
    Vec b = Vec::Zero(fine.num_dofs());
    std::array<double, 6> phi{};
    for (int t = 0; t < fine.mesh().num_triangles(); ++t) {
        if (parent[t] != delta.element) continue;
        const auto c = fine.mesh().corners(t);
        const double area = fine.mesh().area(t);
        const auto dofs = fine.cell_dofs(t);
        for (std::size_t q = 0; q < rule.points.size(); ++q) {
            const auto& l = rule.points[q];
            const Point2 x{l[0] * c[0].x1 + l[1] * c[1].x1 + l[2] * c[2].x1,
                           l[0] * c[0].x2 + l[1] * c[1].x2 + l[2] * c[2].x2};
            const double dv = delta.value(coarse.barycentric(delta.element, x));
            fine.basis(l, phi);
            for (std::size_t i = 0; i < dofs.size(); ++i) b[dofs[i]] += rule.weights[q] * area * dv * phi[i];
        }
    }
    return b;
}

DecayFit fit_delta_decay(const FeFunction& u, Point2 x0, double h) {
    std::map<int, double> envelope;
    const auto& coords = u.space->dof_coords();
    double peak = 0.0;
    for (int i = 0; i < u.space->num_dofs(); ++i) peak = std::max(peak, std::abs(u.coeffs[i]));
    for (int i = 0; i < u.space->num_dofs(); ++i) {
        const double a = std::abs(u.coeffs[i]);
        if (a <= 1e-13 * peak) continue;
        const int bin = static_cast<int>(std::floor(distance(coords[i], x0) / h));
        envelope[bin] = std::max(envelope[bin], a * h * h);
    }
    // least squares for log(env) = log(A) - r / C with r the bin centre in units of h
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (const auto& [bin, env] : envelope) {
        const double x = bin + 0.5;
        const double y = std::log(env);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++n;
    }
    DecayFit fit;
    fit.bins_used = n;
    if (n < 2) return fit;
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double intercept = (sy - slope * sx) / n;
    fit.amplitude = std::exp(intercept);
    fit.rate_constant = slope < 0.0 ? -1.0 / slope : INFINITY;
    return fit;
}

}  // namespace lipfem
