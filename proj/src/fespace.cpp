#include "lipfem/fespace.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "lipfem/error.hpp"
#include "lipfem/text.hpp"

namespace lipfem {

namespace {

using Bary = std::array<double, 3>;

void add_orbit3(QuadratureRule& q, double a, double b, double w) {
    q.points.push_back({a, b, b});
    q.points.push_back({b, a, b});
    q.points.push_back({b, b, a});
    q.weights.insert(q.weights.end(), 3, w);
}

void add_orbit6(QuadratureRule& q, double a, double b, double c, double w) {
    const Bary perms[6] = {{a, b, c}, {a, c, b}, {b, a, c}, {b, c, a}, {c, a, b}, {c, b, a}};
    for (const auto& p : perms) q.points.push_back(p);
    q.weights.insert(q.weights.end(), 6, w);
}

QuadratureRule make_rule(int degree) {
    QuadratureRule q;
    q.degree = degree;
    switch (degree) {
        case 1:
            q.points.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
            q.weights.push_back(1.0);
            break;
        case 2:
            add_orbit3(q, 2.0 / 3.0, 1.0 / 6.0, 1.0 / 3.0);
            break;
        case 3:
            // Strang-Fix, all weights positive
            add_orbit6(q, 0.659027622374092, 0.231933368553031, 0.109039009072877, 1.0 / 6.0);
            break;
        case 4:
            add_orbit3(q, 0.108103018168070, 0.445948490915965, 0.223381589678011);
            add_orbit3(q, 0.816847572980459, 0.091576213509771, 0.109951743655322);
            break;
        case 5: {
            const double s = std::sqrt(15.0);
            q.points.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
            q.weights.push_back(9.0 / 40.0);
            add_orbit3(q, 1.0 - 2.0 * (6.0 - s) / 21.0, (6.0 - s) / 21.0, (155.0 - s) / 1200.0);
            add_orbit3(q, 1.0 - 2.0 * (6.0 + s) / 21.0, (6.0 + s) / 21.0, (155.0 + s) / 1200.0);
            break;
        }
        case 6:
            add_orbit3(q, 0.501426509658179, 0.249286745170910, 0.116786275726379);
            add_orbit3(q, 0.873821971016996, 0.063089014491502, 0.050844906370207);
            add_orbit6(q, 0.053145049844817, 0.310352451033784, 0.636502499121399, 0.082851075618374);
            break;
        default:
            fail(ErrorKind::InvalidArgument, "unsupported quadrature order " + std::to_string(degree));
    }
    double sum = 0.0;
    for (double w : q.weights) sum += w;
    for (double& w : q.weights) w /= sum;
    for (auto& p : q.points) {
        const double s = p[0] + p[1] + p[2];
        for (double& c : p) c /= s;
    }
    return q;
}

}  // namespace

const QuadratureRule& quadrature(int order) {
    static const std::array<QuadratureRule, 6> rules = {make_rule(1), make_rule(2), make_rule(3),
                                                        make_rule(4), make_rule(5), make_rule(6)};
    if (order < 1 || order > 6) fail(ErrorKind::InvalidArgument, "unsupported quadrature order " + std::to_string(order));
    return rules[order - 1];
}

double reference_monomial_mean(int a, int b) {
    // integral over the reference triangle is a! b! / (a + b + 2)!, its area is 1/2
    return 2.0 * std::tgamma(a + 1.0) * std::tgamma(b + 1.0) / std::tgamma(a + b + 3.0);
}

FeSpace::FeSpace(MeshPtr mesh, int degree) : mesh_(std::move(mesh)), degree_(degree) {
    if (degree_ != 1 && degree_ != 2)
        fail(ErrorKind::UnsupportedDegree, "Lagrange degree " + std::to_string(degree_) + " is not supported");
    const Mesh& m = *mesh_;
    dof_coords_ = m.vertices();
    const int per = dofs_per_cell();
    cell_dofs_.resize(static_cast<std::size_t>(m.num_triangles()) * per);
    for (int t = 0; t < m.num_triangles(); ++t) {
        const auto& tri = m.triangles()[t];
        int* dofs = cell_dofs_.data() + static_cast<std::size_t>(t) * per;
        for (int k = 0; k < 3; ++k) dofs[k] = tri[k];
        if (degree_ == 2)
            for (int k = 0; k < 3; ++k) dofs[3 + k] = m.num_vertices() + m.triangle_edges(t)[k];
    }
    if (degree_ == 2) {
        for (const auto& e : m.edges()) dof_coords_.push_back(0.5 * (m.vertices()[e[0]] + m.vertices()[e[1]]));
    }
}

ElementGeometry FeSpace::geometry(int t) const {
    const auto c = mesh_->corners(t);
    ElementGeometry g;
    g.area = mesh_->area(t);
    const double inv = 1.0 / (2.0 * g.area);
    for (int i = 0; i < 3; ++i) {
        const Point2& a = c[(i + 1) % 3];
        const Point2& b = c[(i + 2) % 3];
        g.grad_lambda[i] = Vec2((a.x2 - b.x2) * inv, (b.x1 - a.x1) * inv);
    }
    return g;
}

void FeSpace::basis(const Bary& l, std::span<double> out) const {
    if (degree_ == 1) {
        out[0] = l[0];
        out[1] = l[1];
        out[2] = l[2];
        return;
    }
    for (int i = 0; i < 3; ++i) out[i] = l[i] * (2.0 * l[i] - 1.0);
    for (int k = 0; k < 3; ++k) out[3 + k] = 4.0 * l[k] * l[(k + 1) % 3];
}

void FeSpace::basis_gradients(const ElementGeometry& geo, const Bary& l, std::span<Vec2> out) const {
    const auto& g = geo.grad_lambda;
    if (degree_ == 1) {
        out[0] = g[0];
        out[1] = g[1];
        out[2] = g[2];
        return;
    }
    for (int i = 0; i < 3; ++i) out[i] = (4.0 * l[i] - 1.0) * g[i];
    for (int k = 0; k < 3; ++k) {
        const int j = (k + 1) % 3;
        out[3 + k] = 4.0 * (l[j] * g[k] + l[k] * g[j]);
    }
}

SpacePtr build_space(MeshPtr mesh, int degree) { return std::make_shared<FeSpace>(std::move(mesh), degree); }

FeFunction::FeFunction(SpacePtr s, Vec c) : space(std::move(s)), coeffs(std::move(c)) {
    if (coeffs.size() != space->num_dofs()) fail(ErrorKind::InvalidArgument, "coefficient vector length mismatch");
}

FeFunction::FeFunction(SpacePtr s) : space(std::move(s)), coeffs(Vec::Zero(space->num_dofs())) {}

double eval_in_cell(const FeSpace& space, const Vec& coeffs, int t, const Bary& bary) {
    std::array<double, 6> phi{};
    space.basis(bary, phi);
    const auto dofs = space.cell_dofs(t);
    double v = 0.0;
    for (std::size_t k = 0; k < dofs.size(); ++k) v += coeffs[dofs[k]] * phi[k];
    return v;
}

Vec2 grad_in_cell(const FeSpace& space, const Vec& coeffs, int t, const Bary& bary) {
    std::array<Vec2, 6> dphi;
    space.basis_gradients(space.geometry(t), bary, dphi);
    const auto dofs = space.cell_dofs(t);
    Vec2 g = Vec2::Zero();
    for (std::size_t k = 0; k < dofs.size(); ++k) g += coeffs[dofs[k]] * dphi[k];
    return g;
}

double eval(const FeFunction& f, Point2 p) {
    const auto loc = f.space->mesh().locate(p);
    return eval_in_cell(*f.space, f.coeffs, loc.triangle, loc.bary);
}

Vec2 eval_grad(const FeFunction& f, Point2 p) {
    const auto loc = f.space->mesh().locate(p);
    return grad_in_cell(*f.space, f.coeffs, loc.triangle, loc.bary);
}

FeFunction interpolate_nodal(const SpacePtr& space, const ScalarField& g) {
    FeFunction f(space);
    const auto& coords = space->dof_coords();
    for (int i = 0; i < space->num_dofs(); ++i) {
        const double v = g(coords[i]);
        if (!std::isfinite(v))
            fail(ErrorKind::InvalidArgument, "non-finite value at dof " + std::to_string(i) + " (" +
                                                 format_double(coords[i].x1) + ", " + format_double(coords[i].x2) + ")");
        f.coeffs[i] = v;
    }
    return f;
}

void write_snapshot(std::ostream& out, const FeSpace& space, const Vec& coeffs) {
    out << "# lipfem-snapshot mesh " << hex64(space.mesh().checksum()) << " degree " << space.degree() << " dofs "
        << coeffs.size() << '\n';
    for (Eigen::Index i = 0; i < coeffs.size(); ++i) out << i << ' ' << format_double(coeffs[i]) << '\n';
}

Vec read_snapshot(std::istream& in, const FeSpace& space) {
    std::string line;
    if (!std::getline(in, line)) fail(ErrorKind::Io, "empty snapshot");
    std::istringstream header(line);
    std::string hash, w_mesh, w_degree, w_dofs, checksum;
    int degree = 0;
    long long n = -1;
    header >> hash >> w_mesh >> w_mesh >> checksum >> w_degree >> degree >> w_dofs >> n;
    if (hash != "#" || w_degree != "degree" || w_dofs != "dofs") fail(ErrorKind::Io, "bad snapshot header: " + line);
    if (checksum != hex64(space.mesh().checksum()) || degree != space.degree() || n != space.num_dofs())
        fail(ErrorKind::Io, "snapshot does not belong to this space");
    Vec v(n);
    for (long long i = 0; i < n; ++i) {
        if (!std::getline(in, line)) fail(ErrorKind::Io, "truncated snapshot");
        const auto parts = split(trim(line), ' ');
        if (parts.size() != 2 || parse_int(parts[0]) != i) fail(ErrorKind::Io, "bad snapshot line: " + line);
        v[i] = parse_double(parts[1]);
    }
    return v;
}

}  // namespace lipfem
