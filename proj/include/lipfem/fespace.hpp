#pragma once

#include <Eigen/Core>
#include <array>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "lipfem/mesh.hpp"

namespace lipfem {

using Vec = Eigen::VectorXd;
using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

using ScalarField = std::function<double(Point2)>;
using VectorField = std::function<Vec2(Point2)>;

/// Symmetric rule on the reference triangle; weights are normalized so that
/// they sum to one (multiply by the element area).
struct QuadratureRule {
    int degree = 0;
    std::vector<std::array<double, 3>> points;
    std::vector<double> weights;
};

/// Positive-weight rules exact up to the requested polynomial order (1..6).
const QuadratureRule& quadrature(int order);

/// Mean of x^a y^b over the reference triangle {x, y >= 0, x + y <= 1}.
double reference_monomial_mean(int a, int b);

struct ElementGeometry {
    double area = 0.0;
    std::array<Vec2, 3> grad_lambda;
};

/// Continuous Lagrange space of degree 1 or 2. Degree 2 numbers vertex dofs
/// first (matching mesh vertices), then one dof per mesh edge.
class FeSpace {
public:
    FeSpace(MeshPtr mesh, int degree);

    const Mesh& mesh() const { return *mesh_; }
    const MeshPtr& mesh_ptr() const { return mesh_; }
    int degree() const { return degree_; }
    int num_dofs() const { return static_cast<int>(dof_coords_.size()); }
    int dofs_per_cell() const { return degree_ == 1 ? 3 : 6; }
    std::span<const int> cell_dofs(int t) const {
        return {cell_dofs_.data() + static_cast<std::size_t>(t) * dofs_per_cell(),
                static_cast<std::size_t>(dofs_per_cell())};
    }
    const std::vector<Point2>& dof_coords() const { return dof_coords_; }

    ElementGeometry geometry(int t) const;
    /// Local basis values at a barycentric point; `out` has dofs_per_cell() entries.
    void basis(const std::array<double, 3>& bary, std::span<double> out) const;
    void basis_gradients(const ElementGeometry& geo, const std::array<double, 3>& bary, std::span<Vec2> out) const;

private:
    MeshPtr mesh_;
    int degree_;
    std::vector<int> cell_dofs_;
    std::vector<Point2> dof_coords_;
};

using SpacePtr = std::shared_ptr<const FeSpace>;

SpacePtr build_space(MeshPtr mesh, int degree);

struct FeFunction {
    SpacePtr space;
    Vec coeffs;

    FeFunction() = default;
    FeFunction(SpacePtr s, Vec c);
    explicit FeFunction(SpacePtr s);
};

double eval(const FeFunction& f, Point2 p);
Vec2 eval_grad(const FeFunction& f, Point2 p);

/// Evaluation inside a given cell, bypassing point location.
double eval_in_cell(const FeSpace& space, const Vec& coeffs, int t, const std::array<double, 3>& bary);
Vec2 grad_in_cell(const FeSpace& space, const Vec& coeffs, int t, const std::array<double, 3>& bary);

FeFunction interpolate_nodal(const SpacePtr& space, const ScalarField& g);

/// Text snapshot: a `# lipfem-snapshot` header naming mesh checksum, degree and
/// dof count, then one `dof value` line per dof.
void write_snapshot(std::ostream& out, const FeSpace& space, const Vec& coeffs);
Vec read_snapshot(std::istream& in, const FeSpace& space);

}  // namespace lipfem
