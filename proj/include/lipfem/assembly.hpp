#pragma once

#include <functional>
#include <string>
#include <vector>

#include "lipfem/fespace.hpp"
#include "lipfem/linalg.hpp"

namespace lipfem {

/// Symmetric diffusion tensor a(x), reaction c(x) and the bounds they are
/// certified against: lambda1 |xi|^2 <= xi^T a xi <= lambda2 |xi|^2, c >= c0.
struct CoefficientField {
    std::function<Mat2(Point2)> a;
    std::function<double(Point2)> c;
    double lambda1 = 1.0;
    double lambda2 = 1.0;
    double c0 = 0.0;
    double lipschitz_bound = 0.0;
    std::string name;
};

/// Built-in fields: identity, smooth_aniso, lipschitz_kink, lipschitz_radial.
/// Declared bounds hold on [-1, 1]^2, which contains both built-in domains.
CoefficientField coefficient_library(const std::string& name);
std::vector<std::string> coefficient_names();

/// Quadrature order used for mass/stiffness when none is requested: 2 for P1,
/// 4 for P2.
int default_assembly_order(const FeSpace& space);

/// Verifies symmetry, ellipticity and the lower bound of c on every
/// quadrature point of the mesh; throws ErrorKind::Ellipticity naming the point.
void check_coefficient(const FeSpace& space, const CoefficientField& coeff, int quad_order);

SparseMatrix assemble_mass(const FeSpace& space);
/// K_ij = sum_T int_T (a grad phi_j) . grad phi_i + c phi_j phi_i; quad_order 0 selects the default.
SparseMatrix assemble_stiffness(const FeSpace& space, const CoefficientField& coeff, int quad_order = 0);

/// b_i = int f phi_i
Vec assemble_load(const FeSpace& space, const ScalarField& f, int quad_order);
/// b_i = int g . grad phi_i (the +(g, grad v) contribution of the weak form)
Vec assemble_div_load(const FeSpace& space, const VectorField& g, int quad_order);

/// Tabulated quadrature data for repeated load assembly (time-dependent data).
class LoadAssembler {
public:
    LoadAssembler(SpacePtr space, int quad_order);

    Vec load(const ScalarField& f) const;
    Vec div_load(const VectorField& g) const;
    /// Same as load() for values already sampled at points().
    Vec load_from_samples(const std::vector<double>& values) const;

    const std::vector<Point2>& points() const { return points_; }
    const std::vector<double>& weights() const { return weights_; }
    const FeSpace& space() const { return *space_; }

private:
    SpacePtr space_;
    int per_cell_ = 0;
    int nq_ = 0;
    std::vector<Point2> points_;
    std::vector<double> weights_;        // area * rule weight
    std::vector<double> phi_;            // [point][local dof]
    std::vector<Vec2> dphi_;             // [point][local dof]
};

/// Sparse map from element-wise constant vector fields (g_T stored as
/// [g1_0, g2_0, g1_1, ...]) to the load b_i = int g . grad phi_i.
SparseMatrix assemble_div_operator(const FeSpace& space);

}  // namespace lipfem
