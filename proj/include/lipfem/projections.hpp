#pragma once

#include <vector>

#include "lipfem/assembly.hpp"
#include "lipfem/fespace.hpp"
#include "lipfem/linalg.hpp"

namespace lipfem {

/// Element-supported representer of point evaluation at `source`:
/// int delta chi = chi(source) for every chi in the space. Realized as the
/// local dual basis on the (tie-rule) element containing the source.
struct RegularizedDelta {
    SpacePtr space;
    Point2 source;
    int element = -1;
    std::vector<double> local_coeffs;  // in the local Lagrange basis of `element`

    /// int_Omega delta chi for chi given by global coefficients.
    double pair(const Vec& chi) const;
    double value(const std::array<double, 3>& bary) const;
    /// Sup norm of the function and of its gradient over the element.
    double linf_norm() const;
    double linf_grad_norm() const;
};

RegularizedDelta regularized_delta(const SpacePtr& space, Point2 x0);

/// e_i = phi_i(x0)
Vec point_evaluation_vector(const FeSpace& space, Point2 x0);

FeFunction l2_project(const SpacePtr& space, const ScalarField& f, int quad_order = 0);
/// Solves K u = b with b_i = int (a grad w) . grad phi_i + c w phi_i using the
/// stiffness quadrature, so that discrete data is reproduced exactly.
FeFunction ritz_project(const SpacePtr& space, const CoefficientField& coeff, const ScalarField& w,
                        const VectorField& grad_w, int quad_order = 0);

/// L2 projection of the point mass at x0 (equivalently of the regularized delta).
FeFunction ph_delta(const SpacePtr& space, Point2 x0);
Vec ph_delta(const FeSpace& space, const SpdSolver& mass, Point2 x0);

/// Load vector b_i = int delta phi_i on a refinement of the delta's space.
/// `parent` maps fine triangles to coarse ones (see coarse_parent_map).
Vec delta_load_on_refinement(const RegularizedDelta& delta, const FeSpace& fine, const std::vector<int>& parent);

struct DecayFit {
    double amplitude = 0.0;      // A in |u(y)| <= A h^-2 exp(-|y - x0| / (C h))
    double rate_constant = 0.0;  // C
    int bins_used = 0;
};

/// Fits the exponential envelope of |u| around x0 over dof distances, using
/// the per-bin maxima (bins one mesh size wide).
DecayFit fit_delta_decay(const FeFunction& u, Point2 x0, double h);

}  // namespace lipfem
