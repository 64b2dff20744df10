#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <iosfwd>

namespace lipfem {

using Vec = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;
/// Compressed-row storage.
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Sparse Cholesky (LDL^T) solver for symmetric positive definite systems.
/// Every solve is checked against `rtol` on the relative residual and refined
/// iteratively when needed; failure raises ErrorKind::Solver.
class SpdSolver {
public:
    explicit SpdSolver(const SparseMatrix& a, double rtol = 1e-12);

    Vec solve(const Vec& b) const;
    DenseMatrix solve(const DenseMatrix& b) const;
    Eigen::Index dim() const { return a_.rows(); }
    const Eigen::SparseMatrix<double>& matrix() const { return a_; }

private:
    Eigen::SparseMatrix<double> a_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
    double rtol_;
};

/// max |A - A^T| / max |A|
double symmetry_defect(const SparseMatrix& a);
double max_abs(const SparseMatrix& a);

DenseMatrix to_dense(const SparseMatrix& a);

/// Coordinate text format: `%%lipfem-coo rows R cols C nnz Z` then `row col value`.
void write_coo(std::ostream& out, const SparseMatrix& a);
SparseMatrix read_coo(std::istream& in);

}  // namespace lipfem
