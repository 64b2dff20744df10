#include "lipfem/linalg.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "lipfem/error.hpp"
#include "lipfem/text.hpp"

namespace lipfem {

SpdSolver::SpdSolver(const SparseMatrix& a, double rtol) : a_(a), rtol_(rtol) {
    if (a.rows() != a.cols()) fail(ErrorKind::InvalidArgument, "solver needs a square matrix");
    ldlt_.compute(a_);
    if (ldlt_.info() != Eigen::Success) fail(ErrorKind::Solver, "sparse Cholesky factorization failed");
    for (Eigen::Index i = 0; i < ldlt_.vectorD().size(); ++i)
        if (!(ldlt_.vectorD()[i] > 0.0)) fail(ErrorKind::Solver, "matrix is not positive definite");
}

Vec SpdSolver::solve(const Vec& b) const {
    if (b.size() != a_.rows()) fail(ErrorKind::InvalidArgument, "right-hand side has wrong length");
    const double bnorm = b.norm();
    if (bnorm == 0.0) return Vec::Zero(b.size());
    Vec x = ldlt_.solve(b);
    for (int pass = 0; pass < 4; ++pass) {
        const Vec r = b - a_ * x;
        const double rel = r.norm() / bnorm;
        if (!std::isfinite(rel)) break;
        if (rel <= rtol_) return x;
        x += ldlt_.solve(r);
    }
    fail(ErrorKind::Solver, "linear solve did not reach relative residual " + format_double(rtol_));
}

DenseMatrix SpdSolver::solve(const DenseMatrix& b) const {
    DenseMatrix x(b.rows(), b.cols());
    for (Eigen::Index j = 0; j < b.cols(); ++j) x.col(j) = solve(Vec(b.col(j)));
    return x;
}

double max_abs(const SparseMatrix& a) {
    double m = 0.0;
    for (int k = 0; k < a.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(a, k); it; ++it) m = std::max(m, std::abs(it.value()));
    return m;
}

double symmetry_defect(const SparseMatrix& a) {
    const SparseMatrix t = a.transpose();
    const SparseMatrix d = a - t;
    const double scale = max_abs(a);
    return scale == 0.0 ? 0.0 : max_abs(d) / scale;
}

DenseMatrix to_dense(const SparseMatrix& a) { return DenseMatrix(a); }

void write_coo(std::ostream& out, const SparseMatrix& a) {
    out << "%%lipfem-coo rows " << a.rows() << " cols " << a.cols() << " nnz " << a.nonZeros() << '\n';
    for (int k = 0; k < a.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(a, k); it; ++it)
            out << it.row() << ' ' << it.col() << ' ' << format_double(it.value()) << '\n';
}

SparseMatrix read_coo(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) fail(ErrorKind::Io, "empty matrix file");
    std::istringstream header(line);
    std::string tag, w1, w2, w3;
    long long rows = -1, cols = -1, nnz = -1;
    header >> tag >> w1 >> rows >> w2 >> cols >> w3 >> nnz;
    if (tag != "%%lipfem-coo" || rows < 0 || cols < 0 || nnz < 0) fail(ErrorKind::Io, "bad matrix header: " + line);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(nnz);
    for (long long i = 0; i < nnz; ++i) {
        if (!std::getline(in, line)) fail(ErrorKind::Io, "truncated matrix file");
        const auto parts = split(trim(line), ' ');
        if (parts.size() != 3) fail(ErrorKind::Io, "bad matrix line: " + line);
        trips.emplace_back(static_cast<int>(parse_int(parts[0])), static_cast<int>(parse_int(parts[1])),
                           parse_double(parts[2]));
    }
    SparseMatrix a(rows, cols);
    a.setFromTriplets(trips.begin(), trips.end());
    return a;
}

}  // namespace lipfem
