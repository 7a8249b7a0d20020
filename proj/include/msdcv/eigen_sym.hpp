#pragma once

#include "msdcv/common.hpp"

namespace msdcv {

/// Symmetric eigendecomposition with project conventions: eigenvalues sorted
/// descending, each eigenvector oriented so its largest-magnitude entry is
/// positive (first such entry on ties).
struct SymEigen {
    std::vector<double> values; // descending
    Matrix vectors;             // column k pairs with values[k]
};

inline void orient_column(Matrix& m, Eigen::Index col) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const double a = std::abs(m(i, col));
        if (a > best) {
            best = a;
            arg = i;
        }
    }
    if (m(arg, col) < 0.0) m.col(col) = -m.col(col);
}

inline SymEigen sym_eigen(const Matrix& a) {
    require(a.rows() == a.cols() && a.rows() > 0, "eigen: matrix not square");
    Eigen::SelfAdjointEigenSolver<Matrix> solver(a);
    require(solver.info() == Eigen::Success, "eigen: decomposition failed to converge");
    const Eigen::Index n = a.rows();
    SymEigen out;
    out.values.resize(static_cast<std::size_t>(n));
    out.vectors.resize(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        // Eigen returns ascending order
        out.values[static_cast<std::size_t>(k)] = solver.eigenvalues()(n - 1 - k);
        out.vectors.col(k) = solver.eigenvectors().col(n - 1 - k);
        orient_column(out.vectors, k);
    }
    return out;
}

} // namespace msdcv
