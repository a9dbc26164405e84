#pragma once
//
// Factored matrices A ~ U V^T and their recompression.
//

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace distlr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Truncation {
    Absolute,        // drop singular values <= tol
    RelativeToSigma1 // drop singular values <= tol * sigma_1
};

struct LowRank {
    Matrix U; // rows x r
    Matrix V; // cols x r

    Eigen::Index rank() const { return U.cols(); }
    Matrix       dense() const { return U * V.transpose(); }

    static LowRank zero(Eigen::Index rows, Eigen::Index cols) { return {Matrix(rows, 0), Matrix(cols, 0)}; }
};

namespace detail {

struct ThinQR {
    Matrix Q;
    Matrix R;
};

inline ThinQR thin_qr(const Matrix &A) {
    const Eigen::Index           k = std::min(A.rows(), A.cols());
    Eigen::HouseholderQR<Matrix> qr(A);
    ThinQR                       out;
    out.Q = qr.householderQ() * Matrix::Identity(A.rows(), k);
    out.R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    return out;
}

} // namespace detail

inline Eigen::Index truncation_rank(const Vector &sigma, double tol, Truncation rule) {
    if (sigma.size() == 0)
        return 0;
    const double threshold = rule == Truncation::Absolute ? tol : tol * sigma(0);
    Eigen::Index r         = 0;
    while (r < sigma.size() && sigma(r) > threshold)
        ++r;
    return r;
}

// Orthogonalise both factors, take the SVD of the small core and keep the
// singular triplets above the threshold. The spectral error is the largest
// dropped singular value. The singular values are returned in U's columns:
// U = Q_u W S, V = Q_v Z.
inline LowRank recompress(const Matrix &U, const Matrix &V, double tol, Truncation rule, Vector *sigma_out = nullptr) {
    const Eigen::Index rows = U.rows();
    const Eigen::Index cols = V.rows();
    if (U.cols() == 0) {
        if (sigma_out)
            sigma_out->resize(0);
        return LowRank::zero(rows, cols);
    }
    const auto qu   = detail::thin_qr(U);
    const auto qv   = detail::thin_qr(V);
    Matrix     core = qu.R * qv.R.transpose();

    Eigen::JacobiSVD<Matrix> svd(core, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector         &sigma = svd.singularValues();
    if (sigma_out)
        *sigma_out = sigma;
    const Eigen::Index r = truncation_rank(sigma, tol, rule);

    LowRank out;
    out.U = qu.Q * (svd.matrixU().leftCols(r) * sigma.head(r).asDiagonal());
    out.V = qv.Q * svd.matrixV().leftCols(r);
    return out;
}

inline LowRank recompress(const LowRank &a, double tol, Truncation rule) { return recompress(a.U, a.V, tol, rule); }

// Row-wise Khatri-Rao product: the entrywise product of two factored
// matrices has factors (u_i .* u'_j, v_i .* v'_j) for all pairs (i, j).
inline LowRank hadamard(const LowRank &a, const LowRank &b) {
    LowRank out;
    out.U.resize(a.U.rows(), a.rank() * b.rank());
    out.V.resize(a.V.rows(), a.rank() * b.rank());
    for (Eigen::Index i = 0; i < a.rank(); ++i)
        for (Eigen::Index j = 0; j < b.rank(); ++j) {
            out.U.col(i * b.rank() + j) = a.U.col(i).cwiseProduct(b.U.col(j));
            out.V.col(i * b.rank() + j) = a.V.col(i).cwiseProduct(b.V.col(j));
        }
    return out;
}

// [a, s * b] concatenated factors, i.e. a + s b.
inline LowRank add(const LowRank &a, const LowRank &b, double s = 1.0) {
    LowRank out;
    out.U.resize(a.U.rows(), a.rank() + b.rank());
    out.V.resize(a.V.rows(), a.rank() + b.rank());
    out.U << a.U, s * b.U;
    out.V << a.V, b.V;
    return out;
}

} // namespace distlr
