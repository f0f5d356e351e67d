#pragma once

// Dense complex linear algebra for few-level systems and their
// superoperators.
//
// Vectorization convention (used everywhere in nmcount): column stacking,
//     vec(rho)[i + d*j] = rho(i, j),
// so that vec(A * rho * B) = (B^T (x) A) vec(rho).

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "nmcount/errors.hpp"

namespace nmcount {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline constexpr Complex kI{0.0, 1.0};

inline constexpr Eigen::Index kMaxExpDim = 16;
inline constexpr Eigen::Index kMaxEigenDim = 100;

enum class ExpMode {
    unitary,  ///< exp(-i A t), A Hermitian
    general,  ///< exp(A t)
};

struct EigenPair {
    Complex value;
    CVector vector;
};

inline bool is_square(const CMatrix& a) { return a.rows() == a.cols() && a.rows() > 0; }

inline bool all_finite(const CMatrix& a) { return a.allFinite(); }

inline double hermiticity_defect(const CMatrix& a) {
    if (!is_square(a)) {
        throw std::invalid_argument("hermiticity_defect: matrix is not square");
    }
    return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

inline bool is_hermitian(const CMatrix& a, double tol = 1e-12) {
    return is_square(a) && hermiticity_defect(a) < tol;
}

namespace detail {

inline void require_square(const CMatrix& a, const char* where) {
    if (!is_square(a)) {
        std::ostringstream os;
        os << where << ": expected a non-empty square matrix, got " << a.rows() << "x" << a.cols();
        throw std::invalid_argument(os.str());
    }
}

inline void require_finite(const CMatrix& a, const char* where) {
    if (!a.allFinite()) {
        throw NumericalError(std::string(where) + ": result contains NaN or Inf");
    }
}

}  // namespace detail

/// Kronecker product a (x) b.
inline CMatrix kron(const CMatrix& a, const CMatrix& b) {
    CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

/// Column-stacked vector of a square matrix.
inline CVector vec(const CMatrix& rho) {
    CVector v(rho.size());
    const Eigen::Index d = rho.rows();
    for (Eigen::Index j = 0; j < rho.cols(); ++j) {
        for (Eigen::Index i = 0; i < d; ++i) {
            v(i + d * j) = rho(i, j);
        }
    }
    return v;
}

/// Inverse of vec() for a dim x dim matrix.
inline CMatrix unvec(const CVector& v, Eigen::Index dim) {
    if (v.size() != dim * dim) {
        throw std::invalid_argument("unvec: vector length is not dim^2");
    }
    CMatrix rho(dim, dim);
    for (Eigen::Index j = 0; j < dim; ++j) {
        for (Eigen::Index i = 0; i < dim; ++i) {
            rho(i, j) = v(i + dim * j);
        }
    }
    return rho;
}

/// Row vector t with t * vec(rho) = Tr(rho).
inline Eigen::RowVectorXcd trace_functional(Eigen::Index dim) {
    Eigen::RowVectorXcd t = Eigen::RowVectorXcd::Zero(dim * dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
        t(i + dim * i) = 1.0;
    }
    return t;
}

/// Matrix M with M * vec(rho) = vec(left * rho * right).
inline CMatrix vectorize_superop(const CMatrix& left, const CMatrix& right) {
    detail::require_square(left, "vectorize_superop(left)");
    detail::require_square(right, "vectorize_superop(right)");
    if (left.rows() != right.rows()) {
        throw std::invalid_argument("vectorize_superop: left and right differ in dimension");
    }
    return kron(right.transpose(), left);
}

/// Matrix exponential. In unitary mode returns exp(-i a t) and requires a
/// Hermitian; in general mode returns exp(a t) by Pade scaling-and-squaring.
inline CMatrix mat_exp(const CMatrix& a, double t, ExpMode mode) {
    detail::require_square(a, "mat_exp");
    if (a.rows() > kMaxExpDim) {
        std::ostringstream os;
        os << "mat_exp: dimension " << a.rows() << " exceeds the supported maximum " << kMaxExpDim;
        throw std::invalid_argument(os.str());
    }
    if (!std::isfinite(t)) {
        throw std::invalid_argument("mat_exp: time must be finite");
    }
    CMatrix out;
    if (mode == ExpMode::unitary) {
        if (!is_hermitian(a)) {
            throw std::invalid_argument("mat_exp: unitary mode requires a Hermitian generator");
        }
        // Symmetrize so the solver sees an exactly Hermitian input.
        const CMatrix h = 0.5 * (a + a.adjoint());
        Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
        if (es.info() != Eigen::Success) {
            throw NumericalError("mat_exp: Hermitian eigendecomposition failed");
        }
        CVector phases(h.rows());
        for (Eigen::Index k = 0; k < h.rows(); ++k) {
            phases(k) = std::exp(-kI * es.eigenvalues()(k) * t);
        }
        out = es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
    } else {
        const CMatrix at = a * t;
        out = at.exp();
    }
    detail::require_finite(out, "mat_exp");
    return out;
}

/// Full eigendecomposition of a dense complex matrix (Schur based), sorted
/// by descending real part, ties broken by descending imaginary part.
inline std::vector<EigenPair> eigen_spectrum(const CMatrix& a) {
    detail::require_square(a, "eigen_spectrum");
    if (a.rows() > kMaxEigenDim) {
        std::ostringstream os;
        os << "eigen_spectrum: dimension " << a.rows() << " exceeds the supported maximum "
           << kMaxEigenDim;
        throw std::invalid_argument(os.str());
    }
    if (!a.allFinite()) {
        throw std::invalid_argument("eigen_spectrum: input contains NaN or Inf");
    }

    Eigen::ComplexEigenSolver<CMatrix> es(a, /*computeEigenvectors=*/true);
    if (es.info() != Eigen::Success) {
        std::ostringstream os;
        os << "eigen_spectrum: complex Schur iteration did not converge (dim " << a.rows()
           << ", |A|_F = " << a.norm() << ")";
        throw NumericalError(os.str());
    }

    const double scale = std::max(1.0, a.norm());
    std::vector<EigenPair> pairs;
    pairs.reserve(static_cast<std::size_t>(a.rows()));
    for (Eigen::Index k = 0; k < a.rows(); ++k) {
        CVector v = es.eigenvectors().col(k);
        const double nv = v.norm();
        const Complex lam = es.eigenvalues()(k);
        if (!(nv > 0.0) || !std::isfinite(nv)) {
            throw NumericalError("eigen_spectrum: degenerate eigenvector returned");
        }
        v /= nv;
        const double residual = (a * v - lam * v).norm();
        if (!(residual < 1e-9 * scale)) {
            std::ostringstream os;
            os << "eigen_spectrum: eigenpair " << k << " (lambda = " << lam
               << ") has residual " << residual;
            throw NumericalError(os.str());
        }
        pairs.push_back({lam, std::move(v)});
    }
    std::stable_sort(pairs.begin(), pairs.end(), [](const EigenPair& l, const EigenPair& r) {
        if (l.value.real() != r.value.real()) {
            return l.value.real() > r.value.real();
        }
        return l.value.imag() > r.value.imag();
    });
    return pairs;
}

/// Unit-norm vector spanning the (numerical) kernel of a. The phase is fixed
/// so that the largest-magnitude component is real and positive.
inline CVector null_vector(const CMatrix& a, double tol = 1e-8) {
    const auto pairs = eigen_spectrum(a);
    auto dist = [](const Complex& z) { return std::abs(z.real()) + std::abs(z.imag()); };
    const auto best = std::min_element(pairs.begin(), pairs.end(),
                                       [&](const EigenPair& l, const EigenPair& r) {
                                           return dist(l.value) < dist(r.value);
                                       });
    if (dist(best->value) >= tol) {
        std::ostringstream os;
        os << "null_vector: no eigenvalue within " << tol << " of zero; smallest is "
           << best->value;
        throw NumericalError(os.str());
    }
    CVector v = best->vector;
    Eigen::Index imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    v *= std::conj(v(imax)) / std::abs(v(imax));
    v /= v.norm();

    const double residual = (a * v).norm();
    if (!(residual < 1e-9 * std::max(1.0, a.norm()))) {
        std::ostringstream os;
        os << "null_vector: kernel residual " << residual << " exceeds tolerance";
        throw NumericalError(os.str());
    }
    return v;
}

/// Largest singular value.
inline double operator_norm(const CMatrix& a) {
    if (a.size() == 0) {
        return 0.0;
    }
    Eigen::JacobiSVD<CMatrix> svd(a);
    return svd.singularValues()(0);
}

}  // namespace nmcount
