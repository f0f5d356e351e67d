#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "nmcount/linalg.hpp"
#include "oracles.hpp"

using namespace nmcount;

namespace {

CMatrix pauli_x() {
    CMatrix m = CMatrix::Zero(2, 2);
    m(0, 1) = m(1, 0) = 1.0;
    return m;
}

CMatrix lowering() {
    CMatrix m = CMatrix::Zero(2, 2);
    m(1, 0) = 1.0;  // |g><e| with basis (e, g)
    return m;
}

/// Column-stacked Lindblad generator assembled from vectorize_superop.
CMatrix lindblad(const CMatrix& h, const CMatrix& j, double g) {
    const Eigen::Index d = h.rows();
    const CMatrix id = CMatrix::Identity(d, d);
    const CMatrix jdj = j.adjoint() * j;
    return -kI * (vectorize_superop(h, id) - vectorize_superop(id, h)) +
           g * (vectorize_superop(j, j.adjoint()) -
                0.5 * (vectorize_superop(jdj, id) + vectorize_superop(id, jdj)));
}

}  // namespace

TEST(MatExp, ZeroGeneratorGivesIdentity) {
    for (Eigen::Index d : {1, 2, 5, 16}) {
        const CMatrix z = CMatrix::Zero(d, d);
        EXPECT_TRUE(mat_exp(z, 3.7, ExpMode::unitary).isApprox(CMatrix::Identity(d, d), 1e-15));
        EXPECT_TRUE(mat_exp(z, -1.2, ExpMode::general).isApprox(CMatrix::Identity(d, d), 1e-15));
    }
}

TEST(MatExp, PauliXQuarterTurn) {
    const CMatrix u = mat_exp(pauli_x(), std::numbers::pi / 2, ExpMode::unitary);
    const CMatrix expected = -kI * pauli_x();
    EXPECT_LT((u - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(MatExp, GeneralModeMatchesClosedFormPauli) {
    // exp(-i theta sigma_x) through the general route as well.
    const double theta = 0.83;
    const CMatrix u = mat_exp(-kI * pauli_x(), theta, ExpMode::general);
    const CMatrix expected = std::cos(theta) * CMatrix::Identity(2, 2) - kI * std::sin(theta) * pauli_x();
    EXPECT_LT((u - expected).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(MatExp, NilpotentGeneral) {
    CMatrix n = CMatrix::Zero(2, 2);
    n(0, 1) = 1.0;
    const CMatrix e = mat_exp(n, 2.5, ExpMode::general);
    EXPECT_NEAR(std::abs(e(0, 1) - Complex(2.5)), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(e(0, 0) - Complex(1.0)), 0.0, 1e-14);
}

TEST(MatExp, HermitianGivesUnitary) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const CMatrix h = oracle::random_hermitian(rng, 1 + trial % 9);
        const double t = 0.3 * trial - 2.0;
        const CMatrix u = mat_exp(h, t, ExpMode::unitary);
        const CMatrix defect = u.adjoint() * u - CMatrix::Identity(h.rows(), h.rows());
        EXPECT_LT(defect.cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(MatExp, SemigroupProperty) {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 10; ++trial) {
        const CMatrix h = oracle::random_hermitian(rng, 4);
        const CMatrix a = 0.4 * oracle::random_matrix(rng, 4, 4);
        const double t1 = 0.37 + 0.1 * trial;
        const double t2 = 0.91 - 0.05 * trial;
        for (auto [m, mode] : {std::pair{h, ExpMode::unitary}, std::pair{a, ExpMode::general}}) {
            const CMatrix lhs = mat_exp(m, t1, mode) * mat_exp(m, t2, mode);
            const CMatrix rhs = mat_exp(m, t1 + t2, mode);
            EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-10);
        }
    }
}

TEST(MatExp, Errors) {
    EXPECT_THROW(mat_exp(CMatrix::Zero(2, 3), 1.0, ExpMode::general), std::invalid_argument);
    EXPECT_THROW(mat_exp(CMatrix::Zero(17, 17), 1.0, ExpMode::general), std::invalid_argument);
    EXPECT_THROW(mat_exp(lowering(), 1.0, ExpMode::unitary), std::invalid_argument);
}

TEST(EigenSpectrum, DiagonalOrdering) {
    CMatrix a = CMatrix::Zero(3, 3);
    a(0, 0) = 1.0;
    a(1, 1) = -2.0;
    a(2, 2) = 3.0;
    const auto pairs = eigen_spectrum(a);
    ASSERT_EQ(pairs.size(), 3u);
    EXPECT_NEAR(pairs[0].value.real(), 3.0, 1e-14);
    EXPECT_NEAR(pairs[1].value.real(), 1.0, 1e-14);
    EXPECT_NEAR(pairs[2].value.real(), -2.0, 1e-14);
}

TEST(EigenSpectrum, RandomResidualsAndTrace) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const CMatrix a = oracle::random_matrix(rng, 5, 5);
        const auto pairs = eigen_spectrum(a);
        Complex sum = 0.0;
        for (std::size_t k = 0; k < pairs.size(); ++k) {
            const auto& p = pairs[k];
            EXPECT_LT((a * p.vector - p.value * p.vector).norm() / p.vector.norm(), 1e-9);
            if (k > 0) {
                EXPECT_GE(pairs[k - 1].value.real(), p.value.real());
            }
            sum += p.value;
        }
        EXPECT_LT(std::abs(sum - a.trace()), 1e-9);
    }
}

TEST(EigenSpectrum, LiouvillianHasStationaryMode) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 5; ++trial) {
        const CMatrix h = oracle::random_hermitian(rng, 3);
        CMatrix j = CMatrix::Zero(3, 3);
        j(2, 0) = 1.0;
        const auto pairs = eigen_spectrum(lindblad(h, j, 0.7));
        EXPECT_LT(std::abs(pairs.front().value.real()), 1e-10);
    }
}

TEST(EigenSpectrum, DimensionLimit) {
    EXPECT_THROW(eigen_spectrum(CMatrix::Identity(101, 101)), std::invalid_argument);
    EXPECT_NO_THROW(eigen_spectrum(CMatrix::Identity(81, 81)));
}

TEST(NullVector, DiagonalKernel) {
    CMatrix a = CMatrix::Zero(2, 2);
    a(1, 1) = -1.0;
    const CVector v = null_vector(a);
    EXPECT_NEAR(std::abs(v(0) - Complex(1.0)), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(v(1)), 0.0, 1e-14);
}

TEST(NullVector, UndrivenDecayIsGround) {
    const CMatrix l = lindblad(CMatrix::Zero(2, 2), lowering(), 1.0);
    CVector v = null_vector(l);
    const CMatrix rho = unvec(v, 2) / unvec(v, 2).trace();
    EXPECT_NEAR(std::abs(rho(1, 1) - Complex(1.0)), 0.0, 1e-12);
    EXPECT_NEAR(rho.cwiseAbs().sum(), 1.0, 1e-12);
}

TEST(NullVector, DrivenTwoLevelSteadyStateMatchesLongTimeIntegration) {
    const double g = 0.95;
    const double omega = g / 4.0;
    const CMatrix h = omega * pauli_x();
    CVector v = null_vector(lindblad(h, lowering(), g));
    const CMatrix rho = unvec(v, 2) / unvec(v, 2).trace();

    CMatrix rho0 = CMatrix::Zero(2, 2);
    rho0(1, 1) = 1.0;
    const CMatrix late = oracle::integrate_lindblad(h, lowering(), g, rho0, 400.0, 0.01);
    EXPECT_NEAR(late(0, 0).real(), 1.0 / 6.0, 1e-9);
    EXPECT_NEAR(rho(0, 0).real(), late(0, 0).real(), 1e-9);
    EXPECT_NEAR(rho(0, 0).real(), 1.0 / 6.0, 1e-9);
}

TEST(NullVector, ReportsSmallestEigenvalue) {
    CMatrix a = CMatrix::Zero(2, 2);
    a(0, 0) = -0.5;
    a(1, 1) = -1.0;
    try {
        null_vector(a);
        FAIL() << "expected NumericalError";
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("-0.5"), std::string::npos) << e.what();
    }
}

TEST(VectorizeSuperop, IdentityPair) {
    for (Eigen::Index d : {1, 2, 3}) {
        const CMatrix id = CMatrix::Identity(d, d);
        EXPECT_TRUE(vectorize_superop(id, id).isApprox(CMatrix::Identity(d * d, d * d)));
    }
}

TEST(VectorizeSuperop, SingleJump) {
    CMatrix ee = CMatrix::Zero(2, 2);
    ee(0, 0) = 1.0;
    CMatrix gg = CMatrix::Zero(2, 2);
    gg(1, 1) = 1.0;
    const CVector out = vectorize_superop(lowering(), lowering().adjoint()) * vec(ee);
    EXPECT_LT((out - vec(gg)).norm(), 1e-15);
}

TEST(VectorizeSuperop, MatchesTripleProduct) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        const CMatrix a = oracle::random_matrix(rng, 3, 3);
        const CMatrix b = oracle::random_matrix(rng, 3, 3);
        const CMatrix rho = oracle::random_matrix(rng, 3, 3);
        const CMatrix direct = a * rho * b;
        const CMatrix via = unvec(vectorize_superop(a, b) * vec(rho), 3);
        EXPECT_LT((direct - via).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(VectorizeSuperop, Bilinear) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 5; ++trial) {
        const CMatrix a1 = oracle::random_matrix(rng, 3, 3);
        const CMatrix a2 = oracle::random_matrix(rng, 3, 3);
        const CMatrix b1 = oracle::random_matrix(rng, 3, 3);
        const CMatrix b2 = oracle::random_matrix(rng, 3, 3);
        const Complex k{0.3, -1.1};
        EXPECT_LT((vectorize_superop(a1 + k * a2, b1) - vectorize_superop(a1, b1) -
                   k * vectorize_superop(a2, b1)).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((vectorize_superop(a1, b1 + k * b2) - vectorize_superop(a1, b1) -
                   k * vectorize_superop(a1, b2)).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(VectorizeSuperop, DimensionMismatch) {
    EXPECT_THROW(vectorize_superop(CMatrix::Identity(2, 2), CMatrix::Identity(3, 3)),
                 std::invalid_argument);
    EXPECT_THROW(vectorize_superop(CMatrix::Zero(2, 3), CMatrix::Identity(2, 2)),
                 std::invalid_argument);
}

TEST(Vec, ColumnStacking) {
    CMatrix m(2, 2);
    m << 1.0, 2.0, 3.0, 4.0;
    const CVector v = vec(m);
    EXPECT_EQ(v(1), Complex(3.0));
    EXPECT_EQ(v(2), Complex(2.0));
    EXPECT_TRUE(unvec(v, 2).isApprox(m));
    EXPECT_EQ((trace_functional(2) * v)(0), Complex(5.0));
}
