#include "fractune/state_space.hpp"

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include "fractune/error.hpp"

namespace fractune {

using Eigen::MatrixXd;
using Eigen::VectorXd;

cplx StateSpace::operator()(cplx s) const
{
    const auto n = order();
    if (n == 0)
        return D;
    Eigen::MatrixXcd M = s * Eigen::MatrixXcd::Identity(n, n) - A.cast<cplx>();
    Eigen::VectorXcd x = M.partialPivLu().solve(B.cast<cplx>());
    return (C.cast<cplx>() * x)(0) + D;
}

StateSpace realize(const RationalTF& tf)
{
    if (!tf.proper())
        throw DomainError("realize: improper transfer function");
    const Poly& den = tf.den();
    const int n = static_cast<int>(den.size()) - 1;
    const double lead = den.front();
    Poly b(n + 1, 0.0);
    const Poly& num = tf.num();
    for (size_t i = 0; i < num.size(); ++i)
        b[n + 1 - num.size() + i] = num[i] / lead;

    StateSpace ss;
    ss.D = b[0];
    ss.A = MatrixXd::Zero(n, n);
    ss.B = VectorXd::Zero(n);
    ss.C = Eigen::RowVectorXd::Zero(n);
    if (n == 0)
        return ss;
    for (int i = 0; i < n; ++i) {
        double a = den[i + 1] / lead;
        ss.A(0, i) = -a;
        ss.C(i) = b[i + 1] - a * ss.D;
    }
    for (int i = 1; i < n; ++i)
        ss.A(i, i - 1) = 1.0;
    ss.B(0) = 1.0;
    return ss;
}

StateSpace series(const StateSpace& f, const StateSpace& g)
{
    const auto n1 = f.order(), n2 = g.order();
    StateSpace r;
    r.A = MatrixXd::Zero(n1 + n2, n1 + n2);
    r.A.topLeftCorner(n1, n1) = f.A;
    r.A.bottomLeftCorner(n2, n1) = g.B * f.C;
    r.A.bottomRightCorner(n2, n2) = g.A;
    r.B.resize(n1 + n2);
    r.B << f.B, g.B * f.D;
    r.C.resize(n1 + n2);
    r.C << g.D * f.C, g.C;
    r.D = g.D * f.D;
    return r;
}

StateSpace parallel(const StateSpace& a, const StateSpace& b)
{
    const auto n1 = a.order(), n2 = b.order();
    StateSpace r;
    r.A = MatrixXd::Zero(n1 + n2, n1 + n2);
    r.A.topLeftCorner(n1, n1) = a.A;
    r.A.bottomRightCorner(n2, n2) = b.A;
    r.B.resize(n1 + n2);
    r.B << a.B, b.B;
    r.C.resize(n1 + n2);
    r.C << a.C, b.C;
    r.D = a.D + b.D;
    return r;
}

MatrixXd lyapunov(const MatrixXd& A, const MatrixXd& Q)
{
    const auto n = A.rows();
    if (A.cols() != n || Q.rows() != n || Q.cols() != n)
        throw ParameterError("lyapunov: dimension mismatch");
    if (n == 0)
        return MatrixXd(0, 0);
    Eigen::ComplexSchur<Eigen::MatrixXcd> schur(A.cast<cplx>());
    if (schur.info() != Eigen::Success)
        throw EvaluationError("lyapunov: Schur decomposition failed");
    const Eigen::MatrixXcd& T = schur.matrixT();
    const Eigen::MatrixXcd& U = schur.matrixU();
    Eigen::MatrixXcd Qt = U.adjoint() * Q.cast<cplx>() * U;

    // T Y + Y Tᴴ = −Q̃, columns from the right
    Eigen::MatrixXcd Y = Eigen::MatrixXcd::Zero(n, n);
    for (Eigen::Index j = n - 1; j >= 0; --j) {
        Eigen::VectorXcd rhs = -Qt.col(j);
        for (Eigen::Index k = j + 1; k < n; ++k)
            rhs -= Y.col(k) * std::conj(T(j, k));
        Eigen::MatrixXcd M = T;
        M.diagonal().array() += std::conj(T(j, j));
        for (Eigen::Index i = 0; i < n; ++i)
            if (std::abs(M(i, i)) < 1e-300)
                throw DomainError("lyapunov: A has eigenvalues symmetric about the imaginary axis");
        Y.col(j) = M.triangularView<Eigen::Upper>().solve(rhs);
    }
    MatrixXd X = (U * Y * U.adjoint()).real();
    return 0.5 * (X + X.transpose());
}

ZohDiscrete zoh(const MatrixXd& A, const MatrixXd& B, double h)
{
    const auto n = A.rows(), m = B.cols();
    MatrixXd M = MatrixXd::Zero(n + m, n + m);
    M.topLeftCorner(n, n) = A * h;
    M.topRightCorner(n, m) = B * h;
    MatrixXd E = M.exp();
    return {E.topLeftCorner(n, n), E.topRightCorner(n, m)};
}

FohDiscrete foh(const MatrixXd& A, const VectorXd& B, double h)
{
    const auto n = A.rows();
    MatrixXd M = MatrixXd::Zero(n + 2, n + 2);
    M.topLeftCorner(n, n) = A * h;
    M.block(0, n, n, 1) = B * h;
    M(n, n + 1) = 1.0;
    MatrixXd E = M.exp();
    return {E.topLeftCorner(n, n), E.block(0, n, n, 1), E.block(0, n + 1, n, 1)};
}

}  // namespace fractune
