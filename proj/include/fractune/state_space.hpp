#pragma once

#include <Eigen/Dense>

#include "fractune/lti.hpp"

namespace fractune {

// SISO continuous-time realization
struct StateSpace {
    Eigen::MatrixXd A;
    Eigen::VectorXd B;
    Eigen::RowVectorXd C;
    double D = 0.0;

    Eigen::Index order() const { return A.rows(); }
    cplx operator()(cplx s) const;
};

// controllable canonical form; tf must be proper
StateSpace realize(const RationalTF& tf);

StateSpace series(const StateSpace& first, const StateSpace& second);
StateSpace parallel(const StateSpace& a, const StateSpace& b);

// solves A X + X Aᴴ + Q = 0 for stable A (Bartels–Stewart, complex Schur)
Eigen::MatrixXd lyapunov(const Eigen::MatrixXd& A, const Eigen::MatrixXd& Q);

// ZOH: x+ = Φx + Γu
struct ZohDiscrete {
    Eigen::MatrixXd Phi;
    Eigen::MatrixXd Gamma;
};
ZohDiscrete zoh(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, double h);

// FOH for a scalar input ramping from u0 to u1 over the step:
// x+ = Φx + Γ0·u0 + Γ1·(u1 − u0)
struct FohDiscrete {
    Eigen::MatrixXd Phi;
    Eigen::VectorXd Gamma0;
    Eigen::VectorXd Gamma1;
};
FohDiscrete foh(const Eigen::MatrixXd& A, const Eigen::VectorXd& B, double h);

}  // namespace fractune
