#pragma once

#include "bitalloc/allocators.hpp"
#include "bitalloc/fisher.hpp"

#include <Eigen/Dense>

#include <random>
#include <vector>

namespace bitalloc {

/// Relaxed allocation: q(i, m) is the probability that sensor i sends m bits.
struct TransmissionProbabilities {
    Eigen::MatrixXd q;  // N x (R+1)

    int sensors() const { return static_cast<int>(q.rows()); }
    int max_rate() const { return static_cast<int>(q.cols()) - 1; }
    /// Rate-major flattening: entry (i, m) sits at m*N + i.
    Eigen::VectorXd flat() const;
    static TransmissionProbabilities from_flat(const Eigen::VectorXd& v, int n, int r);
    double expected_bits() const;
};

/// Equality constraints A q = b: one row-sum row per sensor, then the bit budget.
struct ConstraintSystem {
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    int n = 0;
    int r = 0;
};

struct BarrierSettings {
    double tau = 0.0;
    double epsilon = 1e-8;
    int max_iters = 100;
    double alpha_ls = 0.25;
    double beta_ls = 0.5;

    /// tau = 2e-5 * N (R+1).
    static BarrierSettings defaults(int n, int r);
    void validate() const;
};

ConstraintSystem constraint_system(int n, int r);

/// A vertex of {A q = b, q >= 0} from a phase-1 simplex (Bland's rule).
/// Throws NumericalError if the system is infeasible.
Eigen::VectorXd lp_vertex(const ConstraintSystem& sys);

/// Feasible point with every entry in [delta, 1 - delta] when N >= 2: the LP
/// vertex mixed with an interior point whose rows share the same mean rate.
/// For N = 1 the feasible set is a single vertex, which is returned as is.
TransmissionProbabilities feasible_start(int n, int r, double delta = 1e-4);

/// W(q) = prior + sum_{i,m} q(i,m) atom(i,m).
Fim weighted_fim(const Eigen::VectorXd& q, const FimTable& table, int n, int r);

/// -logdet W(q) - tau * sum(log q + log(1 - q)); +inf outside (0,1) or when W
/// is not positive definite.
double barrier_value(const Eigen::VectorXd& q, const FimTable& table, int r, double tau);
Eigen::VectorXd barrier_gradient(const Eigen::VectorXd& q, const FimTable& table, int r, double tau);
Eigen::MatrixXd barrier_hessian(const Eigen::VectorXd& q, const FimTable& table, int r, double tau);

struct KktStep {
    Eigen::VectorXd step;
    Eigen::VectorXd dual;
};

/// Solves [H A^T; A 0] [step; dual] = [-g; 0] by eliminating the step block.
KktStep solve_kkt(const Eigen::MatrixXd& h, const ConstraintSystem& sys, const Eigen::VectorXd& g);

struct NewtonDiagnostics {
    int iterations = 0;
    double half_decrement_sq = 0.0;  // lambda^2 / 2 at exit
    double residual_inf = 0.0;       // |A q - b|_inf at exit
    double max_iterate_residual = 0.0;
    std::vector<double> objective;  // barrier value at every iterate
    bool converged = false;
};

struct NewtonResult {
    TransmissionProbabilities q;
    NewtonDiagnostics diag;
};

/// Feasible-start equality-constrained Newton with backtracking. Throws
/// NumericalError on line-search failure or when max_iters is exhausted.
NewtonResult newton_solve(const FimTable& table, const ConstraintSystem& sys, const BarrierSettings& settings,
                          const TransmissionProbabilities& q0);

/// Independent per-sensor draw of a rate from each row.
RateAllocation sample_transmission(const TransmissionProbabilities& q, std::mt19937_64& rng);

/// Deterministic alternative: floor of each sensor's expected rate, remaining
/// bits to the largest fractional parts (lowest index on ties).
RateAllocation round_decode(const TransmissionProbabilities& q, int budget);

}  // namespace bitalloc
