#include "bitalloc/convex.hpp"

#include "bitalloc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace bitalloc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_table(const FimTable& table, int r, Eigen::Index len) {
    const auto n = static_cast<Eigen::Index>(table.sensors());
    if (r < 1 || r > table.max_rate()) throw std::invalid_argument("barrier needs 1 <= R <= table rate");
    if (len != n * (r + 1))
        throw std::invalid_argument("q has " + std::to_string(len) + " entries, expected " +
                                    std::to_string(n * (r + 1)));
}

bool strictly_inside(const Eigen::VectorXd& q) { return (q.array() > 0.0).all() && (q.array() < 1.0).all(); }

// B_a = W^{-1} A_a for every flattened entry a, with W factored once.
std::vector<Mat4> whitened_atoms(const Eigen::VectorXd& q, const FimTable& table, int r) {
    const int n = static_cast<int>(table.sensors());
    const Fim w = weighted_fim(q, table, n, r);
    Eigen::LLT<Mat4> llt(w);
    if (llt.info() != Eigen::Success) throw NumericalError("weighted FIM is not positive definite");
    std::vector<Mat4> b(static_cast<std::size_t>(n) * (r + 1));
    for (int m = 0; m <= r; ++m)
        for (int i = 0; i < n; ++i)
            b[static_cast<std::size_t>(m * n + i)] = llt.solve(table.atom(static_cast<std::size_t>(i), m));
    return b;
}

}  // namespace

Eigen::VectorXd TransmissionProbabilities::flat() const {
    const Eigen::Index n = q.rows(), cols = q.cols();
    Eigen::VectorXd v(n * cols);
    for (Eigen::Index m = 0; m < cols; ++m) v.segment(m * n, n) = q.col(m);
    return v;
}

TransmissionProbabilities TransmissionProbabilities::from_flat(const Eigen::VectorXd& v, int n, int r) {
    if (v.size() != static_cast<Eigen::Index>(n) * (r + 1)) throw std::invalid_argument("flat q has the wrong length");
    TransmissionProbabilities t;
    t.q.resize(n, r + 1);
    for (int m = 0; m <= r; ++m) t.q.col(m) = v.segment(static_cast<Eigen::Index>(m) * n, n);
    return t;
}

double TransmissionProbabilities::expected_bits() const {
    double s = 0.0;
    for (Eigen::Index m = 1; m < q.cols(); ++m) s += static_cast<double>(m) * q.col(m).sum();
    return s;
}

BarrierSettings BarrierSettings::defaults(int n, int r) {
    BarrierSettings s;
    s.tau = 2e-5 * n * (r + 1);
    return s;
}

void BarrierSettings::validate() const {
    if (!(tau > 0.0)) throw std::invalid_argument("barrier tau must be positive");
    if (!(epsilon > 0.0)) throw std::invalid_argument("Newton epsilon must be positive");
    if (max_iters < 1) throw std::invalid_argument("Newton max_iters must be at least 1");
    if (!(alpha_ls > 0.0 && alpha_ls < 0.5)) throw std::invalid_argument("line-search alpha must be in (0, 0.5)");
    if (!(beta_ls > 0.0 && beta_ls < 1.0)) throw std::invalid_argument("line-search beta must be in (0, 1)");
}

ConstraintSystem constraint_system(int n, int r) {
    if (n < 1 || r < 1) throw std::invalid_argument("constraint system needs N >= 1 and R >= 1");
    ConstraintSystem s;
    s.n = n;
    s.r = r;
    s.A = Eigen::MatrixXd::Zero(n + 1, static_cast<Eigen::Index>(n) * (r + 1));
    for (int m = 0; m <= r; ++m)
        for (int i = 0; i < n; ++i) {
            s.A(i, m * n + i) = 1.0;
            s.A(n, m * n + i) = m;
        }
    s.b = Eigen::VectorXd::Ones(n + 1);
    s.b(n) = r;
    return s;
}

Eigen::VectorXd lp_vertex(const ConstraintSystem& sys) {
    const Eigen::Index rows = sys.A.rows(), vars = sys.A.cols();
    const Eigen::Index cols = vars + rows + 1;  // originals, artificials, rhs
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(rows + 1, cols);
    t.topLeftCorner(rows, vars) = sys.A;
    t.block(0, vars, rows, rows).setIdentity();
    t.topRightCorner(rows, 1) = sys.b;
    std::vector<Eigen::Index> basis(static_cast<std::size_t>(rows));
    std::iota(basis.begin(), basis.end(), vars);
    // phase-1 cost row: minimize the sum of artificials, priced out of the basis
    for (Eigen::Index j = 0; j < cols; ++j) t(rows, j) = j >= vars && j < vars + rows ? 0.0 : -t.col(j).head(rows).sum();

    const double tol = 1e-12;
    for (int iter = 0; iter < 10000; ++iter) {
        Eigen::Index enter = -1;
        for (Eigen::Index j = 0; j < vars + rows; ++j)
            if (t(rows, j) < -tol) {
                enter = j;
                break;
            }
        if (enter < 0) break;
        Eigen::Index leave = -1;
        double best = kInf;
        for (Eigen::Index i = 0; i < rows; ++i) {
            if (t(i, enter) <= tol) continue;
            const double ratio = t(i, cols - 1) / t(i, enter);
            if (ratio < best - tol || (std::abs(ratio - best) <= tol && leave >= 0 &&
                                       basis[static_cast<std::size_t>(i)] < basis[static_cast<std::size_t>(leave)])) {
                best = ratio;
                leave = i;
            }
        }
        if (leave < 0) throw NumericalError("phase-1 simplex is unbounded");
        t.row(leave) /= t(leave, enter);
        for (Eigen::Index i = 0; i <= rows; ++i)
            if (i != leave && t(i, enter) != 0.0) t.row(i) -= t(i, enter) * t.row(leave);
        basis[static_cast<std::size_t>(leave)] = enter;
    }
    if (-t(rows, cols - 1) > 1e-9) throw NumericalError("allocation constraints are infeasible");

    Eigen::VectorXd q = Eigen::VectorXd::Zero(vars);
    for (Eigen::Index i = 0; i < rows; ++i)
        if (basis[static_cast<std::size_t>(i)] < vars) q(basis[static_cast<std::size_t>(i)]) = std::max(0.0, t(i, cols - 1));
    return q;
}

TransmissionProbabilities feasible_start(int n, int r, double delta) {
    const auto sys = constraint_system(n, r);
    const Eigen::VectorXd vertex = lp_vertex(sys);
    if (n == 1) return TransmissionProbabilities::from_flat(vertex, n, r);

    // interior point: each row (1 - lambda) e_0 + lambda * uniform has mean rate R/N
    const double lambda = 2.0 / n;
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Constant(r + 1, lambda / (r + 1));
    row(0) += 1.0 - lambda;
    TransmissionProbabilities center;
    center.q = row.replicate(n, 1);

    const double lo = row.minCoeff(), hi = row.maxCoeff();
    double gamma = std::max({1e-2, delta / lo, delta / (1.0 - hi)});
    gamma = std::min(gamma, 1.0);
    const Eigen::VectorXd q = (1.0 - gamma) * vertex + gamma * center.flat();
    if ((sys.A * q - sys.b).cwiseAbs().maxCoeff() > 1e-8) throw NumericalError("feasible start misses the constraints");
    return TransmissionProbabilities::from_flat(q, n, r);
}

Fim weighted_fim(const Eigen::VectorXd& q, const FimTable& table, int n, int r) {
    Fim w = table.prior;
    for (int m = 1; m <= r; ++m)
        for (int i = 0; i < n; ++i) w += q(m * n + i) * table.atom(static_cast<std::size_t>(i), m);
    return w;
}

double barrier_value(const Eigen::VectorXd& q, const FimTable& table, int r, double tau) {
    check_table(table, r, q.size());
    if (!strictly_inside(q)) return kInf;
    const double ld = logdet(weighted_fim(q, table, static_cast<int>(table.sensors()), r));
    if (ld == -kInf) return kInf;
    return -ld - tau * (q.array().log().sum() + (1.0 - q.array()).log().sum());
}

Eigen::VectorXd barrier_gradient(const Eigen::VectorXd& q, const FimTable& table, int r, double tau) {
    check_table(table, r, q.size());
    if (!strictly_inside(q)) throw std::invalid_argument("barrier gradient needs 0 < q < 1");
    const auto b = whitened_atoms(q, table, r);
    Eigen::VectorXd g(q.size());
    for (Eigen::Index a = 0; a < q.size(); ++a)
        g(a) = -b[static_cast<std::size_t>(a)].trace() - tau / q(a) + tau / (1.0 - q(a));
    return g;
}

Eigen::MatrixXd barrier_hessian(const Eigen::VectorXd& q, const FimTable& table, int r, double tau) {
    check_table(table, r, q.size());
    if (!strictly_inside(q)) throw std::invalid_argument("barrier Hessian needs 0 < q < 1");
    const auto b = whitened_atoms(q, table, r);
    // tr(B_a B_b) = vec(B_a) . vec(B_b^T)
    const Eigen::Index len = q.size();
    Eigen::MatrixXd m1(len, 16), m2(len, 16);
    for (Eigen::Index a = 0; a < len; ++a) {
        const Mat4& ba = b[static_cast<std::size_t>(a)];
        m1.row(a) = Eigen::Map<const Eigen::Matrix<double, 1, 16>>(ba.data());
        const Mat4 bt = ba.transpose();
        m2.row(a) = Eigen::Map<const Eigen::Matrix<double, 1, 16>>(bt.data());
    }
    Eigen::MatrixXd h = m1 * m2.transpose();
    h = 0.5 * (h + h.transpose()).eval();
    h.diagonal().array() += tau * (q.array().square().inverse() + (1.0 - q.array()).square().inverse());
    return h;
}

KktStep solve_kkt(const Eigen::MatrixXd& h, const ConstraintSystem& sys, const Eigen::VectorXd& g) {
    Eigen::LLT<Eigen::MatrixXd> llt(h);
    if (llt.info() != Eigen::Success) throw NumericalError("KKT block is not positive definite");
    const Eigen::MatrixXd hinv_at = llt.solve(sys.A.transpose());
    const Eigen::VectorXd hinv_g = llt.solve(g);
    const Eigen::MatrixXd neg_s = sys.A * hinv_at;  // S = -A H^{-1} A^T
    Eigen::LLT<Eigen::MatrixXd> s_llt(neg_s);
    if (s_llt.info() != Eigen::Success) throw NumericalError("KKT Schur complement is singular");
    KktStep out;
    out.dual = -s_llt.solve(sys.A * hinv_g);
    out.step = -(hinv_at * out.dual + hinv_g);
    return out;
}

NewtonResult newton_solve(const FimTable& table, const ConstraintSystem& sys, const BarrierSettings& settings,
                          const TransmissionProbabilities& q0) {
    settings.validate();
    const int r = sys.r;
    Eigen::VectorXd q = q0.flat();
    if (q.size() != sys.A.cols()) throw std::invalid_argument("starting point does not match the constraint system");

    NewtonResult out;
    auto residual = [&](const Eigen::VectorXd& v) { return (sys.A * v - sys.b).cwiseAbs().maxCoeff(); };
    out.diag.max_iterate_residual = residual(q);

    if (sys.n == 1) {
        // single feasible point; nothing to optimize
        out.q = TransmissionProbabilities::from_flat(q, sys.n, r);
        out.diag.residual_inf = out.diag.max_iterate_residual;
        out.diag.converged = true;
        return out;
    }
    if (!strictly_inside(q)) throw std::invalid_argument("Newton start must be strictly inside (0,1)");

    double phi = barrier_value(q, table, r, settings.tau);
    out.diag.objective.push_back(phi);
    for (;;) {
        const Eigen::VectorXd g = barrier_gradient(q, table, r, settings.tau);
        const Eigen::MatrixXd h = barrier_hessian(q, table, r, settings.tau);
        const KktStep kkt = solve_kkt(h, sys, g);
        const double slope = g.dot(kkt.step);
        out.diag.half_decrement_sq = std::max(0.0, -slope) / 2.0;
        if (out.diag.half_decrement_sq <= settings.epsilon) {
            out.diag.converged = true;
            break;
        }
        if (out.diag.iterations >= settings.max_iters)
            throw NumericalError("Newton solver did not converge in " + std::to_string(settings.max_iters) +
                                 " iterations");

        double t = 1.0;
        while (!strictly_inside(q + t * kkt.step)) t *= settings.beta_ls;
        double next = barrier_value(q + t * kkt.step, table, r, settings.tau);
        while (next > phi + settings.alpha_ls * t * slope) {
            t *= settings.beta_ls;
            if (t < 1e-20) throw NumericalError("Newton line search failed");
            next = barrier_value(q + t * kkt.step, table, r, settings.tau);
        }
        q += t * kkt.step;
        phi = next;
        ++out.diag.iterations;
        out.diag.objective.push_back(phi);
        out.diag.max_iterate_residual = std::max(out.diag.max_iterate_residual, residual(q));
    }
    out.diag.residual_inf = residual(q);
    out.q = TransmissionProbabilities::from_flat(q, sys.n, r);
    return out;
}

RateAllocation sample_transmission(const TransmissionProbabilities& q, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    RateAllocation out;
    out.rates.resize(static_cast<std::size_t>(q.sensors()));
    for (int i = 0; i < q.sensors(); ++i) {
        const auto row = q.q.row(i);
        if (std::abs(row.sum() - 1.0) > 1e-6 || (row.array() < -1e-12).any())
            throw std::invalid_argument("transmission row " + std::to_string(i) + " is not a distribution");
        const double draw = u(rng) * row.sum();
        double acc = 0.0;
        int m = q.max_rate();
        for (int k = 0; k <= q.max_rate(); ++k) {
            acc += std::max(0.0, row(k));
            if (draw < acc) {
                m = k;
                break;
            }
        }
        out.rates[static_cast<std::size_t>(i)] = m;
    }
    return out;
}

RateAllocation round_decode(const TransmissionProbabilities& q, int budget) {
    const int n = q.sensors();
    std::vector<double> expect(static_cast<std::size_t>(n));
    RateAllocation out;
    out.rates.assign(static_cast<std::size_t>(n), 0);
    int used = 0;
    for (int i = 0; i < n; ++i) {
        double e = 0.0;
        for (int m = 1; m <= q.max_rate(); ++m) e += m * q.q(i, m);
        expect[static_cast<std::size_t>(i)] = e;
        out.rates[static_cast<std::size_t>(i)] = std::min(budget, static_cast<int>(std::floor(e + 1e-9)));
        used += out.rates[static_cast<std::size_t>(i)];
    }
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        const double fa = expect[static_cast<std::size_t>(a)] - out.rates[static_cast<std::size_t>(a)];
        const double fb = expect[static_cast<std::size_t>(b)] - out.rates[static_cast<std::size_t>(b)];
        return fa > fb;
    });
    // hand out what is missing, then trim any overshoot from the smallest fractions
    for (std::size_t k = 0; used < budget; k = (k + 1) % order.size()) {
        auto& rk = out.rates[static_cast<std::size_t>(order[k])];
        if (rk < budget) {
            ++rk;
            ++used;
        }
    }
    for (auto it = order.rbegin(); used > budget;) {
        auto& rk = out.rates[static_cast<std::size_t>(*it)];
        if (rk > 0) {
            --rk;
            --used;
        }
        if (++it == order.rend()) it = order.rbegin();
    }
    return out;
}

}  // namespace bitalloc
