#include "bitalloc/allocators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace bitalloc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_budget(const FimTable& table, int budget) {
    if (table.sensors() == 0) throw std::invalid_argument("allocation needs at least one sensor");
    if (budget < 0) throw std::invalid_argument("negative bit budget");
    if (budget > table.max_rate())
        throw std::invalid_argument("FIM table stops at rate " + std::to_string(table.max_rate()) +
                                    ", budget is " + std::to_string(budget));
}

void finish(AllocOutcome& out, const FimTable& table) { out.logdet_value = logdet(total_fim(out.alloc.rates, table)); }

// log det(I + J^{-1} A) = logdet(J + A) - logdet(J); -inf if not positive.
double lemma_term(const Eigen::PartialPivLU<Mat4>& lu_j, const Fim& a) {
    const Mat4 m = Mat4::Identity() + lu_j.solve(a);
    const double d = m.partialPivLu().determinant();
    return d > 0.0 ? std::log(d) : kNegInf;
}

}  // namespace

int RateAllocation::total() const { return std::accumulate(rates.begin(), rates.end(), 0); }

int RateAllocation::active() const {
    return static_cast<int>(std::count_if(rates.begin(), rates.end(), [](int r) { return r > 0; }));
}

std::string RateAllocation::joined() const {
    std::string s;
    for (std::size_t i = 0; i < rates.size(); ++i) {
        if (i) s += '-';
        s += std::to_string(rates[i]);
    }
    return s;
}

std::uint64_t enumerate_count(int n, int r) {
    if (n < 1 || r < 0) throw std::invalid_argument("enumerate_count needs N >= 1 and R >= 0");
    // C(n+r-1, k) with k = min(r, n-1), built up so every partial product is integral
    const std::uint64_t top = static_cast<std::uint64_t>(n) + r - 1;
    const std::uint64_t k = std::min<std::uint64_t>(r, n - 1);
    std::uint64_t c = 1;
    for (std::uint64_t j = 1; j <= k; ++j) {
        const std::uint64_t num = top - k + j;
        if (c > std::numeric_limits<std::uint64_t>::max() / num) return std::numeric_limits<std::uint64_t>::max();
        c = c * num / j;
    }
    return c;
}

AllocOutcome exhaustive(const FimTable& table, int budget, std::uint64_t cap) {
    check_budget(table, budget);
    const int n = static_cast<int>(table.sensors());
    const std::uint64_t count = enumerate_count(n, budget);
    if (count > cap)
        throw std::invalid_argument("exhaustive search over " + std::to_string(count) + " allocations exceeds cap " +
                                    std::to_string(cap));

    AllocOutcome out;
    std::vector<int> cur(static_cast<std::size_t>(n), 0);
    double best = kNegInf;
    bool have = false;
    // lexicographic order: sensor 0 varies slowest, from 0 bits upward
    auto visit = [&](auto&& self, int i, int left) -> void {
        if (i == n - 1) {
            cur[static_cast<std::size_t>(i)] = left;
            Fim j = table.prior;
            for (int k = 0; k < n; ++k) j += table.atom(static_cast<std::size_t>(k), cur[static_cast<std::size_t>(k)]);
            out.matrix_sums += n;
            ++out.candidates_examined;
            const double v = logdet(j);
            if (!have || v > best) {
                best = v;
                out.alloc.rates = cur;
                have = true;
            }
            return;
        }
        for (int b = 0; b <= left; ++b) {
            cur[static_cast<std::size_t>(i)] = b;
            self(self, i + 1, left - b);
        }
    };
    visit(visit, 0, budget);
    finish(out, table);
    return out;
}

AllocOutcome greedy(const FimTable& table, int budget) {
    check_budget(table, budget);
    const std::size_t n = table.sensors();
    AllocOutcome out;
    out.alloc.rates.assign(n, 0);
    Fim j = table.prior;
    for (int it = 0; it < budget; ++it) {
        double best = kNegInf;
        std::size_t best_k = n;
        Fim best_j;
        for (std::size_t k = 0; k < n; ++k) {
            const int rk = out.alloc.rates[k];
            Fim cand;
            if (rk == 0) {
                cand = j + table.atom(k, 1);
                out.matrix_sums += 1;
            } else {
                cand = j + table.atom(k, rk + 1) - table.atom(k, rk);
                out.matrix_sums += 2;
            }
            ++out.candidates_examined;
            const double v = logdet(cand);
            if (best_k == n || v > best) {
                best = v;
                best_k = k;
                best_j = cand;
            }
        }
        ++out.alloc.rates[best_k];
        j = best_j;
    }
    finish(out, table);
    return out;
}

AllocOutcome gbfos(const FimTable& table, int budget) {
    check_budget(table, budget);
    const std::size_t n = table.sensors();
    AllocOutcome out;
    out.alloc.rates.assign(n, budget);
    Fim j = table.prior;
    if (budget > 0) {
        for (std::size_t k = 0; k < n; ++k) j += table.atom(k, budget);
        out.matrix_sums += static_cast<std::int64_t>(n);
    }
    const std::int64_t reductions = static_cast<std::int64_t>(n - 1) * budget;
    for (std::int64_t it = 0; it < reductions; ++it) {
        double best = kNegInf;
        std::size_t best_k = n;
        Fim best_j;
        for (std::size_t k = 0; k < n; ++k) {
            const int rk = out.alloc.rates[k];
            if (rk == 0) continue;
            const Fim cand = j + table.atom(k, rk - 1) - table.atom(k, rk);
            out.matrix_sums += 2;
            ++out.candidates_examined;
            const double v = logdet(cand);
            if (best_k == n || v > best) {
                best = v;
                best_k = k;
                best_j = cand;
            }
        }
        --out.alloc.rates[best_k];
        j = best_j;
    }
    finish(out, table);
    return out;
}

AllocOutcome adp(const FimTable& table, int budget, DpTrellis* trellis) {
    check_budget(table, budget);
    const std::size_t n = table.sensors();
    const auto states = static_cast<std::size_t>(budget) + 1;
    AllocOutcome out;

    DpTrellis local;
    DpTrellis& t = trellis ? *trellis : local;
    t.stages.assign(n + 1, std::vector<DpNode>(states));
    t.stages[0][0] = {table.prior, logdet(table.prior), 0, true};

    if (n == 1) {
        // a single stage has only the terminal state to fill
        DpNode& node = t.stages[1][states - 1];
        node.fim = table.prior + table.atom(0, budget);
        node.logdet = logdet(node.fim);
        node.chosen_bits = budget;
        node.live = true;
        out.matrix_sums = budget > 0 ? 1 : 0;
        out.candidates_examined = 1;
        out.alloc.rates = {budget};
        finish(out, table);
        return out;
    }

    for (std::size_t i = 1; i <= n; ++i) {
        const auto& prev = t.stages[i - 1];
        auto& cur = t.stages[i];
        const std::size_t sensor = i - 1;
        const bool last = i == n;
        // cache a factorization per live predecessor state
        std::vector<Eigen::PartialPivLU<Mat4>> lu(states);
        for (std::size_t s = 0; s < states; ++s)
            if (prev[s].live && prev[s].logdet > kNegInf) lu[s].compute(prev[s].fim);

        for (std::size_t r = last ? states - 1 : 0; r < states; ++r) {
            DpNode node;
            node.logdet = kNegInf;
            for (std::size_t k = 0; k <= r; ++k) {
                const DpNode& from = prev[r - k];
                if (!from.live) continue;
                if (k > 0) out.matrix_sums += 1;
                ++out.candidates_examined;
                if (from.logdet == kNegInf) continue;
                const double v =
                    k == 0 ? from.logdet : from.logdet + lemma_term(lu[r - k], table.atom(sensor, static_cast<int>(k)));
                if (!node.live || v > node.logdet) {
                    node.logdet = v;
                    node.chosen_bits = static_cast<int>(k);
                    node.fim = k == 0 ? from.fim : Fim(from.fim + table.atom(sensor, static_cast<int>(k)));
                    node.live = true;
                }
            }
            cur[r] = node;
        }
    }

    out.alloc.rates.assign(n, 0);
    std::size_t r = states - 1;
    for (std::size_t i = n; i >= 1; --i) {
        const DpNode& node = t.stages[i][r];
        if (!node.live) throw std::logic_error("A-DP backtrack reached a dead state");
        out.alloc.rates[i - 1] = node.chosen_bits;
        r -= static_cast<std::size_t>(node.chosen_bits);
    }
    finish(out, table);
    return out;
}

AllocOutcome nearest_neighbor(const SensorGrid& grid, const Vec2& predicted, int budget, const FimTable* table) {
    if (grid.size() == 0) throw std::invalid_argument("nearest-neighbor allocation needs sensors");
    if (budget < 0) throw std::invalid_argument("negative bit budget");
    std::size_t best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double d2 = (grid.positions[i] - predicted).squaredNorm();
        if (d2 < best_d2) {
            best_d2 = d2;
            best = i;
        }
    }
    AllocOutcome out;
    out.alloc.rates.assign(grid.size(), 0);
    out.alloc.rates[best] = budget;
    out.candidates_examined = static_cast<std::int64_t>(grid.size());
    out.logdet_value = std::numeric_limits<double>::quiet_NaN();
    if (table) finish(out, *table);
    return out;
}

SuboptimalityWitness suboptimality_witness() {
    SuboptimalityWitness w;
    w.j1 = Eigen::Matrix2d::Identity();
    w.j2 << 1.0, -0.1, -0.1, 1.0;
    w.a << 1.0, 0.1, 0.1, 1.0;
    w.det_j1 = w.j1.determinant();
    w.det_j2 = w.j2.determinant();
    w.det_a_j1 = (w.a + w.j1).determinant();
    w.det_a_j2 = (w.a + w.j2).determinant();
    return w;
}

FimTable make_random_table(int n, int max_rate, std::mt19937_64& rng) {
    if (n < 1 || max_rate < 0) throw std::invalid_argument("random table needs N >= 1 and R >= 0");
    std::normal_distribution<double> nd;
    FimTable t;
    Mat4 b;
    for (int k = 0; k < 16; ++k) b(k) = nd(rng);
    t.prior = b * b.transpose() + 0.1 * Mat4::Identity();
    t.atoms.assign(static_cast<std::size_t>(n), std::vector<Fim>(static_cast<std::size_t>(max_rate) + 1, Fim::Zero()));
    for (auto& row : t.atoms) {
        const Vec4 v(nd(rng), nd(rng), nd(rng), nd(rng));
        const Mat4 outer = v * v.transpose();
        for (int m = 1; m <= max_rate; ++m) row[static_cast<std::size_t>(m)] = (1.0 - 0.36 * std::pow(4.0, -(m - 1))) * outer;
    }
    return t;
}

}  // namespace bitalloc
