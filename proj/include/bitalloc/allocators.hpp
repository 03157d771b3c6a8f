#pragma once

#include "bitalloc/fisher.hpp"
#include "bitalloc/model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace bitalloc {

/// Bits per sensor for one time step.
struct RateAllocation {
    std::vector<int> rates;

    int total() const;
    int active() const;  // sensors with at least one bit
    std::string joined() const;  // "0-5-0-..."
};

struct AllocOutcome {
    RateAllocation alloc;
    double logdet_value = 0.0;   // logdet(total_fim(alloc)), recomputed from the table
    std::int64_t matrix_sums = 0;  // 4x4 FIM additions/subtractions
    std::int64_t candidates_examined = 0;
};

/// One trellis node: best FIM reaching `bits_used` bits after this stage.
struct DpNode {
    Fim fim = Fim::Zero();
    double logdet = 0.0;  // -inf marks an unreachable or singular state
    int chosen_bits = 0;
    bool live = false;
};

/// stages[0] is the prior alone (state 0); stages[i] covers sensors 0..i-1.
struct DpTrellis {
    std::vector<std::vector<DpNode>> stages;
};

/// Number of ways to split R bits over N sensors, C(N+R-1, N-1).
std::uint64_t enumerate_count(int n, int r);

inline constexpr std::uint64_t kDefaultExhaustiveCap = 10'000'000;

/// Full enumeration; ties go to the lexicographically smallest allocation.
AllocOutcome exhaustive(const FimTable& table, int budget, std::uint64_t cap = kDefaultExhaustiveCap);

/// Adds one bit at a time to the sensor with the largest resulting det.
AllocOutcome greedy(const FimTable& table, int budget);

/// Starts every sensor at `budget` bits and removes the least harmful bit
/// until the total equals the budget.
AllocOutcome gbfos(const FimTable& table, int budget);

/// Stage-per-sensor trellis over bits used; keeps the max-logdet FIM per state.
AllocOutcome adp(const FimTable& table, int budget, DpTrellis* trellis = nullptr);

/// All bits to the sensor closest to the predicted position. logdet_value is
/// filled in only when a table is given (NaN otherwise).
AllocOutcome nearest_neighbor(const SensorGrid& grid, const Vec2& predicted, int budget,
                              const FimTable* table = nullptr);

/// Two 2x2 priors where the larger det loses after adding the same matrix.
struct SuboptimalityWitness {
    Eigen::Matrix2d j1, j2, a;
    double det_j1, det_j2, det_a_j1, det_a_j2;
};
SuboptimalityWitness suboptimality_witness();

/// Random table for policy comparisons: rank-1 atoms c_m v v^T with c_m
/// increasing in m, and an SPD prior.
FimTable make_random_table(int n, int max_rate, std::mt19937_64& rng);

}  // namespace bitalloc
