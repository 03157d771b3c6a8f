#pragma once

#include "bitalloc/model.hpp"
#include "bitalloc/particles.hpp"
#include "bitalloc/quantizer.hpp"

#include <vector>

namespace bitalloc {

using Fim = Mat4;

/// Expected per-sensor, per-rate information atoms for one time step plus the
/// prior information. atoms[i][m] is sensor i reporting at m bits.
struct FimTable {
    std::vector<std::vector<Fim>> atoms;
    Fim prior = Fim::Identity();
    bool prior_degenerate = false;

    std::size_t sensors() const { return atoms.size(); }
    int max_rate() const { return atoms.empty() ? 0 : static_cast<int>(atoms.front().size()) - 1; }
    const Fim& atom(std::size_t i, int m) const;
};

struct PriorFim {
    Fim fim;
    bool degenerate = false;  // covariance had zero trace and was replaced by eps*I
};

/// Scalar g with J^S = g * kappa * outer(dx, dy) for the position block; 0 at d = 0.
double geometry_gain(const SignalParams& signal, double d2);

/// Information about the target state from one m-bit report of sensor i,
/// conditioned on the state. Only the position block is non-zero.
Fim sensor_fim_conditional(const SensorGrid& grid, std::size_t i, const TargetState& state, int m,
                           const QuantizerBank& bank);

/// Unweighted particle average of sensor_fim_conditional.
Fim sensor_fim_expected(const SensorGrid& grid, std::size_t i, const ParticleSet& particles, int m,
                        const QuantizerBank& bank);

/// Inverse of the (regularized) particle sample covariance.
PriorFim prior_fim(const ParticleSet& particles, double eps = 1e-9);

/// All atoms for rates 0..max_rate plus the prior, from one predicted cloud.
FimTable build_fim_table(const SensorGrid& grid, const ParticleSet& particles, const QuantizerBank& bank,
                         int max_rate);

/// prior + sum_i atoms[i][rates[i]].
Fim total_fim(const std::vector<int>& rates, const FimTable& table);

/// Log-determinant through a Cholesky factorization; -inf when the matrix is
/// not positive definite. Throws std::invalid_argument for asymmetric input.
double logdet(const Fim& f);

}  // namespace bitalloc
