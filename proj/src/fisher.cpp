#include "bitalloc/fisher.hpp"

#include "bitalloc/errors.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace bitalloc {

namespace {

Fim position_block(double xx, double xy, double yy) {
    Fim f = Fim::Zero();
    f(0, 0) = xx;
    f(0, 1) = f(1, 0) = xy;
    f(1, 1) = yy;
    return f;
}

}  // namespace

const Fim& FimTable::atom(std::size_t i, int m) const {
    if (i >= atoms.size() || m < 0 || m > max_rate())
        throw std::out_of_range("FIM table has no atom for sensor " + std::to_string(i) + " at rate " +
                                std::to_string(m));
    return atoms[i][static_cast<std::size_t>(m)];
}

double geometry_gain(const SignalParams& s, double d2) {
    if (d2 <= 0.0) return 0.0;
    const double dn = std::pow(d2, 0.5 * s.n_exp);
    const double denom = 1.0 + s.alpha * dn;
    const double a2 = s.p0 / denom;
    // d^(2n-4) = dn^2 / d2^2
    return s.n_exp * s.n_exp * a2 * s.alpha * s.alpha * (dn * dn) / (d2 * d2) / (denom * denom);
}

Fim sensor_fim_conditional(const SensorGrid& grid, std::size_t i, const TargetState& state, int m,
                           const QuantizerBank& bank) {
    if (m == 0) return Fim::Zero();
    const Vec2 delta = grid.positions.at(i) - state.position();
    const double d2 = delta.squaredNorm();
    if (d2 == 0.0) return Fim::Zero();
    const double a = amplitude_from_sq_distance(grid.signal, d2);
    const double w = geometry_gain(grid.signal, d2) * kappa(a, grid.signal.sigma, bank.thresholds(m));
    return position_block(w * delta.x() * delta.x(), w * delta.x() * delta.y(), w * delta.y() * delta.y());
}

Fim sensor_fim_expected(const SensorGrid& grid, std::size_t i, const ParticleSet& particles, int m,
                        const QuantizerBank& bank) {
    if (particles.size() == 0) throw std::invalid_argument("expected FIM over an empty particle set");
    Fim sum = Fim::Zero();
    for (Eigen::Index s = 0; s < particles.size(); ++s)
        sum += sensor_fim_conditional(grid, i, particles.state(s), m, bank);
    return sum / static_cast<double>(particles.size());
}

PriorFim prior_fim(const ParticleSet& particles, double eps) {
    const Eigen::Index ns = particles.size();
    if (ns < 5) throw std::invalid_argument("prior FIM needs at least 5 particles");
    const Vec4 mean = particles.states.rowwise().mean();
    const Eigen::Matrix<double, 4, Eigen::Dynamic> centered = particles.states.colwise() - mean;
    Mat4 cov = centered * centered.transpose() / static_cast<double>(ns);
    cov = 0.5 * (cov + cov.transpose());

    PriorFim out;
    const double tr = cov.trace();
    if (tr > 0.0) {
        cov += (eps * tr / 4.0) * Mat4::Identity();
    } else {
        cov += eps * Mat4::Identity();
        out.degenerate = true;
    }
    Eigen::LLT<Mat4> llt(cov);
    if (llt.info() != Eigen::Success) throw NumericalError("particle covariance is not invertible");
    out.fim = llt.solve(Mat4::Identity());
    out.fim = 0.5 * (out.fim + out.fim.transpose());
    return out;
}

FimTable build_fim_table(const SensorGrid& grid, const ParticleSet& particles, const QuantizerBank& bank,
                         int max_rate) {
    if (max_rate < 0 || max_rate > bank.max_rate())
        throw std::invalid_argument("rate " + std::to_string(max_rate) + " exceeds the quantizer bank");
    if (particles.size() == 0) throw std::invalid_argument("FIM table needs particles");

    const std::size_t n = grid.size();
    const auto rates = static_cast<std::size_t>(max_rate) + 1;
    const double sigma = grid.signal.sigma;

    // per (sensor, rate) running sums of the three distinct position entries
    std::vector<double> sxx(n * rates, 0.0), sxy(n * rates, 0.0), syy(n * rates, 0.0);
    for (Eigen::Index s = 0; s < particles.size(); ++s) {
        const Vec2 pos = particles.states.col(s).head<2>();
        for (std::size_t i = 0; i < n; ++i) {
            const Vec2 delta = grid.positions[i] - pos;
            const double d2 = delta.squaredNorm();
            if (d2 == 0.0) continue;
            const double a = amplitude_from_sq_distance(grid.signal, d2);
            const double g = geometry_gain(grid.signal, d2);
            const double xx = g * delta.x() * delta.x();
            const double xy = g * delta.x() * delta.y();
            const double yy = g * delta.y() * delta.y();
            for (std::size_t m = 1; m < rates; ++m) {
                const double k = kappa(a, sigma, bank.thresholds(static_cast<int>(m)));
                sxx[i * rates + m] += k * xx;
                sxy[i * rates + m] += k * xy;
                syy[i * rates + m] += k * yy;
            }
        }
    }

    FimTable table;
    const double inv = 1.0 / static_cast<double>(particles.size());
    table.atoms.assign(n, std::vector<Fim>(rates, Fim::Zero()));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t m = 1; m < rates; ++m)
            table.atoms[i][m] =
                position_block(sxx[i * rates + m] * inv, sxy[i * rates + m] * inv, syy[i * rates + m] * inv);
    const auto prior = prior_fim(particles);
    table.prior = prior.fim;
    table.prior_degenerate = prior.degenerate;
    return table;
}

Fim total_fim(const std::vector<int>& rates, const FimTable& table) {
    if (rates.size() != table.sensors())
        throw std::invalid_argument("allocation length " + std::to_string(rates.size()) + " does not match " +
                                    std::to_string(table.sensors()) + " sensors");
    Fim j = table.prior;
    for (std::size_t i = 0; i < rates.size(); ++i) j += table.atom(i, rates[i]);
    return j;
}

double logdet(const Fim& f) {
    const double scale = 1.0 + f.cwiseAbs().maxCoeff();
    if (!f.allFinite() || (f - f.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
        throw std::invalid_argument("logdet needs a finite symmetric matrix");
    Eigen::LLT<Mat4> llt(f);
    if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
    const Eigen::Vector4d diag = llt.matrixL().toDenseMatrix().diagonal();
    if ((diag.array() <= 0.0).any()) return -std::numeric_limits<double>::infinity();
    return 2.0 * diag.array().log().sum();
}

}  // namespace bitalloc
