#include "bitalloc/tracker.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace bitalloc {

Mat4 covariance_root(const Mat4& cov) {
    if (!cov.allFinite() || (cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + cov.cwiseAbs().maxCoeff()))
        throw std::invalid_argument("covariance must be finite and symmetric");
    Eigen::SelfAdjointEigenSolver<Mat4> es(cov);
    const Vec4 ev = es.eigenvalues();
    const double tol = 1e-12 * std::max(1.0, ev.cwiseAbs().maxCoeff());
    if (ev.minCoeff() < -tol) throw std::invalid_argument("covariance is not positive semidefinite");
    return es.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

namespace {

Eigen::Matrix<double, 4, Eigen::Dynamic> gaussian_columns(const Mat4& root, Eigen::Index count,
                                                          std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    Eigen::Matrix<double, 4, Eigen::Dynamic> z(4, count);
    for (Eigen::Index s = 0; s < count; ++s)
        for (int k = 0; k < 4; ++k) z(k, s) = nd(rng);
    return root * z;
}

double position_spread(const ParticleSet& p) {
    const Eigen::Vector2d mean = p.states.topRows<2>() * p.weights;
    double s = 0.0;
    for (Eigen::Index c = 0; c < p.size(); ++c) s += p.weights(c) * (p.states.col(c).head<2>() - mean).squaredNorm();
    return s;
}

}  // namespace

ParticleSet init_particles(const Vec4& mean, const Mat4& cov, int count, std::mt19937_64& rng) {
    if (count < 1) throw std::invalid_argument("particle count must be positive");
    const Mat4 root = covariance_root(cov);
    ParticleSet p;
    p.states = gaussian_columns(root, count, rng).colwise() + mean;
    p.weights = Eigen::VectorXd::Constant(count, 1.0 / count);
    return p;
}

ParticleSet predict(const ParticleSet& p, const MotionModel& model, std::mt19937_64& rng) {
    ParticleSet out;
    out.states = model.F * p.states + gaussian_columns(covariance_root(model.Q), p.size(), rng);
    out.weights = Eigen::VectorXd::Constant(p.size(), 1.0 / static_cast<double>(p.size()));
    return out;
}

std::vector<SensorReport> make_reports(const SensorGrid& grid, const RateAllocation& alloc, const TargetState& truth,
                                       const std::vector<double>& noise, const QuantizerBank& bank) {
    if (alloc.rates.size() != grid.size() || noise.size() != grid.size())
        throw std::invalid_argument("allocation and noise must cover every sensor");
    std::vector<SensorReport> reports;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const int m = alloc.rates[i];
        if (m == 0) continue;
        const double z = measure(grid, i, truth.position(), noise[i]).z;
        reports.push_back({i, m, quantize(z, bank.thresholds(m))});
    }
    return reports;
}

WeightUpdate update_weights(const ParticleSet& p, const std::vector<SensorReport>& reports, const SensorGrid& grid,
                            const QuantizerBank& bank) {
    WeightUpdate out{p, false};
    if (reports.empty()) return out;
    const Eigen::Index ns = p.size();
    Eigen::VectorXd loglik = Eigen::VectorXd::Zero(ns);
    for (const auto& r : reports) {
        if (r.sensor_index >= grid.size()) throw std::out_of_range("report from unknown sensor");
        const auto& thr = bank.thresholds(r.rate);
        for (Eigen::Index s = 0; s < ns; ++s) {
            const double a = amplitude(grid, r.sensor_index, p.states.col(s).head<2>());
            loglik(s) += std::log(level_probability(r.level, a, grid.signal.sigma, thr));
        }
    }
    const double top = loglik.maxCoeff();
    if (!(top >= std::log(1e-300))) {
        out.particles.weights = Eigen::VectorXd::Constant(ns, 1.0 / static_cast<double>(ns));
        out.underflow = true;
        return out;
    }
    Eigen::VectorXd w(ns);
    for (Eigen::Index s = 0; s < ns; ++s) w(s) = p.weights(s) * std::exp(loglik(s) - top);
    const double total = w.sum();
    if (!(total > 0.0) || !std::isfinite(total)) {
        out.particles.weights = Eigen::VectorXd::Constant(ns, 1.0 / static_cast<double>(ns));
        out.underflow = true;
        return out;
    }
    out.particles.weights = w / total;
    return out;
}

TargetState estimate(const ParticleSet& p) { return TargetState::from(p.states * p.weights); }

ParticleSet resample(const ParticleSet& p, std::mt19937_64& rng) {
    const Eigen::Index ns = p.size();
    if (ns == 0) throw std::invalid_argument("cannot resample an empty particle set");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double step = 1.0 / static_cast<double>(ns);
    const double start = u(rng) * step;
    ParticleSet out;
    out.states.resize(4, ns);
    double cum = p.weights(0);
    Eigen::Index src = 0;
    for (Eigen::Index k = 0; k < ns; ++k) {
        const double pos = start + static_cast<double>(k) * step;
        while (pos >= cum && src + 1 < ns) cum += p.weights(++src);
        out.states.col(k) = p.states.col(src);
    }
    out.weights = Eigen::VectorXd::Constant(ns, step);
    return out;
}

StepResult track_step(const ParticleSet& p, const Allocator& allocate, const TargetState& truth,
                      const std::vector<double>& noise, const SensorGrid& grid, const QuantizerBank& bank,
                      const MotionModel& model, std::mt19937_64& process_rng, std::mt19937_64& resample_rng) {
    StepResult out;
    const ParticleSet predicted = predict(p, model, process_rng);
    out.alloc = allocate(predicted);
    out.reports = make_reports(grid, out.alloc, truth, noise, bank);
    auto updated = update_weights(predicted, out.reports, grid, bank);
    out.underflow = updated.underflow;
    out.prior_spread = position_spread(predicted);
    out.posterior_spread = position_spread(updated.particles);
    out.estimate = estimate(updated.particles);
    out.particles = resample(updated.particles, resample_rng);
    return out;
}

StepResult track_step(const ParticleSet& p, const RateAllocation& alloc, const TargetState& truth,
                      const std::vector<double>& noise, const SensorGrid& grid, const QuantizerBank& bank,
                      const MotionModel& model, std::mt19937_64& process_rng, std::mt19937_64& resample_rng) {
    return track_step(p, [&](const ParticleSet&) { return alloc; }, truth, noise, grid, bank, model, process_rng,
                      resample_rng);
}

}  // namespace bitalloc
