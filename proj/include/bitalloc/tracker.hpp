#pragma once

#include "bitalloc/allocators.hpp"
#include "bitalloc/model.hpp"
#include "bitalloc/particles.hpp"
#include "bitalloc/quantizer.hpp"

#include <functional>
#include <random>
#include <vector>

namespace bitalloc {

/// Quantized level sent by one sensor; silent sensors send nothing.
struct SensorReport {
    std::size_t sensor_index = 0;
    int rate = 0;
    int level = 0;
};

struct WeightUpdate {
    ParticleSet particles;
    bool underflow = false;  // every likelihood was below 1e-300; weights reset to uniform
};

/// S with S S^T = cov for a symmetric PSD cov (eigen-decomposition, so
/// singular covariances are fine). Throws std::invalid_argument otherwise.
Mat4 covariance_root(const Mat4& cov);

/// Gaussian draws around `mean`; throws std::invalid_argument unless cov is
/// symmetric PSD.
ParticleSet init_particles(const Vec4& mean, const Mat4& cov, int count, std::mt19937_64& rng);

/// Propagates every particle with its own N(0, Q) draw; weights become uniform.
ParticleSet predict(const ParticleSet& p, const MotionModel& model, std::mt19937_64& rng);

/// Quantizes z = a + noise for every sensor with a positive rate.
std::vector<SensorReport> make_reports(const SensorGrid& grid, const RateAllocation& alloc, const TargetState& truth,
                                       const std::vector<double>& noise, const QuantizerBank& bank);

/// Multiplies weights by the product of report likelihoods (log domain) and
/// normalizes.
WeightUpdate update_weights(const ParticleSet& p, const std::vector<SensorReport>& reports, const SensorGrid& grid,
                            const QuantizerBank& bank);

/// Weighted mean state.
TargetState estimate(const ParticleSet& p);

/// Systematic resampling; output weights uniform.
ParticleSet resample(const ParticleSet& p, std::mt19937_64& rng);

using Allocator = std::function<RateAllocation(const ParticleSet& predicted)>;

struct StepResult {
    ParticleSet particles;  // after resampling
    TargetState estimate;   // taken before resampling
    RateAllocation alloc;
    std::vector<SensorReport> reports;
    double prior_spread = 0.0;      // trace of the predicted position covariance
    double posterior_spread = 0.0;  // same, after the weight update
    bool underflow = false;
};

/// One filter cycle: predict, allocate on the predicted cloud, quantize the
/// measurements taken at `truth`, update, estimate, resample. `noise` holds
/// one measurement-noise sample per sensor.
StepResult track_step(const ParticleSet& p, const Allocator& allocate, const TargetState& truth,
                      const std::vector<double>& noise, const SensorGrid& grid, const QuantizerBank& bank,
                      const MotionModel& model, std::mt19937_64& process_rng, std::mt19937_64& resample_rng);

StepResult track_step(const ParticleSet& p, const RateAllocation& alloc, const TargetState& truth,
                      const std::vector<double>& noise, const SensorGrid& grid, const QuantizerBank& bank,
                      const MotionModel& model, std::mt19937_64& process_rng, std::mt19937_64& resample_rng);

}  // namespace bitalloc
