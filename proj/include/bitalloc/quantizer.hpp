#pragma once

#include "bitalloc/model.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace bitalloc {

/// Probabilities below this are treated as empty levels inside the kappa sum.
inline constexpr double kProbabilityFloor = 1e-12;

/// Decision thresholds for an m-bit quantizer: 2^m levels separated by
/// 2^m - 1 finite interior thresholds; the outer boundaries are -inf/+inf.
struct ThresholdVector {
    int rate = 0;
    std::vector<double> interior;

    int levels() const { return 1 << rate; }
    /// Boundary eta_l for l in [0, levels()]; eta_0 = -inf, eta_levels = +inf.
    double boundary(int l) const;
    /// Throws std::invalid_argument unless the interior count is 2^rate - 1
    /// and the thresholds are finite and strictly increasing.
    void validate() const;
};

/// One optimized quantizer plus the provenance of its design run.
struct BankEntry {
    ThresholdVector thresholds;
    double objective_estimate = 0.0;
    std::uint64_t seed = 0;
};

/// Inputs to the offline threshold design.
struct QuantizerDesign {
    double area_side = 20.0;
    SignalParams signal;
    std::size_t sample_count = 20000;
    std::uint64_t seed = 20110705;
};

/// Per-rate thresholds for m = 0..max_rate, identical at every sensor.
class QuantizerBank {
public:
    QuantizerBank() = default;
    /// entries[m] must hold the rate-m quantizer; entries[0] is the silent one.
    QuantizerBank(std::vector<BankEntry> entries, QuantizerDesign design);

    int max_rate() const { return static_cast<int>(entries_.size()) - 1; }
    const ThresholdVector& thresholds(int m) const;
    const BankEntry& entry(int m) const;
    const QuantizerDesign& design() const { return design_; }

private:
    std::vector<BankEntry> entries_;
    QuantizerDesign design_;
};

/// Q(x) = P(N(0,1) > x), evaluated through erfc.
double gaussian_upper_tail(double x);

/// Level index l with eta_l <= z < eta_{l+1}. Throws for rate 0.
int quantize(double z, const ThresholdVector& thr);

/// P(D = l | amplitude a). Rate 0 carries no data and returns 1 for l = 0.
double level_probability(int l, double a, double sigma, const ThresholdVector& thr);

/// Information kernel kappa; 4*kappa is the Fisher information about the
/// amplitude carried by one quantized report. Zero for rate 0.
double kappa(double a, double sigma, const ThresholdVector& thr);

/// Amplitudes at i.i.d. uniform sensor/target pairs on [-b/2, b/2]^2, sorted.
std::vector<double> amplitude_samples(const QuantizerDesign& design);

/// Monte Carlo estimate of E[4 kappa] over the given amplitude samples.
double design_objective(const ThresholdVector& thr, const std::vector<double>& amplitudes, double sigma);

/// Thresholds at the empirical 1/2^m quantiles of the amplitude samples.
ThresholdVector equiprobable_thresholds(int m, const std::vector<double>& sorted_amplitudes);

/// Coordinate ascent with golden-section line searches on E[4 kappa].
BankEntry optimize_thresholds(int m, const std::vector<double>& sorted_amplitudes, double sigma,
                              std::uint64_t seed = 0);
BankEntry optimize_thresholds(int m, const QuantizerDesign& design);

/// Optimizes every rate 1..max_rate against one shared sample set.
QuantizerBank build_bank(int max_rate, const QuantizerDesign& design);

std::string format_bank(const QuantizerBank& bank);
QuantizerBank parse_bank(const std::string& text);
void save_bank(const QuantizerBank& bank, const std::filesystem::path& path);
QuantizerBank load_bank(const std::filesystem::path& path);

}  // namespace bitalloc
