#pragma once

#include "bitalloc/allocators.hpp"
#include "bitalloc/convex.hpp"
#include "bitalloc/model.hpp"
#include "bitalloc/quantizer.hpp"
#include "bitalloc/tracker.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace bitalloc {

enum class Policy { Exhaustive, Convex, Adp, Gbfos, Greedy, Nearest };

std::string policy_name(Policy p);
/// Throws ConfigError for unknown names.
Policy parse_policy(const std::string& name);
const std::vector<Policy>& all_policies();

enum class Decoding { Sample, Round };

struct ExperimentConfig {
    Policy policy = Policy::Convex;
    int grid_side_count = 3;
    double area_side = 20.0;
    SignalParams signal;
    double dt = 0.5;
    double rho = 2.5e-3;
    int steps = 20;
    int particles = 1000;
    int budget = 5;
    int trials = 100;
    Vec4 prior_mean{-8.0, -8.0, 2.0, 2.0};
    Mat4 prior_cov = default_prior_cov();
    std::uint64_t seed = 1;

    std::optional<double> tau;  // unset: BarrierSettings::defaults
    double epsilon = 1e-8;
    int max_iters = 100;
    double alpha_ls = 0.25;
    double beta_ls = 0.5;
    Decoding decoding = Decoding::Sample;
    std::uint64_t exhaustive_cap = kDefaultExhaustiveCap;

    std::string bank_file;  // empty: design the bank in memory
    std::size_t bank_samples = 20000;
    std::uint64_t bank_seed = 20110705;
    int threads = 0;  // 0: one per hardware thread

    static Mat4 default_prior_cov();
    /// Larger run: 5000 particles, 500 trials.
    static ExperimentConfig large_profile();

    BarrierSettings barrier() const;
    QuantizerDesign bank_design() const;
    /// Throws ConfigError naming the offending field.
    void validate() const;
};

/// Keys that must appear in every config file.
const std::vector<std::string>& required_config_keys();

/// Flat key = value text; '#' starts a comment. Unknown or duplicate keys and
/// missing required keys are ConfigErrors carrying the line number or key.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Every key, so parse_config(format_config(c)) reproduces c exactly.
std::string format_config(const ExperimentConfig& cfg);

struct StepRecord {
    TargetState truth;
    TargetState estimate;
    RateAllocation alloc;
    double logdet = 0.0;  // of the FIM the policy was scored on; NaN for nearest
    std::int64_t matrix_sums = 0;
    std::int64_t candidates = 0;
    int newton_iterations = 0;
    double half_decrement_sq = 0.0;
    double residual_inf = 0.0;
    bool prior_degenerate = false;
    bool underflow = false;
    double alloc_seconds = 0.0;  // wall clock, kept out of deterministic outputs
};

struct TrialRecord {
    int trial = 0;
    std::vector<StepRecord> steps;
    bool degenerate = false;  // some step hit the likelihood underflow reset
};

struct MseSeries {
    std::vector<double> mse;
    std::vector<double> active_sensors;
};

struct ExperimentSummary {
    std::string policy;
    int trials = 0;
    int steps = 0;
    double mean_bits = 0.0;
    double std_bits = 0.0;
    double mean_active = 0.0;
    double time_avg_mse = 0.0;
    double mean_matrix_sums = 0.0;
    double mean_candidates = 0.0;
    double mean_newton_iterations = 0.0;
    int max_newton_iterations = 0;
    int underflow_steps = 0;
    int degenerate_prior_steps = 0;
    int degenerate_trials = 0;
    double mean_alloc_seconds = 0.0;
    double total_seconds = 0.0;
};

struct ExperimentResult {
    std::vector<TrialRecord> records;
    MseSeries series;
    ExperimentSummary summary;
};

/// Independent generator for one (trial, source) pair.
enum class Stream : std::uint64_t { Truth = 1, Measurement, Init, Process, Resample, Transmission };
std::mt19937_64 make_stream(std::uint64_t master, int trial, Stream s);

/// Loads cfg.bank_file or designs a bank for rates 0..budget.
QuantizerBank prepare_bank(const ExperimentConfig& cfg);

TrialRecord run_trial(const ExperimentConfig& cfg, const QuantizerBank& bank, int trial);

/// All trials (in a worker pool), reduced in trial order.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const QuantizerBank& bank);
ExperimentResult run_experiment(const ExperimentConfig& cfg);

MseSeries aggregate(const std::vector<TrialRecord>& records);
ExperimentSummary summarize(const ExperimentConfig& cfg, const std::vector<TrialRecord>& records,
                            const MseSeries& series);

/// mse.csv, trials.csv, summary.csv, diagnostics.csv, timing.csv, config.txt.
void write_outputs(const ExperimentResult& result, const ExperimentConfig& cfg, const std::filesystem::path& dir);
MseSeries read_mse_csv(const std::filesystem::path& path);

}  // namespace bitalloc
