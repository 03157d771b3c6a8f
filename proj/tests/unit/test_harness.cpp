#include "bitalloc/errors.hpp"
#include "bitalloc/harness.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace bitalloc;

namespace {

QuantizerBank quick_bank(int max_rate) {
    QuantizerDesign d;
    d.sample_count = 4000;
    d.seed = 17;
    const auto amps = amplitude_samples(d);
    std::vector<BankEntry> entries;
    for (int m = 0; m <= max_rate; ++m) entries.push_back({equiprobable_thresholds(m, amps), 0.0, d.seed});
    return QuantizerBank(entries, d);
}

ExperimentConfig small_config(Policy p) {
    ExperimentConfig c;
    c.policy = p;
    c.steps = 4;
    c.particles = 150;
    c.trials = 3;
    c.budget = 3;
    c.threads = 2;
    return c;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("bitalloc_harness_" + name);
    std::filesystem::remove_all(p);
    return p;
}

}  // namespace

TEST(Config, DefaultsMatchExperimentParameters) {
    const ExperimentConfig c;
    EXPECT_EQ(c.area_side, 20.0);
    EXPECT_EQ(c.signal.p0, 1e3);
    EXPECT_EQ(c.signal.sigma, 1.0);
    EXPECT_EQ(c.dt, 0.5);
    EXPECT_EQ(c.steps, 20);
    EXPECT_EQ(c.budget, 5);
    EXPECT_EQ(c.grid_side_count, 3);
    EXPECT_EQ(c.particles, 1000);
    EXPECT_EQ(c.trials, 100);
    const auto big = ExperimentConfig::large_profile();
    EXPECT_EQ(big.particles, 5000);
    EXPECT_EQ(big.trials, 500);
}

TEST(Config, RoundTripIsExact) {
    ExperimentConfig c = small_config(Policy::Gbfos);
    c.rho = 0.1;
    c.tau = 3.25e-4;
    c.decoding = Decoding::Round;
    c.prior_cov(0, 1) = c.prior_cov(1, 0) = 0.01;
    c.seed = 0xdeadbeefcafeULL;
    const std::string text = format_config(c);
    const ExperimentConfig back = parse_config(text);
    EXPECT_EQ(format_config(back), text);
    EXPECT_EQ(back.policy, Policy::Gbfos);
    EXPECT_EQ(back.rho, 0.1);
    EXPECT_EQ(*back.tau, 3.25e-4);
    EXPECT_EQ(back.seed, c.seed);
    EXPECT_TRUE(back.prior_cov == c.prior_cov);
}

TEST(Config, MissingRequiredKeyIsNamed) {
    try {
        parse_config("policy = convex\ngrid_side_count = 3\nbudget = 5\n");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("rho"), std::string::npos) << e.what();
    }
}

TEST(Config, UnknownKeyRejectedWithLine) {
    try {
        parse_config("policy = convex\ngrid_side_count = 3\nbudget = 5\nrho = 0.1\n# note\nbogus = 1\n");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("line 6"), std::string::npos) << msg;
        EXPECT_NE(msg.find("bogus"), std::string::npos) << msg;
    }
}

TEST(Config, MalformedValuesRejected) {
    const std::string base = "policy = convex\ngrid_side_count = 3\nbudget = 5\n";
    EXPECT_THROW(parse_config(base + "rho = abc\n"), ConfigError);
    EXPECT_THROW(parse_config(base + "rho = 0.1\nrho = 0.2\n"), ConfigError);
    EXPECT_THROW(parse_config(base + "rho = 0.1\nsteps = 2.5\n"), ConfigError);
    EXPECT_THROW(parse_config(base + "rho = 0.1\nprior_mean = 1,2,3\n"), ConfigError);
    EXPECT_THROW(parse_config(base + "rho = 0.1\ndecoding = maybe\n"), ConfigError);
    EXPECT_THROW(parse_config(base + "rho = -1\n"), ConfigError);
    EXPECT_THROW(parse_config("policy = magic\ngrid_side_count = 3\nbudget = 5\nrho = 0.1\n"), ConfigError);
    EXPECT_THROW(parse_config(base + "rho = 0.1\nnot a pair\n"), ConfigError);
}

TEST(Config, DiagonalPriorCovAccepted) {
    const auto c = parse_config("policy = adp\ngrid_side_count = 2\nbudget = 2\nrho = 0.1\nprior_cov = 1,2,3,4\n");
    EXPECT_EQ(c.prior_cov(2, 2), 3.0);
    EXPECT_EQ(c.prior_cov(0, 1), 0.0);
    EXPECT_EQ(c.grid_side_count, 2);
}

TEST(Config, LoadReportsPath) {
    EXPECT_THROW(load_config("/nonexistent/cfg.txt"), ConfigError);
}

TEST(Streams, IndependentPerSourceAndTrial) {
    auto a = make_stream(5, 0, Stream::Truth);
    auto b = make_stream(5, 0, Stream::Measurement);
    auto c = make_stream(5, 1, Stream::Truth);
    auto a2 = make_stream(5, 0, Stream::Truth);
    const auto va = a();
    EXPECT_NE(va, b());
    EXPECT_NE(va, c());
    EXPECT_EQ(va, a2());
}

TEST(Experiment, TruthAndNoiseIgnorePolicy) {
    const auto bank = quick_bank(3);
    const auto greedy = run_trial(small_config(Policy::Greedy), bank, 1);
    const auto nearest = run_trial(small_config(Policy::Nearest), bank, 1);
    ASSERT_EQ(greedy.steps.size(), nearest.steps.size());
    for (std::size_t t = 0; t < greedy.steps.size(); ++t) {
        EXPECT_EQ(greedy.steps[t].truth.x, nearest.steps[t].truth.x);
        EXPECT_EQ(greedy.steps[t].truth.vy, nearest.steps[t].truth.vy);
    }
}

TEST(Experiment, SingleTrialMseIsSquaredPositionError) {
    const auto bank = quick_bank(3);
    auto cfg = small_config(Policy::Adp);
    cfg.trials = 1;
    const auto res = run_experiment(cfg, bank);
    ASSERT_EQ(res.series.mse.size(), 4u);
    for (std::size_t t = 0; t < 4; ++t) {
        const auto& s = res.records[0].steps[t];
        const double e = std::pow(s.truth.x - s.estimate.x, 2) + std::pow(s.truth.y - s.estimate.y, 2);
        EXPECT_DOUBLE_EQ(res.series.mse[t], e);
    }
}

TEST(Experiment, PerfectEstimatesGiveZeroMse) {
    TrialRecord r;
    for (int t = 0; t < 3; ++t) {
        StepRecord s;
        s.truth = s.estimate = TargetState::from(Vec4(t, -t, 1, 1));
        s.alloc.rates = {1, 0, 2};
        r.steps.push_back(s);
    }
    const auto series = aggregate({r, r});
    for (double m : series.mse) EXPECT_EQ(m, 0.0);
    for (double a : series.active_sensors) EXPECT_EQ(a, 2.0);
}

TEST(Experiment, BitStatisticsUsePopulationStd) {
    TrialRecord r;
    for (int bits : {3, 5}) {
        StepRecord s;
        s.alloc.rates = {bits, 0};
        r.steps.push_back(s);
    }
    const auto sum = summarize(small_config(Policy::Convex), {r}, aggregate({r}));
    EXPECT_DOUBLE_EQ(sum.mean_bits, 4.0);
    EXPECT_DOUBLE_EQ(sum.std_bits, 1.0);
}

TEST(Experiment, NearestActivatesOneSensor) {
    const auto bank = quick_bank(3);
    const auto res = run_experiment(small_config(Policy::Nearest), bank);
    for (double a : res.series.active_sensors) EXPECT_EQ(a, 1.0);
    for (const auto& rec : res.records)
        for (const auto& s : rec.steps) EXPECT_EQ(s.alloc.total(), 3);
}

TEST(Experiment, ExhaustiveExamines1287PerStep) {
    const auto bank = quick_bank(5);
    auto cfg = small_config(Policy::Exhaustive);
    cfg.budget = 5;
    cfg.trials = 1;
    cfg.steps = 2;
    const auto res = run_experiment(cfg, bank);
    for (const auto& s : res.records[0].steps) EXPECT_EQ(s.candidates, 1287);
    EXPECT_EQ(res.summary.mean_candidates, 1287.0);
}

TEST(Experiment, ConvexSpendsBudgetOnAverage) {
    const auto bank = quick_bank(3);
    auto cfg = small_config(Policy::Convex);
    cfg.trials = 4;
    const auto res = run_experiment(cfg, bank);
    EXPECT_GT(res.summary.mean_newton_iterations, 0.0);
    EXPECT_LE(res.summary.max_newton_iterations, cfg.max_iters);
    EXPECT_GT(res.summary.mean_bits, 1.0);
    EXPECT_LT(res.summary.mean_bits, 5.0);
    cfg.decoding = Decoding::Round;
    const auto rounded = run_experiment(cfg, bank);
    for (const auto& rec : rounded.records)
        for (const auto& s : rec.steps) EXPECT_EQ(s.alloc.total(), 3);
}

TEST(Experiment, ThreadCountDoesNotChangeResults) {
    const auto bank = quick_bank(3);
    auto cfg = small_config(Policy::Convex);
    cfg.threads = 1;
    const auto one = run_experiment(cfg, bank);
    cfg.threads = 3;
    const auto three = run_experiment(cfg, bank);
    EXPECT_EQ(one.series.mse, three.series.mse);
    EXPECT_EQ(one.summary.std_bits, three.summary.std_bits);
}

TEST(Outputs, CsvReReadMatchesAndRunsAreByteIdentical) {
    const auto bank = quick_bank(3);
    const auto cfg = small_config(Policy::Gbfos);
    const auto a = scratch("a"), b = scratch("b");
    const auto res = run_experiment(cfg, bank);
    write_outputs(res, cfg, a);
    write_outputs(run_experiment(cfg, bank), cfg, b);

    const auto back = read_mse_csv(a / "mse.csv");
    ASSERT_EQ(back.mse.size(), res.series.mse.size());
    for (std::size_t t = 0; t < back.mse.size(); ++t) {
        EXPECT_NEAR(back.mse[t], res.series.mse[t], 1e-12 * std::max(1.0, res.series.mse[t]));
        EXPECT_EQ(back.active_sensors[t], res.series.active_sensors[t]);
    }
    for (const char* f : {"mse.csv", "trials.csv", "summary.csv", "diagnostics.csv", "config.txt"})
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    EXPECT_TRUE(std::filesystem::exists(a / "timing.csv"));
    EXPECT_EQ(format_config(load_config(a / "config.txt")), format_config(cfg));
    std::filesystem::remove_all(a);
    std::filesystem::remove_all(b);
}

TEST(Bank, FileMustMatchSignal) {
    const auto dir = scratch("bank");
    std::filesystem::create_directories(dir);
    save_bank(quick_bank(2), dir / "b.txt");
    auto cfg = small_config(Policy::Greedy);
    cfg.budget = 2;
    cfg.bank_file = (dir / "b.txt").string();
    EXPECT_EQ(prepare_bank(cfg).max_rate(), 2);
    cfg.budget = 3;
    EXPECT_THROW(prepare_bank(cfg), ConfigError);
    cfg.budget = 2;
    cfg.signal.sigma = 2.0;
    EXPECT_THROW(prepare_bank(cfg), ConfigError);
    std::filesystem::remove_all(dir);
}
