#include "bitalloc/errors.hpp"
#include "bitalloc/harness.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>
#include <limits>
#include <map>

using namespace bitalloc;

namespace {

// "1..R" or just "R"; rate 0 is always part of the bank.
int parse_rates(const std::string& s) {
    const auto dots = s.find("..");
    const std::string lo = dots == std::string::npos ? "1" : s.substr(0, dots);
    const std::string hi = dots == std::string::npos ? s : s.substr(dots + 2);
    int a = 0, b = 0;
    try {
        std::size_t pa = 0, pb = 0;
        a = std::stoi(lo, &pa);
        b = std::stoi(hi, &pb);
        if (pa != lo.size() || pb != hi.size()) throw std::invalid_argument(s);
    } catch (const std::logic_error&) {
        throw ConfigError("--rates expects 1..R, got '" + s + "'");
    }
    if (a != 1 || b < 1 || b > 12) throw ConfigError("--rates must be 1..R with 1 <= R <= 12");
    return b;
}

int simulate(const std::string& config_path, const std::string& policy, std::optional<std::uint64_t> seed,
             std::optional<int> trials, const std::string& out) {
    ExperimentConfig cfg = load_config(config_path);
    if (!policy.empty()) cfg.policy = parse_policy(policy);
    if (seed) cfg.seed = *seed;
    if (trials) cfg.trials = *trials;
    cfg.validate();
    const auto res = run_experiment(cfg);
    write_outputs(res, cfg, out);
    const auto& s = res.summary;
    std::printf("%s: %d trials x %d steps, time-avg MSE %.6g, bits %.4f +- %.4f, active %.3f, %.1f s -> %s\n",
                s.policy.c_str(), s.trials, s.steps, s.time_avg_mse, s.mean_bits, s.std_bits, s.mean_active,
                s.total_seconds, out.c_str());
    if (s.underflow_steps > 0) std::printf("warning: %d steps hit the likelihood underflow reset\n", s.underflow_steps);
    return 0;
}

int thresholds(const std::string& rates, const std::string& out, const std::string& config_path,
               std::optional<std::size_t> samples, std::optional<std::uint64_t> seed) {
    const int r = parse_rates(rates);
    QuantizerDesign design;
    if (!config_path.empty()) design = load_config(config_path).bank_design();
    if (samples) design.sample_count = *samples;
    if (seed) design.seed = *seed;
    const auto start = std::chrono::steady_clock::now();
    const QuantizerBank bank = build_bank(r, design);
    save_bank(bank, out);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    for (int m = 1; m <= r; ++m)
        std::printf("rate %d: objective %.10g\n", m, bank.entry(m).objective_estimate);
    std::printf("wrote %s (%.1f s)\n", out.c_str(), secs);
    return 0;
}

int bench_alloc(int n, int r, int instances, std::uint64_t seed) {
    if (n < 1 || r < 1 || instances < 1) throw ConfigError("bench-alloc needs --n, --r and --instances >= 1");
    const bool with_exhaustive = enumerate_count(n, r) <= kDefaultExhaustiveCap;
    std::mt19937_64 rng(seed);
    const ConstraintSystem sys = constraint_system(n, r);
    const TransmissionProbabilities q0 = feasible_start(n, r);
    const BarrierSettings settings = BarrierSettings::defaults(n, r);

    struct Acc {
        double gap = 0.0, worst = 0.0, sums = 0.0, cands = 0.0, secs = 0.0;
    };
    const std::vector<std::string> order{"exhaustive", "adp", "gbfos", "greedy", "convex"};
    std::map<std::string, Acc> acc;
    for (int k = 0; k < instances; ++k) {
        const FimTable table = make_random_table(n, r, rng);
        std::map<std::string, AllocOutcome> got;
        auto timed = [&](const std::string& name, auto&& fn) {
            const auto start = std::chrono::steady_clock::now();
            got[name] = fn();
            acc[name].secs += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        };
        if (with_exhaustive) timed("exhaustive", [&] { return exhaustive(table, r); });
        timed("adp", [&] { return adp(table, r); });
        timed("gbfos", [&] { return gbfos(table, r); });
        timed("greedy", [&] { return greedy(table, r); });
        timed("convex", [&] {
            AllocOutcome o;
            o.alloc = round_decode(newton_solve(table, sys, settings, q0).q, r);
            o.logdet_value = logdet(total_fim(o.alloc.rates, table));
            return o;
        });
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& [name, o] : got) best = std::max(best, o.logdet_value);
        for (const auto& [name, o] : got) {
            auto& a = acc[name];
            a.gap += best - o.logdet_value;
            a.worst = std::max(a.worst, best - o.logdet_value);
            a.sums += static_cast<double>(o.matrix_sums);
            a.cands += static_cast<double>(o.candidates_examined);
        }
    }
    std::printf("policy,mean_logdet_gap,max_logdet_gap,mean_matrix_sums,mean_candidates,mean_seconds\n");
    for (const auto& name : order) {
        if (!acc.count(name)) continue;
        const auto& a = acc[name];
        const double k = instances;
        std::printf("%s,%.6g,%.6g,%.6g,%.6g,%.3g\n", name.c_str(), a.gap / k, a.worst, a.sums / k, a.cands / k,
                    a.secs / k);
    }
    if (!with_exhaustive) std::printf("# exhaustive skipped: gaps are relative to the best policy found\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bit allocation for quantized target tracking in sensor networks"};
    app.require_subcommand(1);

    auto* sim = app.add_subcommand("simulate", "run tracking trials for one policy and write CSV files");
    std::string config_path, policy, out = "out";
    std::optional<std::uint64_t> seed;
    std::optional<int> trials;
    sim->add_option("--config", config_path, "key = value config file")->required();
    sim->add_option("--policy", policy, "exhaustive|convex|adp|gbfos|greedy|nearest");
    sim->add_option("--seed", seed, "master seed");
    sim->add_option("--trials", trials, "number of trials");
    sim->add_option("--out", out, "output directory");

    auto* thr = app.add_subcommand("thresholds", "design the quantizer bank offline");
    std::string rates, bank_out, thr_config;
    std::optional<std::size_t> samples;
    std::optional<std::uint64_t> bank_seed;
    thr->add_option("--rates", rates, "1..R")->required();
    thr->add_option("--out", bank_out, "bank file")->required();
    thr->add_option("--config", thr_config, "take signal parameters and design settings from a config");
    thr->add_option("--samples", samples, "amplitude samples");
    thr->add_option("--seed", bank_seed, "amplitude sampling seed");

    auto* bench = app.add_subcommand("bench-alloc", "compare allocators on random FIM tables");
    int n = 0, r = 0, instances = 0;
    std::uint64_t bench_seed = 1;
    bench->add_option("--n", n, "sensors")->required();
    bench->add_option("--r", r, "bit budget")->required();
    bench->add_option("--instances", instances, "random tables")->required();
    bench->add_option("--seed", bench_seed, "generator seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*sim) return simulate(config_path, policy, seed, trials, out);
        if (*thr) return thresholds(rates, bank_out, thr_config, samples, bank_seed);
        if (*bench) return bench_alloc(n, r, instances, bench_seed);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
