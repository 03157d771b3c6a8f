#include "bitalloc/harness.hpp"

#include "bitalloc/errors.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace bitalloc {

namespace {

std::string fmt(double v) {
    std::array<char, 40> buf{};
    std::snprintf(buf.data(), buf.size(), "%.17g", v);
    return buf.data();
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

struct Field {
    std::string key;
    std::string value;
    int line = 0;
};

[[noreturn]] void bad(const Field& f, const std::string& what) {
    throw ConfigError("line " + std::to_string(f.line) + ": " + f.key + ": " + what);
}

double to_double(const Field& f, std::string_view s) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v))
        bad(f, "expected a finite number, got '" + std::string(s) + "'");
    return v;
}

template <typename Int>
Int to_int(const Field& f, std::string_view s) {
    Int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) bad(f, "expected an integer, got '" + std::string(s) + "'");
    return v;
}

std::vector<double> to_list(const Field& f) {
    std::vector<double> out;
    std::string_view s = f.value;
    while (true) {
        const auto comma = s.find(',');
        out.push_back(to_double(f, trim(s.substr(0, comma))));
        if (comma == std::string_view::npos) break;
        s.remove_prefix(comma + 1);
    }
    return out;
}

std::string join(const double* v, int n) {
    std::string s;
    for (int k = 0; k < n; ++k) s += (k ? "," : "") + fmt(v[k]);
    return s;
}

double elapsed(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

void open_or_throw(std::ofstream& os, const std::filesystem::path& p) {
    os.open(p, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + p.string());
}

}  // namespace

std::string policy_name(Policy p) {
    switch (p) {
        case Policy::Exhaustive: return "exhaustive";
        case Policy::Convex: return "convex";
        case Policy::Adp: return "adp";
        case Policy::Gbfos: return "gbfos";
        case Policy::Greedy: return "greedy";
        case Policy::Nearest: return "nearest";
    }
    return "?";
}

Policy parse_policy(const std::string& name) {
    for (Policy p : all_policies())
        if (policy_name(p) == name) return p;
    throw ConfigError("unknown policy '" + name + "' (expected exhaustive, convex, adp, gbfos, greedy or nearest)");
}

const std::vector<Policy>& all_policies() {
    static const std::vector<Policy> v{Policy::Exhaustive, Policy::Convex, Policy::Adp,
                                       Policy::Gbfos,      Policy::Greedy, Policy::Nearest};
    return v;
}

Mat4 ExperimentConfig::default_prior_cov() {
    // 3 sigma of the position prior is 2 m
    Mat4 c = Mat4::Zero();
    c(0, 0) = c(1, 1) = (2.0 / 3.0) * (2.0 / 3.0);
    c(2, 2) = c(3, 3) = 0.01;
    return c;
}

ExperimentConfig ExperimentConfig::large_profile() {
    ExperimentConfig c;
    c.particles = 5000;
    c.trials = 500;
    return c;
}

BarrierSettings ExperimentConfig::barrier() const {
    const int n = grid_side_count * grid_side_count;
    BarrierSettings s = BarrierSettings::defaults(n, budget);
    if (tau) s.tau = *tau;
    s.epsilon = epsilon;
    s.max_iters = max_iters;
    s.alpha_ls = alpha_ls;
    s.beta_ls = beta_ls;
    return s;
}

QuantizerDesign ExperimentConfig::bank_design() const {
    QuantizerDesign d;
    d.area_side = area_side;
    d.signal = signal;
    d.sample_count = bank_samples;
    d.seed = bank_seed;
    return d;
}

void ExperimentConfig::validate() const {
    auto need = [](bool ok, const std::string& what) {
        if (!ok) throw ConfigError(what);
    };
    need(grid_side_count >= 1, "grid_side_count must be at least 1");
    need(area_side > 0.0, "area_side must be positive");
    need(signal.p0 > 0.0, "p0 must be positive");
    need(signal.alpha > 0.0, "alpha must be positive");
    need(signal.n_exp > 0.0, "n_exp must be positive");
    need(signal.sigma > 0.0, "sigma must be positive");
    need(dt > 0.0, "dt must be positive");
    need(rho >= 0.0, "rho must be non-negative");
    need(steps >= 1, "steps must be at least 1");
    need(particles >= 5, "particles must be at least 5");
    need(budget >= 1 && budget <= 12, "budget must be between 1 and 12");
    need(trials >= 1, "trials must be at least 1");
    need(bank_samples >= 1000, "bank_samples must be at least 1000");
    need(threads >= 0, "threads must be non-negative");
    need(exhaustive_cap >= 1, "exhaustive_cap must be positive");
    need(prior_mean.allFinite(), "prior_mean must be finite");
    try {
        (void)covariance_root(prior_cov);
        barrier().validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    const int n = grid_side_count * grid_side_count;
    if (policy == Policy::Exhaustive && enumerate_count(n, budget) > exhaustive_cap)
        throw ConfigError("exhaustive search over " + std::to_string(enumerate_count(n, budget)) +
                          " allocations exceeds exhaustive_cap");
}

const std::vector<std::string>& required_config_keys() {
    static const std::vector<std::string> k{"policy", "grid_side_count", "budget", "rho"};
    return k;
}

ExperimentConfig parse_config(const std::string& text) {
    std::map<std::string, Field> fields;
    std::istringstream is(text);
    std::string raw;
    int line = 0;
    while (std::getline(is, raw)) {
        ++line;
        const auto hash = raw.find('#');
        const std::string body = trim(std::string_view(raw).substr(0, hash));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line) + ": expected key = value");
        Field f{trim(std::string_view(body).substr(0, eq)), trim(std::string_view(body).substr(eq + 1)), line};
        if (f.key.empty()) throw ConfigError("line " + std::to_string(line) + ": empty key");
        if (f.value.empty()) bad(f, "empty value");
        if (fields.count(f.key)) bad(f, "duplicate key (first on line " + std::to_string(fields[f.key].line) + ")");
        fields[f.key] = f;
    }
    for (const auto& k : required_config_keys())
        if (!fields.count(k)) throw ConfigError("missing required key '" + k + "'");

    ExperimentConfig c;
    for (const auto& [key, f] : fields) {
        const std::string& v = f.value;
        if (key == "policy") {
            try {
                c.policy = parse_policy(v);
            } catch (const ConfigError& e) {
                bad(f, e.what());
            }
        } else if (key == "grid_side_count") c.grid_side_count = to_int<int>(f, v);
        else if (key == "area_side") c.area_side = to_double(f, v);
        else if (key == "p0") c.signal.p0 = to_double(f, v);
        else if (key == "alpha") c.signal.alpha = to_double(f, v);
        else if (key == "n_exp") c.signal.n_exp = to_double(f, v);
        else if (key == "sigma") c.signal.sigma = to_double(f, v);
        else if (key == "dt") c.dt = to_double(f, v);
        else if (key == "rho") c.rho = to_double(f, v);
        else if (key == "steps") c.steps = to_int<int>(f, v);
        else if (key == "particles") c.particles = to_int<int>(f, v);
        else if (key == "budget") c.budget = to_int<int>(f, v);
        else if (key == "trials") c.trials = to_int<int>(f, v);
        else if (key == "seed") c.seed = to_int<std::uint64_t>(f, v);
        else if (key == "prior_mean") {
            const auto l = to_list(f);
            if (l.size() != 4) bad(f, "expected 4 numbers");
            c.prior_mean = Vec4(l[0], l[1], l[2], l[3]);
        } else if (key == "prior_cov") {
            const auto l = to_list(f);
            if (l.size() == 4) {
                c.prior_cov = Vec4(l[0], l[1], l[2], l[3]).asDiagonal();
            } else if (l.size() == 16) {
                for (int k = 0; k < 16; ++k) c.prior_cov(k / 4, k % 4) = l[static_cast<std::size_t>(k)];
            } else {
                bad(f, "expected 4 (diagonal) or 16 (row-major) numbers");
            }
        } else if (key == "tau") {
            if (v == "auto") c.tau.reset();
            else c.tau = to_double(f, v);
        } else if (key == "epsilon") c.epsilon = to_double(f, v);
        else if (key == "max_iters") c.max_iters = to_int<int>(f, v);
        else if (key == "alpha_ls") c.alpha_ls = to_double(f, v);
        else if (key == "beta_ls") c.beta_ls = to_double(f, v);
        else if (key == "decoding") {
            if (v == "sample") c.decoding = Decoding::Sample;
            else if (v == "round") c.decoding = Decoding::Round;
            else bad(f, "expected 'sample' or 'round'");
        } else if (key == "exhaustive_cap") c.exhaustive_cap = to_int<std::uint64_t>(f, v);
        else if (key == "bank_file") c.bank_file = v;
        else if (key == "bank_samples") c.bank_samples = to_int<std::size_t>(f, v);
        else if (key == "bank_seed") c.bank_seed = to_int<std::uint64_t>(f, v);
        else if (key == "threads") c.threads = to_int<int>(f, v);
        else bad(f, "unknown key");
    }
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    try {
        return parse_config(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::string format_config(const ExperimentConfig& c) {
    std::ostringstream os;
    os << "policy = " << policy_name(c.policy) << "\n";
    os << "grid_side_count = " << c.grid_side_count << "\n";
    os << "area_side = " << fmt(c.area_side) << "\n";
    os << "p0 = " << fmt(c.signal.p0) << "\n";
    os << "alpha = " << fmt(c.signal.alpha) << "\n";
    os << "n_exp = " << fmt(c.signal.n_exp) << "\n";
    os << "sigma = " << fmt(c.signal.sigma) << "\n";
    os << "dt = " << fmt(c.dt) << "\n";
    os << "rho = " << fmt(c.rho) << "\n";
    os << "steps = " << c.steps << "\n";
    os << "particles = " << c.particles << "\n";
    os << "budget = " << c.budget << "\n";
    os << "trials = " << c.trials << "\n";
    os << "seed = " << c.seed << "\n";
    os << "prior_mean = " << join(c.prior_mean.data(), 4) << "\n";
    Eigen::Matrix<double, 4, 4, Eigen::RowMajor> rm = c.prior_cov;
    os << "prior_cov = " << join(rm.data(), 16) << "\n";
    os << "tau = " << (c.tau ? fmt(*c.tau) : std::string("auto")) << "\n";
    os << "epsilon = " << fmt(c.epsilon) << "\n";
    os << "max_iters = " << c.max_iters << "\n";
    os << "alpha_ls = " << fmt(c.alpha_ls) << "\n";
    os << "beta_ls = " << fmt(c.beta_ls) << "\n";
    os << "decoding = " << (c.decoding == Decoding::Sample ? "sample" : "round") << "\n";
    os << "exhaustive_cap = " << c.exhaustive_cap << "\n";
    if (!c.bank_file.empty()) os << "bank_file = " << c.bank_file << "\n";
    os << "bank_samples = " << c.bank_samples << "\n";
    os << "bank_seed = " << c.bank_seed << "\n";
    os << "threads = " << c.threads << "\n";
    return os.str();
}

std::mt19937_64 make_stream(std::uint64_t master, int trial, Stream s) {
    std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                      static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(s)};
    return std::mt19937_64(seq);
}

QuantizerBank prepare_bank(const ExperimentConfig& cfg) {
    if (cfg.bank_file.empty()) return build_bank(cfg.budget, cfg.bank_design());
    QuantizerBank bank = load_bank(cfg.bank_file);
    const auto& d = bank.design();
    if (bank.max_rate() < cfg.budget)
        throw ConfigError("bank file " + cfg.bank_file + " stops at rate " + std::to_string(bank.max_rate()) +
                          ", budget is " + std::to_string(cfg.budget));
    if (d.signal.p0 != cfg.signal.p0 || d.signal.alpha != cfg.signal.alpha || d.signal.n_exp != cfg.signal.n_exp ||
        d.signal.sigma != cfg.signal.sigma || d.area_side != cfg.area_side)
        throw ConfigError("bank file " + cfg.bank_file + " was designed for different signal parameters");
    return bank;
}

TrialRecord run_trial(const ExperimentConfig& cfg, const QuantizerBank& bank, int trial) {
    const SensorGrid grid = build_grid(cfg.grid_side_count, cfg.area_side, cfg.signal);
    const MotionModel motion = build_motion(cfg.dt, cfg.rho);
    const Mat4 q_root = covariance_root(motion.Q);
    const int n = static_cast<int>(grid.size());
    const int r = cfg.budget;

    auto truth_rng = make_stream(cfg.seed, trial, Stream::Truth);
    auto meas_rng = make_stream(cfg.seed, trial, Stream::Measurement);
    auto init_rng = make_stream(cfg.seed, trial, Stream::Init);
    auto proc_rng = make_stream(cfg.seed, trial, Stream::Process);
    auto resample_rng = make_stream(cfg.seed, trial, Stream::Resample);
    auto tx_rng = make_stream(cfg.seed, trial, Stream::Transmission);
    std::normal_distribution<double> nd;
    auto draw4 = [&](std::mt19937_64& g) {
        Vec4 z;
        for (int k = 0; k < 4; ++k) z(k) = nd(g);
        return z;
    };

    const ConstraintSystem sys = constraint_system(n, r);
    const TransmissionProbabilities q0 = feasible_start(n, r);
    const BarrierSettings settings = cfg.barrier();

    TrialRecord rec;
    rec.trial = trial;
    TargetState truth = TargetState::from(cfg.prior_mean + covariance_root(cfg.prior_cov) * draw4(truth_rng));
    ParticleSet particles = init_particles(cfg.prior_mean, cfg.prior_cov, cfg.particles, init_rng);

    for (int t = 0; t < cfg.steps; ++t) {
        truth = propagate(truth, motion, q_root * draw4(truth_rng));
        std::vector<double> noise(static_cast<std::size_t>(n));
        for (auto& z : noise) z = cfg.signal.sigma * nd(meas_rng);

        StepRecord s;
        auto allocate = [&](const ParticleSet& predicted) {
            const auto start = std::chrono::steady_clock::now();
            RateAllocation alloc;
            if (cfg.policy == Policy::Nearest) {
                const Vec2 centre = predicted.states.topRows<2>().rowwise().mean();
                const AllocOutcome o = nearest_neighbor(grid, centre, r);
                alloc = o.alloc;
                s.logdet = o.logdet_value;
                s.candidates = o.candidates_examined;
            } else {
                const FimTable table = build_fim_table(grid, predicted, bank, r);
                s.prior_degenerate = table.prior_degenerate;
                if (cfg.policy == Policy::Convex) {
                    const NewtonResult nr = newton_solve(table, sys, settings, q0);
                    alloc = cfg.decoding == Decoding::Sample ? sample_transmission(nr.q, tx_rng)
                                                             : round_decode(nr.q, r);
                    s.newton_iterations = nr.diag.iterations;
                    s.half_decrement_sq = nr.diag.half_decrement_sq;
                    s.residual_inf = nr.diag.residual_inf;
                    s.logdet = logdet(total_fim(alloc.rates, table));
                } else {
                    AllocOutcome o;
                    switch (cfg.policy) {
                        case Policy::Exhaustive: o = exhaustive(table, r, cfg.exhaustive_cap); break;
                        case Policy::Adp: o = adp(table, r); break;
                        case Policy::Gbfos: o = gbfos(table, r); break;
                        case Policy::Greedy: o = greedy(table, r); break;
                        default: break;
                    }
                    alloc = o.alloc;
                    s.logdet = o.logdet_value;
                    s.matrix_sums = o.matrix_sums;
                    s.candidates = o.candidates_examined;
                }
            }
            s.alloc_seconds = elapsed(start);
            return alloc;
        };

        StepResult step = track_step(particles, allocate, truth, noise, grid, bank, motion, proc_rng, resample_rng);
        s.truth = truth;
        s.estimate = step.estimate;
        s.alloc = step.alloc;
        s.underflow = step.underflow;
        rec.degenerate = rec.degenerate || step.underflow;
        rec.steps.push_back(std::move(s));
        particles = std::move(step.particles);
    }
    return rec;
}

MseSeries aggregate(const std::vector<TrialRecord>& records) {
    MseSeries out;
    if (records.empty()) return out;
    const std::size_t steps = records.front().steps.size();
    out.mse.assign(steps, 0.0);
    out.active_sensors.assign(steps, 0.0);
    for (const auto& rec : records) {
        if (rec.steps.size() != steps) throw std::invalid_argument("trials have different lengths");
        for (std::size_t t = 0; t < steps; ++t) {
            const auto& s = rec.steps[t];
            const double dx = s.truth.x - s.estimate.x, dy = s.truth.y - s.estimate.y;
            out.mse[t] += dx * dx + dy * dy;
            out.active_sensors[t] += s.alloc.active();
        }
    }
    const double k = static_cast<double>(records.size());
    for (std::size_t t = 0; t < steps; ++t) {
        out.mse[t] /= k;
        out.active_sensors[t] /= k;
    }
    return out;
}

ExperimentSummary summarize(const ExperimentConfig& cfg, const std::vector<TrialRecord>& records,
                            const MseSeries& series) {
    ExperimentSummary s;
    s.policy = policy_name(cfg.policy);
    s.trials = static_cast<int>(records.size());
    s.steps = static_cast<int>(series.mse.size());
    double bits = 0.0, bits_sq = 0.0, active = 0.0, sums = 0.0, cands = 0.0, iters = 0.0, secs = 0.0;
    std::size_t count = 0;
    for (const auto& rec : records) {
        if (rec.degenerate) ++s.degenerate_trials;
        for (const auto& st : rec.steps) {
            const double b = st.alloc.total();
            bits += b;
            bits_sq += b * b;
            active += st.alloc.active();
            sums += static_cast<double>(st.matrix_sums);
            cands += static_cast<double>(st.candidates);
            iters += st.newton_iterations;
            secs += st.alloc_seconds;
            s.max_newton_iterations = std::max(s.max_newton_iterations, st.newton_iterations);
            s.underflow_steps += st.underflow;
            s.degenerate_prior_steps += st.prior_degenerate;
            ++count;
        }
    }
    if (count == 0) return s;
    const double c = static_cast<double>(count);
    s.mean_bits = bits / c;
    s.std_bits = std::sqrt(std::max(0.0, bits_sq / c - s.mean_bits * s.mean_bits));
    s.mean_active = active / c;
    s.mean_matrix_sums = sums / c;
    s.mean_candidates = cands / c;
    s.mean_newton_iterations = iters / c;
    s.mean_alloc_seconds = secs / c;
    double total = 0.0;
    for (double m : series.mse) total += m;
    s.time_avg_mse = total / static_cast<double>(series.mse.size());
    return s;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const QuantizerBank& bank) {
    cfg.validate();
    if (bank.max_rate() < cfg.budget) throw ConfigError("quantizer bank does not cover the budget");
    const auto start = std::chrono::steady_clock::now();
    ExperimentResult out;
    out.records.resize(static_cast<std::size_t>(cfg.trials));

    int workers = cfg.threads > 0 ? cfg.threads : static_cast<int>(std::thread::hardware_concurrency());
    workers = std::clamp(workers, 1, cfg.trials);
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(cfg.trials));
    auto work = [&] {
        for (int k = next++; k < cfg.trials; k = next++) {
            try {
                out.records[static_cast<std::size_t>(k)] = run_trial(cfg, bank, k);
            } catch (...) {
                errors[static_cast<std::size_t>(k)] = std::current_exception();
            }
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    out.series = aggregate(out.records);
    out.summary = summarize(cfg, out.records, out.series);
    out.summary.total_seconds = elapsed(start);
    return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    return run_experiment(cfg, prepare_bank(cfg));
}

void write_outputs(const ExperimentResult& result, const ExperimentConfig& cfg, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream os;

    open_or_throw(os, dir / "mse.csv");
    os << "step,mse,active_sensors\n";
    for (std::size_t t = 0; t < result.series.mse.size(); ++t)
        os << t + 1 << "," << fmt(result.series.mse[t]) << "," << fmt(result.series.active_sensors[t]) << "\n";
    os.close();

    open_or_throw(os, dir / "trials.csv");
    os << "trial,step,truth_x,truth_y,est_x,est_y,alloc\n";
    for (const auto& rec : result.records)
        for (std::size_t t = 0; t < rec.steps.size(); ++t) {
            const auto& s = rec.steps[t];
            os << rec.trial << "," << t + 1 << "," << fmt(s.truth.x) << "," << fmt(s.truth.y) << ","
               << fmt(s.estimate.x) << "," << fmt(s.estimate.y) << "," << s.alloc.joined() << "\n";
        }
    os.close();

    open_or_throw(os, dir / "diagnostics.csv");
    os << "trial,step,total_bits,logdet,matrix_sums,candidates,newton_iterations,half_decrement_sq,residual_inf,"
          "prior_degenerate,underflow\n";
    for (const auto& rec : result.records)
        for (std::size_t t = 0; t < rec.steps.size(); ++t) {
            const auto& s = rec.steps[t];
            os << rec.trial << "," << t + 1 << "," << s.alloc.total() << "," << fmt(s.logdet) << "," << s.matrix_sums
               << "," << s.candidates << "," << s.newton_iterations << "," << fmt(s.half_decrement_sq) << ","
               << fmt(s.residual_inf) << "," << s.prior_degenerate << "," << s.underflow << "\n";
        }
    os.close();

    const auto& m = result.summary;
    open_or_throw(os, dir / "summary.csv");
    os << "policy,trials,steps,mean_bits,std_bits,mean_active,time_avg_mse,mean_matrix_sums,mean_candidates,"
          "mean_newton_iterations,max_newton_iterations,underflow_steps,degenerate_prior_steps,degenerate_trials\n";
    os << m.policy << "," << m.trials << "," << m.steps << "," << fmt(m.mean_bits) << "," << fmt(m.std_bits) << ","
       << fmt(m.mean_active) << "," << fmt(m.time_avg_mse) << "," << fmt(m.mean_matrix_sums) << ","
       << fmt(m.mean_candidates) << "," << fmt(m.mean_newton_iterations) << "," << m.max_newton_iterations << ","
       << m.underflow_steps << "," << m.degenerate_prior_steps << "," << m.degenerate_trials << "\n";
    os.close();

    open_or_throw(os, dir / "timing.csv");
    os << "policy,mean_alloc_seconds,total_seconds\n";
    os << m.policy << "," << fmt(m.mean_alloc_seconds) << "," << fmt(m.total_seconds) << "\n";
    os.close();

    open_or_throw(os, dir / "config.txt");
    os << format_config(cfg);
}

MseSeries read_mse_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read " + path.string());
    std::string line;
    std::getline(is, line);
    if (trim(line) != "step,mse,active_sensors") throw std::runtime_error(path.string() + ": unexpected header");
    MseSeries out;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        std::istringstream ls(line);
        std::string a, b, c;
        if (!std::getline(ls, a, ',') || !std::getline(ls, b, ',') || !std::getline(ls, c))
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": malformed row");
        out.mse.push_back(std::stod(b));
        out.active_sensors.push_back(std::stod(trim(c)));
    }
    return out;
}

}  // namespace bitalloc
