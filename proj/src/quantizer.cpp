#include "bitalloc/quantizer.hpp"

#include "bitalloc/errors.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace bitalloc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Smaller of the two Gaussian tails at u; one erfc call per boundary.
inline double small_tail(double u) { return 0.5 * std::erfc(std::abs(u) * std::numbers::sqrt2 / 2.0); }

// Probability mass between standardized boundaries u_lo < u_hi, evaluated on
// whichever side keeps the subtraction free of cancellation.
inline double interval_mass(double u_lo, double t_lo, double u_hi, double t_hi) {
    if (u_lo >= 0.0) return t_lo - t_hi;
    if (u_hi <= 0.0) return t_hi - t_lo;
    return 1.0 - t_lo - t_hi;
}

inline double gauss_kernel(double u) { return std::isinf(u) ? 0.0 : std::exp(-0.5 * u * u); }

// (e_lo - e_hi)^2 / p for one level, zero when the level is empty.
inline double level_term(double lo, double hi, double a, double sigma) {
    const double u_lo = (lo - a) / sigma;
    const double u_hi = (hi - a) / sigma;
    const double p = interval_mass(u_lo, small_tail(u_lo), u_hi, small_tail(u_hi));
    if (p < kProbabilityFloor) return 0.0;
    const double de = gauss_kernel(u_lo) - gauss_kernel(u_hi);
    return de * de / p;
}

std::string format_double(double v) {
    std::array<char, 40> buf{};
    std::snprintf(buf.data(), buf.size(), "%.17g", v);
    return buf.data();
}

double parse_double(std::string_view s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ConfigError("bank file: invalid number '" + std::string(s) + "'");
    return v;
}

std::uint64_t parse_u64(std::string_view s) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ConfigError("bank file: invalid integer '" + std::string(s) + "'");
    return v;
}

}  // namespace

double ThresholdVector::boundary(int l) const {
    if (l <= 0) return -kInf;
    if (l >= levels()) return kInf;
    return interior[static_cast<std::size_t>(l - 1)];
}

void ThresholdVector::validate() const {
    if (rate < 0 || rate > 20) throw std::invalid_argument("quantizer rate out of range");
    if (interior.size() != static_cast<std::size_t>(levels() - 1))
        throw std::invalid_argument("rate " + std::to_string(rate) + " quantizer needs " +
                                    std::to_string(levels() - 1) + " interior thresholds");
    for (std::size_t j = 0; j < interior.size(); ++j) {
        if (!std::isfinite(interior[j])) throw std::invalid_argument("non-finite quantizer threshold");
        if (j > 0 && !(interior[j] > interior[j - 1]))
            throw std::invalid_argument("quantizer thresholds must be strictly increasing");
    }
}

QuantizerBank::QuantizerBank(std::vector<BankEntry> entries, QuantizerDesign design)
    : entries_(std::move(entries)), design_(design) {
    if (entries_.empty()) throw std::invalid_argument("quantizer bank needs at least the rate-0 entry");
    for (std::size_t m = 0; m < entries_.size(); ++m) {
        if (entries_[m].thresholds.rate != static_cast<int>(m))
            throw std::invalid_argument("quantizer bank entry " + std::to_string(m) + " has the wrong rate");
        entries_[m].thresholds.validate();
    }
}

const ThresholdVector& QuantizerBank::thresholds(int m) const { return entry(m).thresholds; }

const BankEntry& QuantizerBank::entry(int m) const {
    if (m < 0 || m > max_rate())
        throw std::out_of_range("rate " + std::to_string(m) + " not in quantizer bank (max " +
                                std::to_string(max_rate()) + ")");
    return entries_[static_cast<std::size_t>(m)];
}

double gaussian_upper_tail(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

int quantize(double z, const ThresholdVector& thr) {
    if (thr.rate < 1) throw std::invalid_argument("cannot quantize at rate 0");
    // count of interior thresholds <= z
    return static_cast<int>(std::upper_bound(thr.interior.begin(), thr.interior.end(), z) - thr.interior.begin());
}

double level_probability(int l, double a, double sigma, const ThresholdVector& thr) {
    if (l < 0 || l >= thr.levels()) throw std::out_of_range("quantization level out of range");
    if (thr.rate == 0) return 1.0;
    const double u_lo = (thr.boundary(l) - a) / sigma;
    const double u_hi = (thr.boundary(l + 1) - a) / sigma;
    return interval_mass(u_lo, small_tail(u_lo), u_hi, small_tail(u_hi));
}

double kappa(double a, double sigma, const ThresholdVector& thr) {
    if (thr.rate == 0) return 0.0;
    const int L = thr.levels();
    double sum = 0.0;
    double u_prev = -kInf;
    double t_prev = 0.0;
    double e_prev = 0.0;
    for (int l = 0; l < L; ++l) {
        const double u_next = (thr.boundary(l + 1) - a) / sigma;
        const double t_next = small_tail(u_next);
        const double e_next = gauss_kernel(u_next);
        const double p = interval_mass(u_prev, t_prev, u_next, t_next);
        if (p >= kProbabilityFloor) {
            const double de = e_prev - e_next;
            sum += de * de / p;
        }
        u_prev = u_next;
        t_prev = t_next;
        e_prev = e_next;
    }
    return sum / (8.0 * std::numbers::pi * sigma * sigma);
}

std::vector<double> amplitude_samples(const QuantizerDesign& design) {
    if (design.sample_count == 0) throw std::invalid_argument("amplitude sampling needs a positive count");
    std::mt19937_64 rng(design.seed);
    std::uniform_real_distribution<double> coord(-design.area_side / 2.0, design.area_side / 2.0);
    std::vector<double> amps(design.sample_count);
    for (auto& a : amps) {
        const double sx = coord(rng), sy = coord(rng);
        const double tx = coord(rng), ty = coord(rng);
        const double d2 = (sx - tx) * (sx - tx) + (sy - ty) * (sy - ty);
        a = amplitude_from_sq_distance(design.signal, d2);
    }
    std::sort(amps.begin(), amps.end());
    return amps;
}

double design_objective(const ThresholdVector& thr, const std::vector<double>& amplitudes, double sigma) {
    if (amplitudes.empty()) throw std::invalid_argument("design objective needs samples");
    double sum = 0.0;
    for (double a : amplitudes) sum += 4.0 * kappa(a, sigma, thr);
    return sum / static_cast<double>(amplitudes.size());
}

ThresholdVector equiprobable_thresholds(int m, const std::vector<double>& sorted_amplitudes) {
    if (m < 0) throw std::invalid_argument("negative quantizer rate");
    ThresholdVector thr{m, {}};
    const std::size_t L = static_cast<std::size_t>(thr.levels());
    const std::size_t S = sorted_amplitudes.size();
    if (m > 0 && S < L) throw std::invalid_argument("too few samples for equiprobable thresholds");
    for (std::size_t j = 1; j < L; ++j) {
        double t = sorted_amplitudes[j * S / L];
        if (!thr.interior.empty() && !(t > thr.interior.back()))
            t = std::nextafter(thr.interior.back(), kInf);
        thr.interior.push_back(t);
    }
    return thr;
}

BankEntry optimize_thresholds(int m, const std::vector<double>& amps, double sigma, std::uint64_t seed) {
    if (m < 1) throw std::invalid_argument("threshold optimization needs rate >= 1");
    if (amps.size() < 1000) throw std::invalid_argument("threshold optimization needs at least 1000 samples");
    if (!std::is_sorted(amps.begin(), amps.end()))
        throw std::invalid_argument("threshold optimization needs sorted amplitudes");

    constexpr int kMaxSweeps = 200;
    constexpr int kScanPoints = 24;
    constexpr double kGolden = 0.6180339887498949;
    const double window = 10.0 * sigma;  // terms farther than this are below 1e-20
    const double outer_lo = amps.front() - 8.0 * sigma;
    const double outer_hi = amps.back() + 8.0 * sigma;

    // Search on weighted nodes: samples pooled into bins of width 0.005 sigma,
    // each node at its bin's sample mean. The reported objective uses every sample.
    std::vector<double> node, weight;
    {
        const double width = 0.005 * sigma;
        std::size_t k = 0;
        while (k < amps.size()) {
            const double edge = amps[k] + width;
            double sum = 0.0;
            std::size_t c = 0;
            for (; k < amps.size() && amps[k] < edge; ++k, ++c) sum += amps[k];
            node.push_back(sum / static_cast<double>(c));
            weight.push_back(static_cast<double>(c));
        }
    }
    std::vector<double> ul(node.size()), tl(node.size()), el(node.size());
    std::vector<double> ur(node.size()), tr(node.size()), er(node.size());

    ThresholdVector thr = equiprobable_thresholds(m, amps);
    const std::size_t count = thr.interior.size();
    auto node_objective = [&] {
        double s = 0.0;
        for (std::size_t k = 0; k < node.size(); ++k) s += weight[k] * kappa(node[k], sigma, thr);
        return s;
    };
    double objective = node_objective();

    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        const double sweep_start = objective;
        for (std::size_t j = 0; j < count; ++j) {
            // interior[j] is boundary j+1; it touches levels j and j+1
            const double left = thr.boundary(static_cast<int>(j));
            const double right = thr.boundary(static_cast<int>(j) + 2);
            const double lo = j == 0 ? outer_lo : left;
            const double hi = j + 1 == count ? outer_hi : right;
            const double margin = 1e-9 * (hi - lo) + 1e-12;
            const double a = lo + margin, b = hi - margin;
            if (!(b > a)) continue;

            const auto first = static_cast<std::size_t>(
                std::lower_bound(node.begin(), node.end(), std::isinf(left) ? -kInf : left - window) - node.begin());
            const auto last = static_cast<std::size_t>(
                std::upper_bound(node.begin(), node.end(), std::isinf(right) ? kInf : right + window) - node.begin());
            // tail and kernel at the two fixed neighbours, per node
            for (std::size_t k = first; k < last; ++k) {
                ul[k] = (left - node[k]) / sigma;
                tl[k] = small_tail(ul[k]);
                el[k] = gauss_kernel(ul[k]);
                ur[k] = (right - node[k]) / sigma;
                tr[k] = small_tail(ur[k]);
                er[k] = gauss_kernel(ur[k]);
            }
            auto local = [&](double t) {
                double s = 0.0;
                for (std::size_t k = first; k < last; ++k) {
                    const double ut = (t - node[k]) / sigma;
                    const double tt = small_tail(ut), et = gauss_kernel(ut);
                    double v = 0.0;
                    const double p1 = interval_mass(ul[k], tl[k], ut, tt);
                    if (p1 >= kProbabilityFloor) v += (el[k] - et) * (el[k] - et) / p1;
                    const double p2 = interval_mass(ut, tt, ur[k], tr[k]);
                    if (p2 >= kProbabilityFloor) v += (et - er[k]) * (et - er[k]) / p2;
                    s += weight[k] * v;
                }
                return s;
            };

            const double current_t = thr.interior[j];
            const double current = local(current_t);

            // coarse scan guards against a non-unimodal coordinate slice
            double best_t = current_t, best = current;
            const double step = (b - a) / (kScanPoints - 1);
            for (int k = 0; k < kScanPoints; ++k) {
                const double t = a + k * step;
                const double f = local(t);
                if (f > best) {
                    best = f;
                    best_t = t;
                }
            }
            double gl = std::max(a, best_t - step), gr = std::min(b, best_t + step);
            double x1 = gr - kGolden * (gr - gl), x2 = gl + kGolden * (gr - gl);
            double f1 = local(x1), f2 = local(x2);
            while (gr - gl > 1e-7 * sigma) {
                if (f1 < f2) {
                    gl = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = gl + kGolden * (gr - gl);
                    f2 = local(x2);
                } else {
                    gr = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = gr - kGolden * (gr - gl);
                    f1 = local(x1);
                }
            }
            const double refined_t = 0.5 * (gl + gr);
            const double refined = local(refined_t);
            if (refined > best) {
                best = refined;
                best_t = refined_t;
            }
            if (best > current && best_t > a && best_t < b) thr.interior[j] = best_t;
        }
        objective = node_objective();
        if (objective - sweep_start <= 1e-9 * std::abs(objective)) break;
    }
    thr.validate();

    // never hand back something worse than the start on the full sample set
    const ThresholdVector start = equiprobable_thresholds(m, amps);
    const double exact = design_objective(thr, amps, sigma);
    const double exact_start = design_objective(start, amps, sigma);
    if (exact < exact_start) return {start, exact_start, seed};
    return {thr, exact, seed};
}

BankEntry optimize_thresholds(int m, const QuantizerDesign& design) {
    return optimize_thresholds(m, amplitude_samples(design), design.signal.sigma, design.seed);
}

QuantizerBank build_bank(int max_rate, const QuantizerDesign& design) {
    if (max_rate < 0) throw std::invalid_argument("negative maximum rate");
    const auto amps = amplitude_samples(design);
    std::vector<BankEntry> entries;
    entries.push_back({ThresholdVector{0, {}}, 0.0, design.seed});
    for (int m = 1; m <= max_rate; ++m) entries.push_back(optimize_thresholds(m, amps, design.signal.sigma, design.seed));
    return QuantizerBank(std::move(entries), design);
}

std::string format_bank(const QuantizerBank& bank) {
    const auto& d = bank.design();
    std::ostringstream os;
    os << "# quantizer bank\n";
    os << "p0=" << format_double(d.signal.p0) << "\n";
    os << "alpha=" << format_double(d.signal.alpha) << "\n";
    os << "n_exp=" << format_double(d.signal.n_exp) << "\n";
    os << "sigma=" << format_double(d.signal.sigma) << "\n";
    os << "area_side=" << format_double(d.area_side) << "\n";
    os << "sample_count=" << d.sample_count << "\n";
    os << "seed=" << d.seed << "\n";
    for (int m = 1; m <= bank.max_rate(); ++m) {
        const auto& e = bank.entry(m);
        os << "rate=" << m << " seed=" << e.seed << " objective=" << format_double(e.objective_estimate)
           << " thresholds=";
        for (std::size_t j = 0; j < e.thresholds.interior.size(); ++j)
            os << (j ? "," : "") << format_double(e.thresholds.interior[j]);
        os << "\n";
    }
    return os.str();
}

QuantizerBank parse_bank(const std::string& text) {
    QuantizerDesign design;
    std::vector<BankEntry> entries;
    entries.push_back({ThresholdVector{0, {}}, 0.0, 0});
    std::istringstream is(text);
    std::string line;
    int line_no = 0;
    auto fail = [&](const std::string& msg) { throw ConfigError("bank file line " + std::to_string(line_no) + ": " + msg); };
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        if (line.rfind("rate=", 0) == 0) {
            BankEntry e;
            bool have_thr = false;
            std::istringstream tokens(line);
            std::string tok;
            while (tokens >> tok) {
                const auto eq = tok.find('=');
                if (eq == std::string::npos) fail("expected key=value, got '" + tok + "'");
                const std::string key = tok.substr(0, eq);
                const std::string val = tok.substr(eq + 1);
                if (key == "rate") {
                    e.thresholds.rate = static_cast<int>(parse_u64(val));
                } else if (key == "seed") {
                    e.seed = parse_u64(val);
                } else if (key == "objective") {
                    e.objective_estimate = parse_double(val);
                } else if (key == "thresholds") {
                    have_thr = true;
                    std::string_view rest(val);
                    while (!rest.empty()) {
                        const auto comma = rest.find(',');
                        e.thresholds.interior.push_back(parse_double(rest.substr(0, comma)));
                        rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
                    }
                } else {
                    fail("unknown key '" + key + "'");
                }
            }
            if (!have_thr) fail("missing thresholds");
            if (e.thresholds.rate != static_cast<int>(entries.size()))
                fail("rates must appear in order starting at 1");
            entries.push_back(std::move(e));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail("expected key=value");
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        if (key == "p0") design.signal.p0 = parse_double(val);
        else if (key == "alpha") design.signal.alpha = parse_double(val);
        else if (key == "n_exp") design.signal.n_exp = parse_double(val);
        else if (key == "sigma") design.signal.sigma = parse_double(val);
        else if (key == "area_side") design.area_side = parse_double(val);
        else if (key == "sample_count") design.sample_count = parse_u64(val);
        else if (key == "seed") design.seed = parse_u64(val);
        else fail("unknown key '" + key + "'");
    }
    entries[0].seed = design.seed;
    try {
        return QuantizerBank(std::move(entries), design);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("bank file: ") + e.what());
    }
}

void save_bank(const QuantizerBank& bank, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << format_bank(bank);
}

QuantizerBank load_bank(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read bank file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_bank(ss.str());
}

}  // namespace bitalloc
