#include "bitalloc/fisher.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace bitalloc;

namespace {

// Cheap bank: equiprobable thresholds on a modest amplitude sample.
QuantizerBank quick_bank(int max_rate) {
    QuantizerDesign d;
    d.sample_count = 4000;
    d.seed = 17;
    const auto amps = amplitude_samples(d);
    std::vector<BankEntry> entries;
    for (int m = 0; m <= max_rate; ++m) entries.push_back({equiprobable_thresholds(m, amps), 0.0, d.seed});
    return QuantizerBank(entries, d);
}

ParticleSet make_particles(const Eigen::Matrix<double, 4, Eigen::Dynamic>& states) {
    ParticleSet p;
    p.states = states;
    p.weights = Eigen::VectorXd::Constant(states.cols(), 1.0 / static_cast<double>(states.cols()));
    return p;
}

ParticleSet random_particles(int count, std::uint64_t seed, double spread = 2.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    Eigen::Matrix<double, 4, Eigen::Dynamic> s(4, count);
    for (int c = 0; c < count; ++c)
        s.col(c) << -3 + spread * nd(rng), 2 + spread * nd(rng), nd(rng), nd(rng);
    return make_particles(s);
}

double rel(double got, double want, double floor) { return std::abs(got - want) / std::max(std::abs(want), floor); }

}  // namespace

TEST(SensorFim, ZeroAtColocatedTargetAndRateZero) {
    const auto bank = quick_bank(3);
    const auto grid = build_grid(3, 20.0);
    EXPECT_TRUE(sensor_fim_conditional(grid, 0, {-10, -10, 1, 1}, 3, bank).isZero(0.0));
    EXPECT_TRUE(sensor_fim_conditional(grid, 0, {-8, -8, 1, 1}, 0, bank).isZero(0.0));
}

TEST(SensorFim, DefaultGeometryMatchesFiniteDifference) {
    const auto bank = quick_bank(3);
    const auto grid = build_grid(3, 20.0);
    const auto& t = bank.thresholds(3).interior;
    const Fim j = sensor_fim_conditional(grid, 0, {-8, -8, 2, 2}, 3, bank);
    const auto fd = oracle::fd_block({}, -10, -10, -8, -8, t);
    EXPECT_LT(rel(j(0, 0), fd(0, 0), 0.0), 1e-5);
    EXPECT_LT(rel(j(0, 1), fd(0, 1), 0.0), 1e-5);
    EXPECT_LT(rel(j(1, 1), fd(1, 1), 0.0), 1e-5);
}

TEST(SensorFim, RandomGeometriesMatchClosedFormAndFiniteDifference) {
    const auto bank = quick_bank(3);
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> pos(-10.0, 10.0), alpha(0.5, 2.0), nexp(1.5, 3.0);
    for (int trial = 0; trial < 50; ++trial) {
        SignalParams sig{1000.0, alpha(rng), nexp(rng), 1.0};
        SensorGrid grid{{Vec2(pos(rng), pos(rng))}, sig};
        const TargetState x{pos(rng), pos(rng), 0.3, -0.2};
        const oracle::Signal os{sig.p0, sig.alpha, sig.n_exp, sig.sigma};
        for (int m = 1; m <= 3; ++m) {
            const auto& t = bank.thresholds(m).interior;
            const Fim j = sensor_fim_conditional(grid, 0, x, m, bank);
            const auto app = oracle::closed_form_block(os, grid.positions[0].x(), grid.positions[0].y(), x.x, x.y, t);
            const auto fd = oracle::fd_block(os, grid.positions[0].x(), grid.positions[0].y(), x.x, x.y, t);
            const double scale = std::max(1e-8 * fd.norm(), 1e-12);
            for (int r = 0; r < 2; ++r)
                for (int c = 0; c < 2; ++c) {
                    EXPECT_LT(rel(j(r, c), app(r, c), scale), 1e-10) << "trial " << trial << " m=" << m;
                    EXPECT_LT(rel(j(r, c), fd(r, c), scale), 1e-5) << "trial " << trial << " m=" << m << " j=" << j(r, c) << " fd=" << fd(r, c) << " app=" << app(r, c);
                }
        }
    }
}

TEST(SensorFim, BlockStructureAndRankOne) {
    const auto bank = quick_bank(4);
    const auto grid = build_grid(3, 20.0);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> pos(-12.0, 12.0);
    for (int trial = 0; trial < 40; ++trial) {
        const TargetState x{pos(rng), pos(rng), 1, 1};
        for (std::size_t i = 0; i < grid.size(); ++i)
            for (int m = 0; m <= 4; ++m) {
                const Fim j = sensor_fim_conditional(grid, i, x, m, bank);
                EXPECT_TRUE(j.bottomRows<2>().isZero(0.0));
                EXPECT_TRUE(j.rightCols<2>().isZero(0.0));
                EXPECT_EQ(j, j.transpose());
                EXPECT_GE(j(0, 0), 0.0);
                EXPECT_LE(std::abs(j.topLeftCorner<2, 2>().determinant()), 1e-12 * j.squaredNorm() + 1e-300);
            }
    }
}

TEST(ExpectedFim, IdenticalParticlesGiveConditional) {
    const auto bank = quick_bank(2);
    const auto grid = build_grid(3, 20.0);
    Eigen::Matrix<double, 4, Eigen::Dynamic> s(4, 7);
    for (int c = 0; c < 7; ++c) s.col(c) << 1.5, -4.0, 0.2, 0.1;
    const auto p = make_particles(s);
    const Fim e = sensor_fim_expected(grid, 4, p, 2, bank);
    const Fim c = sensor_fim_conditional(grid, 4, {1.5, -4.0, 0.2, 0.1}, 2, bank);
    EXPECT_LT((e - c).cwiseAbs().maxCoeff(), 1e-14 * c.norm());
    EXPECT_TRUE(sensor_fim_expected(grid, 4, p, 0, bank).isZero(0.0));
    EXPECT_THROW(sensor_fim_expected(grid, 4, ParticleSet{}, 1, bank), std::invalid_argument);
}

TEST(ExpectedFim, MirrorPairCancelsCrossTerm) {
    // particles at (1,1) and (1,-1) about a sensor at the origin: same d, same
    // diagonal entries, opposite dx*dy
    const auto bank = quick_bank(2);
    SensorGrid grid{{Vec2(0, 0)}, {}};
    Eigen::Matrix<double, 4, Eigen::Dynamic> s(4, 2);
    s.col(0) << 1, 1, 0, 0;
    s.col(1) << 1, -1, 0, 0;
    const Fim e = sensor_fim_expected(grid, 0, make_particles(s), 2, bank);
    const double a = std::sqrt(1000.0 / 3.0);
    // n=2, alpha=1, d^2=2: gain = 4 a^2 / 9
    const double w = 4.0 * a * a / 9.0 * oracle::kappa(a, 1.0, bank.thresholds(2).interior);
    EXPECT_NEAR(e(0, 1), 0.0, 1e-14 * w);
    EXPECT_NEAR(e(0, 0), w, 1e-12 * w);
    EXPECT_NEAR(e(1, 1), w, 1e-12 * w);
}

TEST(FimTable, MatchesPerAtomAverages) {
    const auto bank = quick_bank(3);
    const auto grid = build_grid(3, 20.0);
    const auto p = random_particles(300, 8);
    const auto table = build_fim_table(grid, p, bank, 3);
    ASSERT_EQ(table.sensors(), 9u);
    ASSERT_EQ(table.max_rate(), 3);
    for (std::size_t i = 0; i < 9; ++i) {
        EXPECT_TRUE(table.atom(i, 0).isZero(0.0));
        for (int m = 1; m <= 3; ++m) {
            const Fim e = sensor_fim_expected(grid, i, p, m, bank);
            EXPECT_LT((table.atom(i, m) - e).cwiseAbs().maxCoeff(), 1e-12 * e.norm());
        }
    }
    EXPECT_THROW(table.atom(0, 4), std::out_of_range);
    EXPECT_THROW(build_fim_table(grid, p, bank, 4), std::invalid_argument);
}

TEST(PriorFim, IdentityCovariance) {
    // +-e_k pairs: mean zero, sample covariance (1/Ns) sum x x^T = I
    Eigen::Matrix<double, 4, Eigen::Dynamic> s = Eigen::Matrix<double, 4, Eigen::Dynamic>::Zero(4, 8);
    for (int k = 0; k < 4; ++k) {
        s(k, 2 * k) = 2.0;
        s(k, 2 * k + 1) = -2.0;
    }
    const auto pf = prior_fim(make_particles(s));
    EXPECT_FALSE(pf.degenerate);
    EXPECT_LT((pf.fim - Mat4::Identity()).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(PriorFim, ScalesInverseQuadratically) {
    const auto p = random_particles(200, 3);
    auto q = p;
    q.states *= 3.0;
    const auto a = prior_fim(p).fim, b = prior_fim(q).fim;
    EXPECT_LT((b * 9.0 - a).cwiseAbs().maxCoeff(), 1e-9 * a.norm());
}

TEST(PriorFim, MatchesDirectInverse) {
    const auto p = random_particles(100, 12);
    Mat4 cov = Mat4::Zero();
    Vec4 mean = Vec4::Zero();
    for (Eigen::Index c = 0; c < p.size(); ++c) mean += p.states.col(c);
    mean /= 100.0;
    for (Eigen::Index c = 0; c < p.size(); ++c) cov += (p.states.col(c) - mean) * (p.states.col(c) - mean).transpose();
    cov /= 100.0;
    cov += 1e-9 * cov.trace() / 4.0 * Mat4::Identity();
    EXPECT_LT((prior_fim(p).fim - cov.inverse()).cwiseAbs().maxCoeff(), 1e-10 * cov.inverse().norm());
}

TEST(PriorFim, DegenerateCloudIsRegularizedAndFlagged) {
    Eigen::Matrix<double, 4, Eigen::Dynamic> s(4, 10);
    s.colwise() = Vec4(1, 2, 3, 4);
    const auto pf = prior_fim(make_particles(s));
    EXPECT_TRUE(pf.degenerate);
    EXPECT_LT((pf.fim - 1e9 * Mat4::Identity()).cwiseAbs().maxCoeff(), 1e-3);
    EXPECT_THROW(prior_fim(make_particles(s.leftCols(4))), std::invalid_argument);
}

TEST(TotalFim, Assembly) {
    FimTable t;
    t.prior = Mat4::Identity();
    Fim a = Fim::Zero(), b = Fim::Zero();
    a(0, 0) = 2.0;
    b(1, 1) = 3.0;
    t.atoms = {{Fim::Zero(), a}, {Fim::Zero(), b}};
    EXPECT_EQ(total_fim({0, 0}, t), t.prior);
    EXPECT_EQ(total_fim({1, 0}, t) - total_fim({0, 1}, t), a - b);
    t.atoms[1][1] = a;
    EXPECT_EQ(total_fim({1, 0}, t), total_fim({0, 1}, t));
    EXPECT_THROW(total_fim({2, 0}, t), std::out_of_range);
    EXPECT_THROW(total_fim({1}, t), std::invalid_argument);
}

TEST(LogDet, Basics) {
    EXPECT_EQ(logdet(Mat4::Identity()), 0.0);
    EXPECT_NEAR(logdet(2.0 * Mat4::Identity()), 4.0 * std::log(2.0), 1e-15);
    Mat4 singular = Mat4::Identity();
    singular(3, 3) = 0.0;
    EXPECT_EQ(logdet(singular), -std::numeric_limits<double>::infinity());
    Mat4 asym = Mat4::Identity();
    asym(0, 1) = 0.5;
    EXPECT_THROW(logdet(asym), std::invalid_argument);
}

TEST(LogDet, DeterminantLemma) {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 100; ++trial) {
        Mat4 bx, ba;
        for (int k = 0; k < 16; ++k) {
            bx(k) = nd(rng);
            ba(k) = nd(rng);
        }
        const Mat4 x = bx * bx.transpose() + 0.5 * Mat4::Identity();
        const Mat4 a = ba * ba.transpose();
        const double lhs = logdet(x + a);
        const double rhs = logdet(x) + std::log((Mat4::Identity() + x.inverse() * a).determinant());
        EXPECT_LT(std::abs(lhs - rhs), 1e-10 * std::max(1.0, std::abs(lhs)));
    }
}
