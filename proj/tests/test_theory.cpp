#include <doctest.h>

#include <cmath>
#include <numeric>

#include "fedsc/errors.hpp"
#include "fedsc/experiment.hpp"
#include "fedsc/rng.hpp"
#include "fedsc/theory.hpp"

using namespace fedsc;
using namespace fedsc::theory;

namespace {

double norm2(const std::vector<double>& v) {
    double acc = 0.0;
    for (const double x : v) acc += x * x;
    return std::sqrt(acc);
}

FlatDataset tiny_flat(std::size_t n, std::size_t dim, std::size_t classes, std::uint64_t seed) {
    FlatDataset ds;
    ds.classes = classes;
    RngStream rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> x(dim);
        for (auto& v : x) v = rng.normal();
        ds.x.push_back(std::move(x));
        ds.y.push_back(static_cast<int>(rng.below(classes)));
    }
    return ds;
}

}  // namespace

TEST_CASE("zeta_gap") {
    SUBCASE("worked scalar fixture") {
        // Devices (D, w) = {(10,3), (10,9), (20,6)}; filtering the second
        // moves the weighted mean from 6 to 5.
        const double w_hat = (10.0 * 3 + 10.0 * 9 + 20.0 * 6) / 40.0;
        const double w_f = (10.0 * 3 + 20.0 * 6) / 30.0;
        CHECK(w_hat == doctest::Approx(6.0));
        CHECK(w_f == doctest::Approx(5.0));
        const auto z = zeta_gap({w_hat}, {w_f});
        CHECK(z[0] == doctest::Approx(1.0));
    }
    SUBCASE("antisymmetry") {
        const auto a = zeta_gap({1.0, -2.0}, {0.5, 3.0});
        const auto b = zeta_gap({0.5, 3.0}, {1.0, -2.0});
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(-b[i]));
    }
    SUBCASE("length mismatch is rejected") {
        CHECK_THROWS_AS(zeta_gap({1.0}, {1.0, 2.0}), DimensionError);
    }
}

TEST_CASE("gradient_loss_differential") {
    SUBCASE("empty flagged set collapses to zero") {
        const std::vector<std::vector<double>> grads{{1.0, 2.0}, {3.0, -1.0}};
        const auto e = gradient_loss_differential(grads, {0, 1}, {});
        for (const double v : e) CHECK(v == doctest::Approx(0.0));
    }
    SUBCASE("worked two-device fixture") {
        const std::vector<std::vector<double>> grads{{4.0}, {2.0}};
        const auto e = gradient_loss_differential(grads, {0}, {1});
        CHECK(e[0] == doctest::Approx(1.0));
    }
    SUBCASE("matches the rearranged identity on random fixtures") {
        RngStream rng(1);
        for (int trial = 0; trial < 50; ++trial) {
            const std::size_t k = 3 + rng.below(5);
            const std::size_t dim = 1 + rng.below(4);
            std::vector<std::vector<double>> grads(k, std::vector<double>(dim));
            for (auto& g : grads) {
                for (auto& v : g) v = rng.normal();
            }
            const std::size_t flagged_n = 1 + rng.below(k - 1);
            std::vector<std::size_t> idx(k);
            std::iota(idx.begin(), idx.end(), std::size_t{0});
            rng.shuffle(idx);
            const std::vector<std::size_t> flagged(idx.begin(),
                                                   idx.begin() + static_cast<long>(flagged_n));
            const std::vector<std::size_t> kept(idx.begin() + static_cast<long>(flagged_n),
                                                idx.end());

            const auto e = gradient_loss_differential(grads, kept, flagged);
            // (1/Q) sum_kept g - (1/K) sum_all g
            for (std::size_t d = 0; d < dim; ++d) {
                double kept_mean = 0.0, all_mean = 0.0;
                for (const auto q : kept) kept_mean += grads[q][d] / static_cast<double>(kept.size());
                for (const auto& g : grads) all_mean += g[d] / static_cast<double>(k);
                CHECK(std::abs(e[d] - (kept_mean - all_mean)) < 1e-10);
            }
        }
    }
    SUBCASE("an empty kept set is rejected") {
        CHECK_THROWS_AS(gradient_loss_differential({{1.0}}, {}, {0}), ConfigError);
    }
}

TEST_CASE("estimate_smoothness") {
    SUBCASE("pure quadratic estimates rho in [1, 1.5] with exact mu") {
        const LossFn q = quadratic_loss(6);
        RngStream rng(2);
        const auto est = estimate_smoothness(q, 20, rng);
        CHECK(est.rho >= 1.0);
        CHECK(est.rho <= 1.5 + 1e-12);
        CHECK(est.mu == doctest::Approx(1.0));
    }
    SUBCASE("the estimate is non-decreasing in the number of pairs") {
        const FlatDataset ds = tiny_flat(40, 5, 3, 3);
        const LossFn loss = softmax_regression_loss(ds, 0.01);
        RngStream a(4), b(4);
        const double few = estimate_smoothness(loss, 5, a).rho;
        const double many = estimate_smoothness(loss, 25, b).rho;
        CHECK(many >= few - 1e-12);
    }
    SUBCASE("non-convex losses are rejected") {
        LossFn bad;
        bad.dim = 2;
        bad.convex = false;
        RngStream rng(5);
        CHECK_THROWS_AS(estimate_smoothness(bad, 3, rng), SurrogateRequiredError);
    }
}

TEST_CASE("surrogate loss gradients are exact") {
    const FlatDataset ds = tiny_flat(20, 4, 3, 6);
    const double lambda = 0.05;
    const LossFn loss = softmax_regression_loss(ds, lambda);
    RngStream rng(7);
    std::vector<double> w(loss.dim);
    for (auto& v : w) v = rng.normal(0.0, 0.5);
    const auto g = loss.grad(w);
    const double h = 1e-5;
    for (std::size_t i = 0; i < w.size(); i += 3) {
        const double keep = w[i];
        w[i] = keep + h;
        const double up = loss.value(w);
        w[i] = keep - h;
        const double down = loss.value(w);
        w[i] = keep;
        const double fd = (up - down) / (2.0 * h);
        CHECK(std::abs(fd - g[i]) < 1e-6 * std::max(1.0, std::abs(fd)));
    }
}

TEST_CASE("check_lemma_gap") {
    SUBCASE("zero gap holds with both sides zero") {
        const std::vector<double> zeta(4, 0.0);
        const std::vector<double> grad{1.0, -2.0, 0.5, 0.0};
        const auto rec = check_lemma_gap(1.7, 1.7, zeta, grad, 2.0);
        CHECK(rec.lhs == doctest::Approx(0.0));
        CHECK(rec.rhs == doctest::Approx(0.0));
        CHECK(rec.holds);
    }
    SUBCASE("the quadratic equality case is exact") {
        const LossFn q = quadratic_loss(5);
        RngStream rng(8);
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<double> w(5), zeta(5);
            for (auto& v : w) v = rng.normal();
            for (auto& v : zeta) v = rng.normal();
            std::vector<double> w_hat(5);
            for (std::size_t i = 0; i < 5; ++i) w_hat[i] = w[i] + zeta[i];
            const auto rec = check_lemma_gap(q.value(w_hat), q.value(w), zeta, q.grad(w), 1.0);
            CHECK(std::abs(rec.lhs - rec.rhs) < 1e-9);
            CHECK(rec.holds);
        }
    }
}

TEST_CASE("trajectory checks on a small surrogate") {
    // Shared fixture: 6 devices, 30-sample shards, filtering two devices
    // from round 5 of 15.
    harness::TheoryStudyConfig cfg;
    cfg.devices = 6;
    cfg.shard_size = 30;
    cfg.rounds = 15;
    cfg.filter_from = 5;
    cfg.filtered_devices = 2;
    cfg.lambda = 0.01;
    cfg.smoothness_pairs = 10;
    cfg.seed = 11;
    cfg.dataset.per_class = 10;
    cfg.dataset.length = 16;
    cfg.dataset.snrs_db = {10.0};
    cfg.dataset.schemes = {sigsyn::Scheme::Bpsk, sigsyn::Scheme::Qpsk, sigsyn::Scheme::Pam4,
                           sigsyn::Scheme::Qam16};

    const auto rep = harness::run_theory_study(cfg);

    SUBCASE("lemma holds every round and is exactly zero before filtering") {
        CHECK(rep.lemma_all_hold);
        for (const auto& rec : rep.lemma) {
            if (rec.round < cfg.filter_from) {
                CHECK(rec.lhs == 0.0);
                CHECK(rec.rhs == 0.0);
            }
        }
    }
    SUBCASE("optimality gap holds on a convex trajectory") {
        CHECK(rep.gap_checked);
        CHECK(rep.gap_hold_rate == doctest::Approx(1.0));
    }
    SUBCASE("every quantity vanishes with an empty flagged set") {
        harness::TheoryStudyConfig clean = cfg;
        clean.filtered_devices = 0;
        const auto r = harness::run_theory_study(clean);
        for (const auto& rec : r.lemma) {
            CHECK(rec.lhs == 0.0);
            CHECK(rec.rhs == 0.0);
        }
        for (const auto& rec : r.gap) {
            CHECK(rec.zeta_norm == 0.0);
            CHECK(rec.e_norm == 0.0);
            CHECK(rec.holds);
        }
    }
    SUBCASE("lambda zero disables the optimality check with a warning flag") {
        harness::TheoryStudyConfig nomu = cfg;
        nomu.lambda = 0.0;
        const auto r = harness::run_theory_study(nomu);
        CHECK_FALSE(r.gap_checked);
        CHECK(r.mu == 0.0);
    }
    SUBCASE("fitted gamma constants are finite and positive") {
        for (const double g : rep.error_bound.gamma_q) {
            CHECK(std::isfinite(g));
            CHECK(g > 0.0);
        }
    }
}

TEST_CASE("minimize reaches a near-stationary point") {
    const FlatDataset ds = tiny_flat(30, 4, 3, 12);
    const LossFn loss = softmax_regression_loss(ds, 0.05);
    RngStream rng(13);
    const auto est = estimate_smoothness(loss, 10, rng);
    const auto w = minimize(loss, est.rho, 5000, 1e-8);
    CHECK(norm2(loss.grad(w)) < 1e-6);
}
