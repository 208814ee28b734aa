#include <doctest.h>

#include <cmath>
#include <set>

#include "fedsc/attacks.hpp"
#include "fedsc/errors.hpp"
#include "fedsc/neural.hpp"
#include "fedsc/rng.hpp"

using namespace fedsc;
using namespace fedsc::attacks;

namespace {

// Linear 2-class model over a 2-d input whose input gradient at x = 0 with
// label 0 is exactly (3, 4): g = W^T (softmax - onehot) = -0.5 w0 + 0.5 w1.
neural::ModelParams toy_gradient_model() {
    neural::ArchSpec arch;
    arch.input_dim = 2;
    arch.hidden = {};
    arch.output_dim = 2;
    neural::ModelParams m = neural::zero_model(arch);
    m.layers[0].w = {-3.0, -4.0, 3.0, 4.0};
    return m;
}

sigsyn::SignalSample zero_sample() {
    sigsyn::SignalSample s;
    s.iq = {0.0, 0.0};
    s.label = 0;
    s.snr_db = 10.0;
    return s;
}

neural::ModelParams random_model(RngStream& rng, std::size_t input_dim = 16,
                                 std::size_t classes = 4) {
    neural::ArchSpec arch;
    arch.input_dim = input_dim;
    arch.hidden = {8};
    arch.output_dim = classes;
    return neural::init_model(arch, rng);
}

sigsyn::SignalSample random_sample(RngStream& rng, std::size_t input_dim = 16,
                                   std::size_t classes = 4) {
    sigsyn::SignalSample s;
    s.iq.resize(input_dim);
    double e = 0.0;
    for (auto& v : s.iq) {
        v = rng.normal();
        e += v * v;
    }
    for (auto& v : s.iq) v /= std::sqrt(e);
    s.label = static_cast<int>(rng.below(classes));
    s.snr_db = 8.0;
    return s;
}

}  // namespace

TEST_CASE("fgsm") {
    SUBCASE("gradient (3,4) with P=4 gives delta (1.2, 1.6)") {
        const auto m = toy_gradient_model();
        const auto s = zero_sample();
        const Perturbation p = fgsm(m, s, 0, 4.0);
        CHECK(p.delta[0] == doctest::Approx(1.2).epsilon(1e-12));
        CHECK(p.delta[1] == doctest::Approx(1.6).epsilon(1e-12));
    }
    SUBCASE("perturbation norm is exactly sqrt(P)") {
        RngStream rng(1);
        for (int trial = 0; trial < 25; ++trial) {
            const auto m = random_model(rng);
            const auto s = random_sample(rng);
            const double power = rng.uniform(0.01, 2.0);
            const Perturbation p = fgsm(m, s, s.label, power);
            CHECK(p.norm2() == doctest::Approx(std::sqrt(power)).epsilon(1e-9));
        }
    }
    SUBCASE("zero gradient raises DegenerateGradientError") {
        neural::ArchSpec arch;
        arch.input_dim = 2;
        arch.hidden = {};
        arch.output_dim = 2;
        const auto m = neural::zero_model(arch);
        const auto s = zero_sample();
        CHECK_THROWS_AS(fgsm(m, s, 0, 1.0), DegenerateGradientError);
    }
}

TEST_CASE("pgd") {
    SUBCASE("one iteration reduces to fgsm") {
        RngStream rng(2);
        for (int trial = 0; trial < 10; ++trial) {
            const auto m = random_model(rng);
            const auto s = random_sample(rng);
            const Perturbation a = fgsm(m, s, s.label, 0.5);
            const Perturbation b = pgd(m, s, s.label, 0.5, 1);
            REQUIRE(a.delta.size() == b.delta.size());
            for (std::size_t i = 0; i < a.delta.size(); ++i)
                CHECK(a.delta[i] == doctest::Approx(b.delta[i]).epsilon(1e-12));
        }
    }
    SUBCASE("norm never exceeds sqrt(P) over 1000 trials") {
        RngStream rng(3);
        for (int trial = 0; trial < 1000; ++trial) {
            const auto m = random_model(rng, 8, 3);
            const auto s = random_sample(rng, 8, 3);
            const double power = rng.uniform(0.01, 1.0);
            const int iters = 1 + static_cast<int>(rng.below(6));
            const Perturbation p = pgd(m, s, s.label, power, iters);
            CHECK(p.norm2() <= std::sqrt(power) + 1e-9);
        }
    }
    SUBCASE("each step follows the closed-form gradient of a linear model") {
        // For a linear softmax model the input gradient at any point x is
        // W^T (softmax(Wx + b) - onehot(y)); replay the iteration by hand.
        neural::ArchSpec arch;
        arch.input_dim = 3;
        arch.hidden = {};
        arch.output_dim = 3;
        neural::ModelParams m = neural::zero_model(arch);
        RngStream rng(4);
        for (auto& w : m.layers[0].w) w = rng.normal();
        for (auto& b : m.layers[0].b) b = rng.normal(0.0, 0.1);

        sigsyn::SignalSample s;
        s.iq = {0.4, -0.2, 0.1};
        s.label = 2;
        const double power = 0.36;
        const int iters = 4;
        const double alpha = std::sqrt(power) / iters;

        std::vector<double> delta(3, 0.0);
        for (int q = 0; q < iters; ++q) {
            std::vector<double> x(3);
            for (std::size_t i = 0; i < 3; ++i) x[i] = s.iq[i] + delta[i];
            auto p = neural::softmax(neural::forward_logits(m, x));
            p[2] -= 1.0;
            std::vector<double> g(3, 0.0);
            for (std::size_t j = 0; j < 3; ++j) {
                for (std::size_t i = 0; i < 3; ++i) g[i] += m.layers[0].w[j * 3 + i] * p[j];
            }
            double n = 0.0;
            for (const double v : g) n += v * v;
            n = std::sqrt(n);
            for (std::size_t i = 0; i < 3; ++i) delta[i] += alpha * g[i] / n;
        }
        const Perturbation p = pgd(m, s, s.label, power, iters);
        for (std::size_t i = 0; i < 3; ++i)
            CHECK(p.delta[i] == doctest::Approx(delta[i]).epsilon(1e-12));
    }
}

TEST_CASE("awgn perturbation") {
    SUBCASE("mean squared norm over 10000 draws matches P within 3 percent") {
        RngStream rng(5);
        sigsyn::SignalSample s;
        s.iq.assign(64, 0.0);
        const double power = 0.8;
        double acc = 0.0;
        for (int i = 0; i < 10000; ++i) {
            const Perturbation p = awgn_perturb(s, power, rng);
            acc += p.norm2() * p.norm2();
        }
        CHECK(acc / 10000.0 == doctest::Approx(power).epsilon(0.03));
    }
    SUBCASE("seed determinism") {
        sigsyn::SignalSample s;
        s.iq.assign(16, 0.0);
        RngStream a(6), b(6);
        CHECK(awgn_perturb(s, 0.3, a).delta == awgn_perturb(s, 0.3, b).delta);
    }
    SUBCASE("zero power gives the zero matrix") {
        RngStream rng(7);
        sigsyn::SignalSample s;
        s.iq.assign(16, 0.0);
        for (const double v : awgn_perturb(s, 0.0, rng).delta) CHECK(v == 0.0);
    }
}

TEST_CASE("label flip") {
    sigsyn::LabeledDataset ds;
    ds.class_count = 5;
    RngStream data_rng(8);
    for (int i = 0; i < 40; ++i) {
        sigsyn::SignalSample s;
        s.iq = {data_rng.normal(), data_rng.normal()};
        s.label = static_cast<int>(data_rng.below(5));
        ds.samples.push_back(std::move(s));
    }

    SUBCASE("every label changes and features are untouched") {
        RngStream rng(9);
        const auto flipped = label_flip(ds, rng);
        REQUIRE(flipped.size() == ds.size());
        for (std::size_t i = 0; i < ds.size(); ++i) {
            CHECK(flipped.samples[i].label != ds.samples[i].label);
            CHECK(flipped.samples[i].iq == ds.samples[i].iq);
        }
    }
    SUBCASE("the class map is a derangement") {
        RngStream rng(10);
        const auto perm = derangement(5, rng);
        std::set<int> seen(perm.begin(), perm.end());
        CHECK(seen.size() == 5);
        for (int c = 0; c < 5; ++c) CHECK(perm[static_cast<std::size_t>(c)] != c);
    }
    SUBCASE("two classes swap exactly") {
        RngStream rng(11);
        const auto perm = derangement(2, rng);
        CHECK(perm[0] == 1);
        CHECK(perm[1] == 0);
    }
    SUBCASE("fewer than two classes is rejected") {
        RngStream rng(12);
        CHECK_THROWS_AS(derangement(1, rng), ConfigError);
    }
}

TEST_CASE("poison_local_dataset") {
    RngStream rng(13);
    const auto model = random_model(rng, 16, 4);
    sigsyn::LabeledDataset ds;
    ds.class_count = 4;
    for (int i = 0; i < 12; ++i) {
        auto s = random_sample(rng, 16, 4);
        s.snr_db = 8.0;
        ds.samples.push_back(std::move(s));
    }

    SUBCASE("kind none returns the dataset unchanged") {
        AttackSpec spec;
        spec.kind = Kind::None;
        spec.start_round = 0;
        RngStream r(14);
        const auto res = poison_local_dataset(ds, model, spec, 10, r, RngStream(100));
        for (std::size_t i = 0; i < ds.size(); ++i) CHECK(res.dataset.samples[i].iq == ds.samples[i].iq);
    }
    SUBCASE("rounds before the start round train clean") {
        AttackSpec spec;
        spec.kind = Kind::Pgd;
        spec.start_round = 25;
        RngStream r(15);
        const auto res = poison_local_dataset(ds, model, spec, 24, r, RngStream(100));
        for (std::size_t i = 0; i < ds.size(); ++i) CHECK(res.dataset.samples[i].iq == ds.samples[i].iq);
        CHECK(res.applied_kind == Kind::None);
    }
    SUBCASE("fgsm at 8 dB PNR over 8 dB SNR uses the full signal power") {
        AttackSpec spec;
        spec.kind = Kind::Fgsm;
        spec.pnr_db = 8.0;
        spec.start_round = 0;
        RngStream r(16);
        const auto res = poison_local_dataset(ds, model, spec, 5, r, RngStream(100));
        for (std::size_t i = 0; i < ds.size(); ++i) {
            double d2 = 0.0;
            for (std::size_t j = 0; j < ds.samples[i].iq.size(); ++j) {
                const double d = res.dataset.samples[i].iq[j] - ds.samples[i].iq[j];
                d2 += d * d;
            }
            const double expected =
                sigsyn::signal_power_share(8.0) * ds.samples[i].energy();
            CHECK(d2 == doctest::Approx(expected).epsilon(1e-9));
        }
        CHECK(res.fallback_count == 0);
    }
    SUBCASE("poisoning is idempotent for a fixed seed and params") {
        AttackSpec spec;
        spec.kind = Kind::Awgn;
        spec.pnr_db = 4.0;
        spec.start_round = 0;
        RngStream a(17), b(17);
        const auto ra = poison_local_dataset(ds, model, spec, 3, a, RngStream(100));
        const auto rb = poison_local_dataset(ds, model, spec, 3, b, RngStream(100));
        for (std::size_t i = 0; i < ds.size(); ++i)
            CHECK(ra.dataset.samples[i].iq == rb.dataset.samples[i].iq);
    }
    SUBCASE("flip keeps features and changes labels") {
        AttackSpec spec;
        spec.kind = Kind::Flip;
        spec.start_round = 0;
        RngStream r(18);
        const auto res = poison_local_dataset(ds, model, spec, 1, r, RngStream(100));
        for (std::size_t i = 0; i < ds.size(); ++i) {
            CHECK(res.dataset.samples[i].iq == ds.samples[i].iq);
            CHECK(res.dataset.samples[i].label != ds.samples[i].label);
        }
    }
    SUBCASE("the flip mapping persists across rounds") {
        AttackSpec spec;
        spec.kind = Kind::Flip;
        spec.start_round = 0;
        RngStream r1(20), r2(21);  // distinct per-round streams
        const auto a = poison_local_dataset(ds, model, spec, 1, r1, RngStream(100));
        const auto b = poison_local_dataset(ds, model, spec, 2, r2, RngStream(100));
        for (std::size_t i = 0; i < ds.size(); ++i)
            CHECK(a.dataset.samples[i].label == b.dataset.samples[i].label);
    }
    SUBCASE("random schedule draws attack and power from the menu") {
        AttackSpec spec;
        spec.kind = Kind::Pgd;
        spec.schedule = Schedule::RandomPerRound;
        spec.start_round = 0;
        RngStream r(19);
        std::set<Kind> kinds;
        std::set<double> powers;
        for (int round = 0; round < 30; ++round) {
            RngStream rr = r.fork(static_cast<std::uint64_t>(round));
            const auto res = poison_local_dataset(ds, model, spec, round, rr, RngStream(100));
            kinds.insert(res.applied_kind);
            powers.insert(res.applied_pnr_db);
        }
        for (const Kind k : kinds)
            CHECK((k == Kind::Pgd || k == Kind::Fgsm || k == Kind::Awgn));
        for (const double p : powers) CHECK((p == 8.0 || p == 4.0 || p == 0.0));
        CHECK(kinds.size() >= 2);
        CHECK(powers.size() >= 2);
    }
}
