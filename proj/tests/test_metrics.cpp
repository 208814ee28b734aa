#include <doctest.h>

#include <cmath>

#include "fedsc/errors.hpp"
#include "fedsc/metrics.hpp"

using namespace fedsc;
using namespace fedsc::harness;

namespace {

neural::ModelParams diag_model(double w00, double w11) {
    neural::ArchSpec arch;
    arch.input_dim = 2;
    arch.hidden = {};
    arch.output_dim = 2;
    neural::ModelParams m = neural::zero_model(arch);
    m.layers[0].w = {w00, 0.0, 0.0, w11};
    return m;
}

sigsyn::LabeledDataset two_class_set(const std::vector<std::pair<int, int>>& items) {
    // items: (feature axis, label)
    sigsyn::LabeledDataset ds;
    ds.class_count = 2;
    for (const auto& [axis, label] : items) {
        sigsyn::SignalSample s;
        s.iq = {axis == 0 ? 1.0 : 0.0, axis == 1 ? 1.0 : 0.0};
        s.label = label;
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

fedsim::RoundRecord detection_round(int round, int honest, int adversaries,
                                    int flagged_honest, int flagged_adv) {
    fedsim::RoundRecord rec;
    rec.round = round;
    int id = 0;
    for (int i = 0; i < honest; ++i) {
        rec.device_ids.push_back(id);
        rec.truth_adversary.push_back(false);
        if (i < flagged_honest) rec.perceived_adversaries.push_back(id);
        ++id;
    }
    for (int i = 0; i < adversaries; ++i) {
        rec.device_ids.push_back(id);
        rec.truth_adversary.push_back(true);
        if (i < flagged_adv) rec.perceived_adversaries.push_back(id);
        ++id;
    }
    return rec;
}

}  // namespace

TEST_CASE("confusion_matrix") {
    SUBCASE("a perfect classifier is diagonal") {
        const auto m = diag_model(1.0, 1.0);
        const auto ds = two_class_set({{0, 0}, {1, 1}, {0, 0}, {1, 1}});
        const auto cm = confusion_matrix(m, ds);
        CHECK(cm[0][0] == 2);
        CHECK(cm[1][1] == 2);
        CHECK(cm[0][1] == 0);
        CHECK(cm[1][0] == 0);
    }
    SUBCASE("a constant classifier puts all mass in one column") {
        const auto m = diag_model(1.0, -1.0);  // always predicts class 0
        const auto ds = two_class_set({{0, 0}, {1, 1}, {1, 1}});
        const auto cm = confusion_matrix(m, ds);
        CHECK(cm[0][0] == 1);
        CHECK(cm[1][0] == 2);
        CHECK(cm[0][1] + cm[1][1] == 0);
    }
    SUBCASE("hand-built matrix with one error") {
        const auto m = diag_model(1.0, 1.0);
        const auto ds = two_class_set({{0, 0}, {1, 1}, {0, 0}, {0, 1}});
        const auto cm = confusion_matrix(m, ds);
        CHECK(cm[0][0] == 2);
        CHECK(cm[1][1] == 1);
        CHECK(cm[1][0] == 1);
        // Row sums equal the class counts.
        CHECK(cm[0][0] + cm[0][1] == 2);
        CHECK(cm[1][0] + cm[1][1] == 2);
    }
    SUBCASE("empty test set is rejected") {
        sigsyn::LabeledDataset empty;
        CHECK_THROWS_AS(confusion_matrix(diag_model(1, 1), empty), EmptyDatasetError);
    }
}

TEST_CASE("false_positive_stats") {
    SUBCASE("an always-empty perceived set gives (0, 0)") {
        std::vector<fedsim::RoundRecord> log;
        for (int t = 0; t < 20; ++t) log.push_back(detection_round(t, 7, 3, 0, 0));
        const auto s = false_positive_stats(log);
        CHECK(s.nominal == doctest::Approx(0.0));
        CHECK(s.rate == doctest::Approx(0.0));
        CHECK(s.sampled_rounds == 4);  // rounds 4, 9, 14, 19
    }
    SUBCASE("flagging all seven honest devices gives (7, 100)") {
        std::vector<fedsim::RoundRecord> log;
        for (int t = 0; t < 10; ++t) log.push_back(detection_round(t, 7, 3, 7, 3));
        const auto s = false_positive_stats(log);
        CHECK(s.nominal == doctest::Approx(7.0));
        CHECK(s.rate == doctest::Approx(100.0));
    }
    SUBCASE("nominal 2.41 over seven honest devices is a 34.4 percent rate") {
        // 100 sampled rounds: 41 with three honest flags, 59 with two.
        std::vector<fedsim::RoundRecord> log;
        for (int t = 0; t < 500; ++t) {
            const int sample_index = (t + 1) % 5 == 0 ? (t + 1) / 5 - 1 : -1;
            const int flagged = sample_index >= 0 && sample_index < 41 ? 3 : 2;
            log.push_back(detection_round(t, 7, 3, flagged, 0));
        }
        const auto s = false_positive_stats(log);
        CHECK(s.sampled_rounds == 100);
        CHECK(s.nominal == doctest::Approx(2.41).epsilon(1e-12));
        CHECK(s.rate == doctest::Approx(2.41 / 7.0 * 100.0).epsilon(1e-12));
        CHECK(std::round(s.rate * 10.0) / 10.0 == doctest::Approx(34.4));
    }
    SUBCASE("short logs fall back to sampling every round") {
        std::vector<fedsim::RoundRecord> log{detection_round(0, 4, 1, 2, 1)};
        const auto s = false_positive_stats(log);
        CHECK(s.sampled_rounds == 1);
        CHECK(s.nominal == doctest::Approx(2.0));
        CHECK(s.rate == doctest::Approx(50.0));
    }
}

TEST_CASE("paired_t_test") {
    SUBCASE("identical series are degenerate") {
        const std::vector<double> a{1.0, 2.0, 3.0};
        CHECK_THROWS_AS(paired_t_test(a, a), DegenerateTestError);
    }
    SUBCASE("worked example: differences {1,2,3}") {
        const std::vector<double> a{2.0, 4.0, 6.0};
        const std::vector<double> b{1.0, 2.0, 3.0};
        const auto res = paired_t_test(a, b);
        CHECK(res.t == doctest::Approx(2.0 * std::sqrt(3.0)).epsilon(1e-12));
        CHECK(res.dof == 2);
        CHECK(res.p == doctest::Approx(0.0742).epsilon(1e-2));
        CHECK(std::abs(res.p - 0.07417990022) < 1e-6);
    }
    SUBCASE("swapping the series negates t and keeps p") {
        const std::vector<double> a{2.0, 4.1, 5.9, 8.2};
        const std::vector<double> b{1.0, 2.0, 3.0, 4.0};
        const auto ab = paired_t_test(a, b);
        const auto ba = paired_t_test(b, a);
        CHECK(ab.t == doctest::Approx(-ba.t).epsilon(1e-12));
        CHECK(ab.p == doctest::Approx(ba.p).epsilon(1e-12));
    }
    SUBCASE("constant non-zero difference gives p = 0") {
        const std::vector<double> a{2.0, 3.0, 4.0};
        const std::vector<double> b{1.0, 2.0, 3.0};
        const auto res = paired_t_test(a, b);
        CHECK(res.p == doctest::Approx(0.0));
        CHECK(std::isinf(res.t));
    }
    SUBCASE("mismatched lengths are rejected") {
        CHECK_THROWS_AS(paired_t_test({1.0}, {1.0, 2.0}), DimensionError);
    }
}
