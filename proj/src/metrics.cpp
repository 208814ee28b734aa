#include "fedsc/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/students_t.hpp>

#include "fedsc/errors.hpp"

namespace fedsc::harness {

std::vector<std::vector<std::size_t>> confusion_matrix(const neural::ModelParams& params,
                                                       const sigsyn::LabeledDataset& testset) {
    if (testset.empty()) throw EmptyDatasetError("confusion matrix over an empty test set");
    const std::size_t c = params.arch.output_dim;
    std::vector<std::vector<std::size_t>> m(c, std::vector<std::size_t>(c, 0));
    for (const auto& s : testset.samples) {
        const int pred = neural::predict(params, s.iq);
        m[static_cast<std::size_t>(s.label)][static_cast<std::size_t>(pred)] += 1;
    }
    return m;
}

FpStats false_positive_stats(const std::vector<fedsim::RoundRecord>& records, int window) {
    if (records.empty() || window < 1) throw ConfigError("detection log must be non-empty");
    std::vector<const fedsim::RoundRecord*> sampled;
    for (const auto& rec : records) {
        if ((rec.round + 1) % window == 0) sampled.push_back(&rec);
    }
    if (sampled.empty()) {
        for (const auto& rec : records) sampled.push_back(&rec);
    }

    double flagged_honest = 0.0;
    double honest_total = 0.0;
    for (const auto* rec : sampled) {
        for (std::size_t i = 0; i < rec->device_ids.size(); ++i) {
            if (rec->truth_adversary[i]) continue;
            honest_total += 1.0;
            const int id = rec->device_ids[i];
            if (std::find(rec->perceived_adversaries.begin(), rec->perceived_adversaries.end(),
                          id) != rec->perceived_adversaries.end())
                flagged_honest += 1.0;
        }
    }
    FpStats stats;
    stats.sampled_rounds = static_cast<int>(sampled.size());
    stats.nominal = flagged_honest / static_cast<double>(sampled.size());
    const double honest_per_round = honest_total / static_cast<double>(sampled.size());
    stats.rate = honest_per_round > 0.0 ? stats.nominal / honest_per_round * 100.0 : 0.0;
    return stats;
}

TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw DimensionError("paired series must have equal length");
    if (a.size() < 2) throw ConfigError("paired t-test needs at least two pairs");
    const std::size_t n = a.size();
    std::vector<double> diff(n);
    bool all_zero = true;
    for (std::size_t i = 0; i < n; ++i) {
        diff[i] = a[i] - b[i];
        if (diff[i] != 0.0) all_zero = false;
    }
    if (all_zero) throw DegenerateTestError("all paired differences are zero");

    double mean = 0.0;
    for (const double d : diff) mean += d;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (const double d : diff) var += (d - mean) * (d - mean);
    var /= static_cast<double>(n - 1);

    TTestResult res;
    res.dof = static_cast<int>(n - 1);
    if (var == 0.0) {
        res.t = mean > 0.0 ? std::numeric_limits<double>::infinity()
                           : -std::numeric_limits<double>::infinity();
        res.p = 0.0;
        return res;
    }
    res.t = mean / std::sqrt(var / static_cast<double>(n));
    const boost::math::students_t dist(static_cast<double>(res.dof));
    res.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(res.t)));
    return res;
}

}  // namespace fedsc::harness
