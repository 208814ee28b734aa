#include "fedsc/defense.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedsc/errors.hpp"

namespace fedsc::defense {
namespace {

void check_same_shape(const std::vector<neural::ModelParams>& params) {
    if (params.empty()) throw ConfigError("aggregation needs at least one model");
    const std::size_t n = params.front().flat_size();
    for (const auto& p : params) {
        if (p.flat_size() != n) throw DimensionError("model shapes differ");
    }
}

// Sorted per-label columns for one device, computed once per distance call.
std::vector<std::vector<double>> sorted_columns(const LogitMatrix& m) {
    std::vector<std::vector<double>> cols(m.cols);
    for (std::size_t c = 0; c < m.cols; ++c) {
        cols[c] = m.column(c);
        std::sort(cols[c].begin(), cols[c].end());
    }
    return cols;
}

double sorted_w1(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
    return acc;
}

// Per-device inner averages of Eq-style pairwise distances; shared by the
// plain and time-weighted variants.
std::vector<double> per_device_inner_average(const std::vector<LogitMatrix>& logits) {
    const std::size_t k = logits.size();
    if (k < 2) throw ConfigError("average logit distance needs at least two devices");
    const std::size_t rows = logits.front().rows;
    const std::size_t cols = logits.front().cols;
    for (const auto& m : logits) {
        if (m.rows != rows || m.cols != cols) throw DimensionError("logit matrix shapes differ");
    }

    std::vector<std::vector<std::vector<double>>> sorted(k);
    for (std::size_t i = 0; i < k; ++i) sorted[i] = sorted_columns(logits[i]);

    // Pair distances are symmetric; compute each unordered pair once.
    std::vector<std::vector<double>> pair_sum(k, std::vector<double>(k, 0.0));
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) {
            double d = 0.0;
            for (std::size_t c = 0; c < cols; ++c) d += sorted_w1(sorted[i][c], sorted[j][c]);
            pair_sum[i][j] = pair_sum[j][i] = d;
        }
    }

    const double denom = static_cast<double>(cols) * static_cast<double>(k - 1);
    std::vector<double> inner(k, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < k; ++j) acc += pair_sum[i][j];
        inner[i] = acc / denom;
    }
    return inner;
}

std::vector<double> flat_or_throw(const neural::ModelParams& p) { return p.flatten(); }

}  // namespace

std::vector<double> LogitMatrix::column(std::size_t c) const {
    std::vector<double> out(rows);
    for (std::size_t r = 0; r < rows; ++r) out[r] = at(r, c);
    return out;
}

LogitMatrix extract_logits(const neural::ModelParams& params,
                           const sigsyn::LabeledDataset& reserve) {
    if (reserve.empty()) throw EmptyDatasetError("logit extraction needs a non-empty reserve");
    LogitMatrix m;
    m.rows = reserve.size();
    m.cols = params.arch.output_dim;
    m.values.resize(m.rows * m.cols);
    for (std::size_t r = 0; r < m.rows; ++r) {
        const auto logits = neural::forward_logits(params, reserve.samples[r].iq);
        std::copy(logits.begin(), logits.end(), m.values.begin() + static_cast<std::ptrdiff_t>(r * m.cols));
    }
    return m;
}

double wasserstein1(std::vector<double> p, std::vector<double> q) {
    if (p.size() != q.size()) throw DimensionError("wasserstein1 arrays must have equal length");
    if (p.empty()) throw DimensionError("wasserstein1 arrays must be non-empty");
    std::sort(p.begin(), p.end());
    std::sort(q.begin(), q.end());
    return sorted_w1(p, q);
}

double wasserstein1_bruteforce(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size()) throw DimensionError("wasserstein1 arrays must have equal length");
    std::vector<std::size_t> perm(p.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    double best = std::numeric_limits<double>::infinity();
    do {
        double acc = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - q[perm[i]]);
        best = std::min(best, acc);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

double avg_logit_distance(const std::vector<LogitMatrix>& logits) {
    const std::vector<double> inner = per_device_inner_average(logits);
    return std::accumulate(inner.begin(), inner.end(), 0.0);
}

double weighted_avg_logit_distance(const std::vector<LogitMatrix>& logits,
                                   const std::vector<int>& time_in_network) {
    if (time_in_network.size() != logits.size())
        throw DimensionError("one time-in-network entry per device expected");
    double t_sum = 0.0;
    for (const int t : time_in_network) {
        if (t < 0) throw ConfigError("time-in-network must be non-negative");
        t_sum += static_cast<double>(t);
    }
    if (t_sum <= 0.0) throw ConfigError("at least one device must have positive time-in-network");
    const double t_mean = t_sum / static_cast<double>(time_in_network.size());

    const std::vector<double> inner = per_device_inner_average(logits);
    double acc = 0.0;
    for (std::size_t i = 0; i < inner.size(); ++i)
        acc += static_cast<double>(time_in_network[i]) / t_mean * inner[i];
    return acc;
}

std::vector<std::vector<double>> pairwise_distance_matrix(const std::vector<LogitMatrix>& logits) {
    const std::size_t k = logits.size();
    std::vector<std::vector<std::vector<double>>> sorted(k);
    for (std::size_t i = 0; i < k; ++i) sorted[i] = sorted_columns(logits[i]);
    std::vector<std::vector<double>> m(k, std::vector<double>(k, 0.0));
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) {
            double d = 0.0;
            for (std::size_t c = 0; c < logits[i].cols; ++c)
                d += sorted_w1(sorted[i][c], sorted[j][c]);
            m[i][j] = m[j][i] = d;
        }
    }
    return m;
}

double penalty(double zeta_bar, const PenaltyCoeffs& coeffs) {
    if (zeta_bar < 0.0) throw ConfigError("average logit distance cannot be negative");
    double raw;
    if (zeta_bar == 0.0) {
        raw = -std::numeric_limits<double>::infinity();
    } else {
        const double lg = coeffs.base == LogBase::Natural ? std::log(coeffs.b * zeta_bar)
                                                          : std::log10(coeffs.b * zeta_bar);
        raw = coeffs.a * lg;
    }
    if (raw >= coeffs.gamma_max) return coeffs.gamma_max;
    if (raw <= coeffs.gamma_min) return coeffs.gamma_min;
    return raw;
}

double threshold(double global_acc, double gamma) { return global_acc - gamma; }

double personalized_threshold(double global_acc, double gamma, int t_k, int t_max,
                              double gamma_new) {
    if (t_max <= 0) throw ConfigError("maximum time-in-network must be positive");
    const double ratio = static_cast<double>(t_k) / static_cast<double>(t_max);
    return global_acc - gamma - (1.0 - ratio) * gamma_new;
}

FilterAggregate dusdfl_aggregate(const std::vector<neural::ModelParams>& params,
                                 const std::vector<std::size_t>& sizes,
                                 const std::vector<double>& accuracies,
                                 const std::vector<double>& thresholds) {
    check_same_shape(params);
    if (sizes.size() != params.size() || accuracies.size() != params.size() ||
        thresholds.size() != params.size())
        throw DimensionError("per-device vectors must match the model list");

    FilterAggregate out;
    double total = 0.0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        if (accuracies[k] < thresholds[k]) {
            out.flagged.push_back(k);
        } else {
            out.kept.push_back(k);
            total += static_cast<double>(sizes[k]);
        }
    }
    if (out.kept.empty()) throw AllFilteredError("every device fell below its threshold");
    if (total <= 0.0) throw ConfigError("kept devices hold no data");

    std::vector<double> acc(params.front().flat_size(), 0.0);
    for (const std::size_t k : out.kept) {
        const double w = static_cast<double>(sizes[k]) / total;
        const std::vector<double> flat = flat_or_throw(params[k]);
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += w * flat[i];
    }
    out.params = neural::unflatten(params.front().arch, acc);
    return out;
}

FilterAggregate usdfl_aggregate(const std::vector<neural::ModelParams>& params,
                                const std::vector<std::size_t>& sizes,
                                const std::vector<double>& accuracies, double threshold) {
    return dusdfl_aggregate(params, sizes, accuracies,
                            std::vector<double>(params.size(), threshold));
}

neural::ModelParams median_aggregate(const std::vector<neural::ModelParams>& params) {
    check_same_shape(params);
    const std::size_t n = params.front().flat_size();
    std::vector<std::vector<double>> flats;
    flats.reserve(params.size());
    for (const auto& p : params) flats.push_back(p.flatten());

    std::vector<double> out(n);
    std::vector<double> column(params.size());
    const std::size_t mid = (params.size() - 1) / 2;  // lower-middle for even counts
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < flats.size(); ++k) column[k] = flats[k][i];
        std::nth_element(column.begin(), column.begin() + static_cast<std::ptrdiff_t>(mid),
                         column.end());
        out[i] = column[mid];
    }
    return neural::unflatten(params.front().arch, out);
}

neural::ModelParams trimmed_aggregate(const std::vector<neural::ModelParams>& params, int z) {
    check_same_shape(params);
    if (z < 0) throw ConfigError("trim count must be non-negative");
    const std::size_t k = params.size();
    if (k <= 2 * static_cast<std::size_t>(z))
        throw ConfigError("trimmed mean needs more than 2z models");
    const std::size_t n = params.front().flat_size();
    std::vector<std::vector<double>> flats;
    flats.reserve(k);
    for (const auto& p : params) flats.push_back(p.flatten());

    std::vector<double> out(n);
    std::vector<double> column(k);
    const std::size_t keep = k - 2 * static_cast<std::size_t>(z);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) column[j] = flats[j][i];
        std::sort(column.begin(), column.end());
        double acc = 0.0;
        for (std::size_t j = static_cast<std::size_t>(z); j < static_cast<std::size_t>(z) + keep; ++j)
            acc += column[j];
        out[i] = acc / static_cast<double>(keep);
    }
    return neural::unflatten(params.front().arch, out);
}

std::vector<double> median_selection_fraction(const std::vector<neural::ModelParams>& params) {
    check_same_shape(params);
    const std::size_t k = params.size();
    const std::size_t n = params.front().flat_size();
    std::vector<std::vector<double>> flats;
    flats.reserve(k);
    for (const auto& p : params) flats.push_back(p.flatten());

    std::vector<std::size_t> hits(k, 0);
    std::vector<std::pair<double, std::size_t>> column(k);
    const std::size_t mid = (k - 1) / 2;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) column[j] = {flats[j][i], j};
        std::nth_element(column.begin(), column.begin() + static_cast<std::ptrdiff_t>(mid),
                         column.end());
        ++hits[column[mid].second];
    }
    std::vector<double> frac(k);
    for (std::size_t j = 0; j < k; ++j)
        frac[j] = static_cast<double>(hits[j]) / static_cast<double>(n);
    return frac;
}

std::vector<double> trimmed_exclusion_fraction(const std::vector<neural::ModelParams>& params,
                                               int z) {
    check_same_shape(params);
    const std::size_t k = params.size();
    if (z < 0 || k <= 2 * static_cast<std::size_t>(z))
        throw ConfigError("trimmed mean needs more than 2z models");
    const std::size_t n = params.front().flat_size();
    std::vector<std::vector<double>> flats;
    flats.reserve(k);
    for (const auto& p : params) flats.push_back(p.flatten());

    std::vector<std::size_t> excluded(k, 0);
    std::vector<std::pair<double, std::size_t>> column(k);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) column[j] = {flats[j][i], j};
        std::sort(column.begin(), column.end());
        for (std::size_t j = 0; j < static_cast<std::size_t>(z); ++j) {
            ++excluded[column[j].second];
            ++excluded[column[k - 1 - j].second];
        }
    }
    std::vector<double> frac(k);
    for (std::size_t j = 0; j < k; ++j)
        frac[j] = static_cast<double>(excluded[j]) / static_cast<double>(n);
    return frac;
}

UnionAggregate union_aggregate(const std::vector<neural::ModelParams>& params,
                               const std::vector<std::size_t>& sizes,
                               const sigsyn::LabeledDataset& reserve, int z, InnerRule inner) {
    check_same_shape(params);
    if (sizes.size() != params.size()) throw DimensionError("one size per model expected");
    if (z < 0) throw ConfigError("union drop count must be non-negative");
    const std::size_t k = params.size();
    if (k <= static_cast<std::size_t>(z)) throw ConfigError("union drop count must leave devices");
    const std::size_t survivors = k - static_cast<std::size_t>(z);
    if (inner == InnerRule::Trimmed && survivors <= 2 * static_cast<std::size_t>(z))
        throw ConfigError("inner trimmed mean infeasible after dropping z devices");

    struct Ranked {
        double error;
        double loss;
        std::size_t index;
    };
    std::vector<Ranked> ranked(k);
    for (std::size_t i = 0; i < k; ++i) {
        ranked[i].error = 1.0 - neural::accuracy(params[i], reserve);
        ranked[i].loss = neural::mean_loss(params[i], reserve);
        ranked[i].index = i;
    }
    // Worst first: highest error, ties broken by higher loss, then by index
    // so the ordering is total.
    std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
        if (a.error != b.error) return a.error > b.error;
        if (a.loss != b.loss) return a.loss > b.loss;
        return a.index < b.index;
    });

    UnionAggregate out;
    std::vector<neural::ModelParams> kept;
    kept.reserve(survivors);
    for (std::size_t i = 0; i < k; ++i) {
        if (i < static_cast<std::size_t>(z)) {
            out.dropped.push_back(ranked[i].index);
        } else {
            kept.push_back(params[ranked[i].index]);
        }
    }
    std::sort(out.dropped.begin(), out.dropped.end());
    out.params = inner == InnerRule::Median ? median_aggregate(kept) : trimmed_aggregate(kept, z);
    return out;
}

}  // namespace fedsc::defense
