#pragma once

#include <string>
#include <vector>

#include "fedsc/neural.hpp"
#include "fedsc/sigsyn.hpp"

namespace fedsc::defense {

// Raw pre-softmax outputs of one device's model on the server reserve set;
// column i holds the per-reserve-sample logit array for label i.
struct LogitMatrix {
    std::vector<double> values;  // row-major rows x cols
    std::size_t rows = 0;        // reserve size
    std::size_t cols = 0;        // class count
    int device_id = -1;
    int round = -1;

    double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
    std::vector<double> column(std::size_t c) const;
};

LogitMatrix extract_logits(const neural::ModelParams& params,
                           const sigsyn::LabeledDataset& reserve);

// Minimum over pairings of the total absolute displacement between two equal
// length arrays; for 1-D values the sorted pairing attains the minimum.
double wasserstein1(std::vector<double> p, std::vector<double> q);

// Test oracle: explicit minimum over all permutations. Exponential, only
// sensible for short arrays.
double wasserstein1_bruteforce(const std::vector<double>& p, const std::vector<double>& q);

// Average pairwise per-label distance, summed over the outer device index
// without dividing by K.
double avg_logit_distance(const std::vector<LogitMatrix>& logits);

// Same with each device's inner average weighted by its time-in-network over
// the mean time-in-network.
double weighted_avg_logit_distance(const std::vector<LogitMatrix>& logits,
                                   const std::vector<int>& time_in_network);

// Full K x K matrix of summed per-label distances, for audit dumps.
std::vector<std::vector<double>> pairwise_distance_matrix(const std::vector<LogitMatrix>& logits);

enum class LogBase { Natural, Ten };

struct PenaltyCoeffs {
    double a = 5.0;
    double b = 1e-7;
    double gamma_max = 0.4;
    double gamma_min = 0.3;
    LogBase base = LogBase::Natural;
};

// clamp(A log(B zeta_bar), gamma_min, gamma_max); zeta_bar = 0 clamps low.
double penalty(double zeta_bar, const PenaltyCoeffs& coeffs);

double threshold(double global_acc, double gamma);
double personalized_threshold(double global_acc, double gamma, int t_k, int t_max,
                              double gamma_new);

struct FilterAggregate {
    neural::ModelParams params;
    std::vector<std::size_t> flagged;  // indices below threshold
    std::vector<std::size_t> kept;
};

// Indicator-filtered data-weighted mean; throws AllFilteredError if every
// device falls below its threshold.
FilterAggregate usdfl_aggregate(const std::vector<neural::ModelParams>& params,
                                const std::vector<std::size_t>& sizes,
                                const std::vector<double>& accuracies, double threshold);

FilterAggregate dusdfl_aggregate(const std::vector<neural::ModelParams>& params,
                                 const std::vector<std::size_t>& sizes,
                                 const std::vector<double>& accuracies,
                                 const std::vector<double>& thresholds);

// Element-wise robust rules. Median of an even count takes the lower-middle
// element.
neural::ModelParams median_aggregate(const std::vector<neural::ModelParams>& params);
neural::ModelParams trimmed_aggregate(const std::vector<neural::ModelParams>& params, int z);

// Audit scores attributing a device-level footprint to the element-wise
// rules: how often each device's value was the selected median, and how often
// it landed in the trimmed tails.
std::vector<double> median_selection_fraction(const std::vector<neural::ModelParams>& params);
std::vector<double> trimmed_exclusion_fraction(const std::vector<neural::ModelParams>& params,
                                               int z);

enum class InnerRule { Median, Trimmed };

struct UnionAggregate {
    neural::ModelParams params;
    std::vector<std::size_t> dropped;  // worst-z device indices
};

// Evaluates each device's model on the reserve set, drops the z devices with
// the highest classification error (ties broken by higher loss), then applies
// the inner rule to the survivors.
UnionAggregate union_aggregate(const std::vector<neural::ModelParams>& params,
                               const std::vector<std::size_t>& sizes,
                               const sigsyn::LabeledDataset& reserve, int z, InnerRule inner);

}  // namespace fedsc::defense
