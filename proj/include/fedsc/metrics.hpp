#pragma once

#include <cstddef>
#include <vector>

#include "fedsc/fedsim.hpp"
#include "fedsc/neural.hpp"
#include "fedsc/sigsyn.hpp"

namespace fedsc::harness {

// Entry (i, j) counts true-class-i samples predicted as class j.
std::vector<std::vector<std::size_t>> confusion_matrix(const neural::ModelParams& params,
                                                       const sigsyn::LabeledDataset& testset);

struct FpStats {
    double nominal = 0.0;  // mean count of honest devices in the perceived set
    double rate = 0.0;     // nominal / honest-device count * 100
    int sampled_rounds = 0;
};

// Samples the perceived-adversary sets every `window` aggregations. Falls
// back to every round when the log is shorter than one window.
FpStats false_positive_stats(const std::vector<fedsim::RoundRecord>& records, int window = 5);

struct TTestResult {
    double t = 0.0;
    double p = 1.0;
    int dof = 0;
};

// Two-sided paired t-test. Throws DegenerateTestError when every difference
// is zero (report p = 1 by convention if caught).
TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace fedsc::harness
