#pragma once

#include <string>
#include <vector>

#include "fedsc/neural.hpp"
#include "fedsc/rng.hpp"
#include "fedsc/sigsyn.hpp"

namespace fedsc::attacks {

enum class Kind { None, Awgn, Flip, Fgsm, Pgd };

Kind kind_from_name(const std::string& name);  // throws ConfigError
std::string kind_name(Kind kind);

// Per-round choice under the random schedule: architecture drawn uniformly
// from {PGD, FGSM, AWGN} and power from {high, medium, low} = {8, 4, 0} dB PNR.
enum class Schedule { Fixed, RandomPerRound };

struct AttackSpec {
    Kind kind = Kind::None;
    double pnr_db = 8.0;
    int pgd_iters = 5;     // Q >= 1
    int start_round = 25;  // t0
    Schedule schedule = Schedule::Fixed;
    // Optional fixed label mapping for Flip (a permutation of [0, C)); empty
    // selects a seeded per-device derangement.
    std::vector<int> flip_map;
};

struct Perturbation {
    std::vector<double> delta;  // same l x 2 layout as SignalSample::iq
    double norm2() const;
};

// delta = sqrt(P) * g / ||g||2 with g the input gradient of the cross-entropy
// at (sample, label). Throws DegenerateGradientError when ||g|| < 1e-15.
Perturbation fgsm(const neural::ModelParams& params, const sigsyn::SignalSample& sample,
                  int label, double power);

// Q accumulation steps of size sqrt(P)/Q, each gradient taken at the current
// perturbed point. A degenerate gradient stops the iteration early.
Perturbation pgd(const neural::ModelParams& params, const sigsyn::SignalSample& sample,
                 int label, double power, int iters);

// i.i.d. Gaussian entries scaled so E||delta||^2 = P. P = 0 gives a zero matrix.
Perturbation awgn_perturb(const sigsyn::SignalSample& sample, double power, RngStream& rng);

// Remaps every label through a seeded derangement of the classes; features
// untouched.
sigsyn::LabeledDataset label_flip(const sigsyn::LabeledDataset& dataset, RngStream& rng);
std::vector<int> derangement(int classes, RngStream& rng);  // throws ConfigError if classes < 2

struct PoisonResult {
    sigsyn::LabeledDataset dataset;
    int fallback_count = 0;  // degenerate-gradient samples that fell back to AWGN
    Kind applied_kind = Kind::None;
    double applied_pnr_db = 0.0;
};

// Produces the adversary's training set for one round: every sample becomes
// r + delta with delta crafted against the freshly received global model, at
// the power implied by the spec's PNR and the sample's own SNR. Rounds before
// start_round return the dataset unchanged. `rng` is the per-round stream;
// `stable_rng` persists across rounds so the label-flip derangement stays the
// same mapping for the device's whole campaign.
PoisonResult poison_local_dataset(const sigsyn::LabeledDataset& data,
                                  const neural::ModelParams& global_params,
                                  const AttackSpec& spec, int round, RngStream& rng,
                                  RngStream stable_rng);

}  // namespace fedsc::attacks
