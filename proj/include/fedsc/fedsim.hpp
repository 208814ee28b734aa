#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fedsc/attacks.hpp"
#include "fedsc/defense.hpp"
#include "fedsc/neural.hpp"
#include "fedsc/rng.hpp"
#include "fedsc/sigsyn.hpp"

namespace fedsc::fedsim {

// Equal-size shards (within one sample) from a globally shuffled dataset.
std::vector<sigsyn::LabeledDataset> partition_iid(const sigsyn::LabeledDataset& dataset, int k,
                                                  RngStream& rng);

// Each device holds exactly labels_per_device randomly chosen classes and a
// quantity drawn from N(qty_mean, qty_std), clipped to what remains in the
// chosen class pools. Shards are pairwise disjoint.
std::vector<sigsyn::LabeledDataset> partition_noniid(const sigsyn::LabeledDataset& dataset, int k,
                                                     int labels_per_device, double qty_mean,
                                                     double qty_std, RngStream& rng);

// w = sum_k (D_k / sum_i D_i) * alpha_k * w_k; alpha is 1 for honest devices.
neural::ModelParams fedavg(const std::vector<neural::ModelParams>& params,
                           const std::vector<std::size_t>& sizes,
                           const std::vector<double>& alphas);

struct DeviceState {
    int id = 0;
    sigsyn::LabeledDataset data;
    bool is_adversary = false;
    attacks::AttackSpec attack;
    double alpha = 1.0;
    int time_in_network = 1;  // t_k, resets to 1 when a device enters
    neural::ModelParams local_params;
};

struct NetworkState {
    std::vector<DeviceState> devices;  // kept sorted by id
    neural::ModelParams global;
    int round = 0;
    sigsyn::LabeledDataset reserve;
    std::uint64_t seed_key = 0;  // master key; per-device round streams fork from it
    int next_device_id = 0;
    double calibrated_b = 0.0;  // set once when auto-B is enabled
    bool has_calibrated_b = false;
};

enum class DefenseKind { None, Usdfl, Dusdfl, Median, Trimmed, UnionMedian, UnionTrimmed };

DefenseKind defense_from_name(const std::string& name);  // throws ConfigError
std::string defense_name(DefenseKind kind);

struct DefenseChoice {
    DefenseKind kind = DefenseKind::Usdfl;
    defense::PenaltyCoeffs coeffs;
    double gamma_new = 0.2;  // maximum threshold reduction for new devices
    bool auto_b = false;     // calibrate B so the warm-up penalty sits at gamma_min
    int z = 1;               // trim/drop count for the baseline defenses
    int active_from = 0;     // baselines aggregate plainly before this round
};

struct TrainOptions {
    double eta = 0.001;
    int batch_size = 32;
    int local_epochs = 1;
    int threads = 1;
};

struct AttackAudit {
    int device_id = 0;
    attacks::Kind kind = attacks::Kind::None;
    double pnr_db = 0.0;
    int fallback_count = 0;
};

struct RoundRecord {
    int round = 0;
    std::vector<int> device_ids;
    std::vector<double> device_acc;          // xi_k on the reserve set
    std::vector<int> device_time;            // t_k
    double global_acc = 0.0;                 // xi on the reserve set, current global
    double test_acc = 0.0;
    double zeta_bar = 0.0;
    double gamma = 0.0;
    double threshold = 0.0;                  // personalized thresholds averaged for DUSD-FL
    std::vector<double> thresholds;          // per device (empty unless DUSD-FL)
    std::vector<int> perceived_adversaries;  // device ids in the flagged set
    std::vector<int> kept;                   // device ids aggregated
    std::vector<bool> truth_adversary;       // aligned with device_ids
    std::vector<AttackAudit> attack_audit;
    bool aggregation_fallback = false;  // every device filtered; kept previous global
    // Element-wise defense audit: per-device selection fraction (median) or
    // exclusion fraction (trimmed); empty for other defenses.
    std::vector<double> defense_scores;
    double wall_seconds = 0.0;
    std::vector<std::vector<double>> wasserstein;  // K x K, only when requested
    std::vector<std::vector<double>> submitted_flat;  // per device, only when requested
    std::vector<double> aggregate_flat;               // only when requested
};

struct RoundOptions {
    DefenseChoice defense;
    TrainOptions train;
    const sigsyn::LabeledDataset* testset = nullptr;
    bool record_wasserstein = false;
    bool record_submitted = false;  // keep flat copies of per-device params
};

// One full aggregation round: broadcast, local training (adversaries poison
// their data against the received global model first), defended aggregation,
// synchronization. Device work is pure per device, so the result is identical
// for serial and threaded execution.
RoundRecord run_round(NetworkState& state, const RoundOptions& options);

struct DynamicsSpec {
    int period = 0;        // 0 disables churn
    double churn = 0.0;    // fraction of devices replaced at each period
};

// Source of shards for devices entering the network.
struct EntrantSource {
    sigsyn::DatasetSpec dataset_spec;
    int labels_per_device = 5;
    double qty_mean = 450.0;
    double qty_std = 4.5;
    double adversary_fraction = 0.0;
    attacks::AttackSpec attack;
    double alpha = 1.0;
};

// Advances time-in-network for every device and, at multiples of period,
// replaces ceil(churn * K) devices with fresh entrants holding non-i.i.d.
// shards and t_k = 1.
void apply_dynamics(NetworkState& state, int round, const DynamicsSpec& dynamics,
                    const EntrantSource& source);

}  // namespace fedsc::fedsim
