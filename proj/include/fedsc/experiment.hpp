#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedsc/config.hpp"
#include "fedsc/fedsim.hpp"
#include "fedsc/metrics.hpp"
#include "fedsc/theory.hpp"

namespace fedsc::harness {

struct RunResult {
    std::uint64_t seed = 0;
    std::vector<fedsim::RoundRecord> rounds;
    std::vector<fedsim::RoundRecord> twin_rounds;  // unperturbed twin, when requested
    double final_test_acc = 0.0;
    double final_reserve_acc = 0.0;
    double mean_post_attack_test_acc = 0.0;  // mean test accuracy over rounds >= t0
    std::vector<std::vector<std::size_t>> confusion;
    FpStats fp;
    double runtime_seconds = 0.0;
    neural::ModelParams final_model;
};

struct ResultsBundle {
    ExperimentConfig config;
    std::vector<RunResult> runs;
    double mean_final_test_acc = 0.0;
    double mean_post_attack_test_acc = 0.0;
    double mean_fp_nominal = 0.0;
    double mean_fp_rate = 0.0;
};

// Runs every configured seed. Partial results are flushed to the output
// directory before an error propagates.
ResultsBundle run_experiment(const ExperimentConfig& config);

// Single-seed run without touching the filesystem (used by tests and sweeps).
RunResult run_single(const ExperimentConfig& config, std::uint64_t seed);

// rounds.csv, detections.csv, attacks.csv, confusion.csv, summary.json and
// the optional wasserstein_t.csv per the documented schemas. Single-seed
// bundles write at the directory root; multi-seed bundles write per-seed
// subdirectories plus the aggregated summary.
void write_results(const ResultsBundle& bundle, const std::string& dir);

struct SweepPoint {
    nlohmann::json value;
    bool ok = false;
    std::string error;
    double final_test_acc = 0.0;
    double post_attack_test_acc = 0.0;
    double fp_rate = 0.0;
};

struct SweepResult {
    std::string axis;
    std::vector<SweepPoint> points;
    bool nondecreasing = false;  // trend flag over final accuracy
};

// One run_experiment per axis value; per-point failures are recorded and the
// sweep continues. Writes sweep.csv and sweep_summary.json under the output
// directory.
SweepResult run_sweep(const ExperimentConfig& base);

// Theory verification study on the convex surrogate.
struct TheoryStudyConfig {
    int devices = 10;
    int shard_size = 160;
    int rounds = 50;
    int filter_from = 25;
    int filtered_devices = 3;
    double lambda = 0.01;
    int smoothness_pairs = 25;
    int scale_factor = 4;  // shard multiplier for the error-bound check
    std::uint64_t seed = 1;
    sigsyn::DatasetSpec dataset;
};

struct TheoryStudyReport {
    double rho = 0.0;
    double mu = 0.0;
    double eta = 0.0;
    double loss_star = 0.0;
    double final_loss = 0.0;
    std::vector<theory::LemmaRecord> lemma;
    std::vector<theory::GapRecord> gap;
    bool lemma_all_hold = false;
    double gap_hold_rate = 0.0;
    bool gap_checked = true;  // false when mu = 0
    theory::ErrorBoundReport error_bound;
};

TheoryStudyReport run_theory_study(const TheoryStudyConfig& cfg);
nlohmann::json theory_report_json(const TheoryStudyReport& report);

}  // namespace fedsc::harness
