#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedsc/attacks.hpp"
#include "fedsc/fedsim.hpp"
#include "fedsc/sigsyn.hpp"

namespace fedsc::harness {

enum class PartitionMode { Iid, NonIid };
enum class Knowledge { All, Adversaries, AttackTime, Nothing };

Knowledge knowledge_from_name(const std::string& name);
std::string knowledge_name(Knowledge k);

struct DatasetConfig {
    std::vector<std::string> schemes;  // defaults to the full desk set
    int per_class = 100;
    int test_per_class = 25;
    std::vector<double> snrs_db{8.0, 10.0};
    int length = 32;
    std::string channel = "iid_taps";

    sigsyn::DatasetSpec spec() const;
    sigsyn::DatasetSpec test_spec() const;
    int class_count() const { return static_cast<int>(schemes.size()); }
};

struct PartitionConfig {
    PartitionMode mode = PartitionMode::Iid;
    int labels_per_device = 5;
    double qty_mean = 450.0;
    double qty_std = 4.5;
};

struct NetworkConfig {
    int devices = 10;
    double adversary_fraction = 0.3;
    double alpha_adversary = 1.0;
};

struct DefenseSection {
    std::string kind = "usdfl";
    double a = 5.0;
    double b = 1e-7;
    double gamma_max = 0.4;
    double gamma_min = 0.3;
    double gamma_new = 0.2;
    std::string log_base = "natural";
    bool auto_b = false;
    int z = -1;  // -1: derive from the knowledge mode
};

struct TrainSection {
    double eta = 0.001;
    int batch_size = 32;
    int local_epochs = 1;
    std::vector<int> hidden{64};
    double init_scale = 1.0;
    bool pretrain = true;
};

struct ReserveSection {
    int size = 128;
    int labels = 8;
};

struct DynamicsSection {
    int period = 0;
    double churn = 0.0;
};

struct OutputSection {
    std::string dir = "out";
    int checkpoint_every = 0;
    bool dump_wasserstein = false;
    bool write_datasets = false;
};

struct SweepSection {
    std::string axis;
    std::vector<nlohmann::json> values;
};

struct ExperimentConfig {
    DatasetConfig dataset;
    PartitionConfig partition;
    NetworkConfig network;
    attacks::AttackSpec attack;
    DefenseSection defense;
    Knowledge knowledge = Knowledge::Nothing;
    TrainSection train;
    ReserveSection reserve;
    int rounds = 50;
    DynamicsSection dynamics;
    std::vector<std::uint64_t> seeds{1};
    int threads = 1;
    OutputSection output;
    bool twin_unperturbed = false;
    std::optional<SweepSection> sweep;

    int true_adversary_count() const;
    fedsim::DefenseChoice resolve_defense() const;  // applies the knowledge mode
};

// Strict parse: defaults filled, unknown keys rejected, cross-field
// consistency enforced.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig parse_config_json(const nlohmann::json& doc);
nlohmann::json serialize_config(const ExperimentConfig& config);

}  // namespace fedsc::harness
