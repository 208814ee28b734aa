#include "fedsc/config.hpp"

#include <algorithm>
#include <cmath>

#include "fedsc/errors.hpp"

namespace fedsc::harness {
namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::vector<std::string>& allowed,
                const std::string& context) {
    if (!obj.is_object()) throw ValidationError(context + " must be a JSON object");
    for (const auto& [key, _] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ValidationError("unknown key '" + key + "' in " + context);
    }
}

template <class T>
void read(const json& obj, const char* key, T& field) {
    if (obj.contains(key)) {
        try {
            field = obj.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ValidationError(std::string("bad value for '") + key + "': " + e.what());
        }
    }
}

std::vector<std::string> default_scheme_names() {
    std::vector<std::string> names;
    for (const auto s : sigsyn::default_schemes()) names.push_back(sigsyn::scheme_name(s));
    return names;
}

}  // namespace

Knowledge knowledge_from_name(const std::string& name) {
    if (name == "all") return Knowledge::All;
    if (name == "adversaries") return Knowledge::Adversaries;
    if (name == "attack_time") return Knowledge::AttackTime;
    if (name == "nothing") return Knowledge::Nothing;
    throw ValidationError("unknown knowledge mode: " + name);
}

std::string knowledge_name(Knowledge k) {
    switch (k) {
        case Knowledge::All: return "all";
        case Knowledge::Adversaries: return "adversaries";
        case Knowledge::AttackTime: return "attack_time";
        case Knowledge::Nothing: return "nothing";
    }
    return "?";
}

sigsyn::DatasetSpec DatasetConfig::spec() const {
    sigsyn::DatasetSpec s;
    s.schemes.clear();
    for (const auto& name : schemes) s.schemes.push_back(sigsyn::scheme_from_name(name));
    s.per_class = per_class;
    s.snrs_db = snrs_db;
    s.length = static_cast<std::size_t>(length);
    s.channel = sigsyn::channel_from_name(channel);
    return s;
}

sigsyn::DatasetSpec DatasetConfig::test_spec() const {
    sigsyn::DatasetSpec s = spec();
    s.per_class = test_per_class;
    return s;
}

int ExperimentConfig::true_adversary_count() const {
    return static_cast<int>(std::llround(network.adversary_fraction * network.devices));
}

fedsim::DefenseChoice ExperimentConfig::resolve_defense() const {
    fedsim::DefenseChoice choice;
    choice.kind = fedsim::defense_from_name(defense.kind);
    choice.coeffs.a = defense.a;
    choice.coeffs.b = defense.b;
    choice.coeffs.gamma_max = defense.gamma_max;
    choice.coeffs.gamma_min = defense.gamma_min;
    choice.coeffs.base = defense.log_base == "ten" ? defense::LogBase::Ten
                                                   : defense::LogBase::Natural;
    choice.gamma_new = defense.gamma_new;
    choice.auto_b = defense.auto_b;

    // The knowledge mode feeds only the baseline defenses: adversary-count
    // knowledge sets their z, attack-time knowledge defers their activation.
    const bool knows_count = knowledge == Knowledge::All || knowledge == Knowledge::Adversaries;
    const bool knows_time = knowledge == Knowledge::All || knowledge == Knowledge::AttackTime;
    if (defense.z >= 0) {
        choice.z = defense.z;
    } else {
        choice.z = knows_count ? std::max(1, true_adversary_count()) : 1;
    }
    choice.active_from = knows_time ? attack.start_round : 0;

    const int k = network.devices;
    switch (choice.kind) {
        case fedsim::DefenseKind::Trimmed:
            if (k <= 2 * choice.z)
                throw ValidationError("trimmed defense needs devices > 2z");
            break;
        case fedsim::DefenseKind::UnionMedian:
            if (k <= choice.z) throw ValidationError("union defense needs devices > z");
            break;
        case fedsim::DefenseKind::UnionTrimmed:
            if (k <= choice.z) throw ValidationError("union defense needs devices > z");
            if (k - choice.z <= 2 * choice.z)
                throw ValidationError("union trimmed defense needs devices - z > 2z");
            break;
        default: break;
    }
    return choice;
}

ExperimentConfig parse_config_json(const json& doc) {
    ExperimentConfig cfg;
    cfg.dataset.schemes = default_scheme_names();

    check_keys(doc,
               {"dataset", "partition", "network", "attack", "defense", "knowledge", "train",
                "reserve", "rounds", "dynamics", "seed", "seeds", "threads", "output",
                "twin_unperturbed", "sweep"},
               "config root");

    if (doc.contains("dataset")) {
        const json& d = doc.at("dataset");
        check_keys(d, {"schemes", "per_class", "test_per_class", "snrs_db", "length", "channel"},
                   "dataset");
        read(d, "schemes", cfg.dataset.schemes);
        read(d, "per_class", cfg.dataset.per_class);
        read(d, "test_per_class", cfg.dataset.test_per_class);
        read(d, "snrs_db", cfg.dataset.snrs_db);
        read(d, "length", cfg.dataset.length);
        read(d, "channel", cfg.dataset.channel);
    }
    if (doc.contains("partition")) {
        const json& d = doc.at("partition");
        check_keys(d, {"mode", "labels_per_device", "qty_mean", "qty_std"}, "partition");
        std::string mode = cfg.partition.mode == PartitionMode::Iid ? "iid" : "noniid";
        read(d, "mode", mode);
        if (mode == "iid") {
            cfg.partition.mode = PartitionMode::Iid;
        } else if (mode == "noniid") {
            cfg.partition.mode = PartitionMode::NonIid;
        } else {
            throw ValidationError("partition.mode must be 'iid' or 'noniid'");
        }
        read(d, "labels_per_device", cfg.partition.labels_per_device);
        read(d, "qty_mean", cfg.partition.qty_mean);
        read(d, "qty_std", cfg.partition.qty_std);
    }
    if (doc.contains("network")) {
        const json& d = doc.at("network");
        check_keys(d, {"devices", "adversary_fraction", "alpha_adversary"}, "network");
        read(d, "devices", cfg.network.devices);
        read(d, "adversary_fraction", cfg.network.adversary_fraction);
        read(d, "alpha_adversary", cfg.network.alpha_adversary);
    }
    if (doc.contains("attack")) {
        const json& d = doc.at("attack");
        check_keys(d, {"kind", "pnr_db", "pgd_iters", "start_round", "schedule", "flip_map"},
                   "attack");
        std::string kind = attacks::kind_name(cfg.attack.kind);
        std::string schedule =
            cfg.attack.schedule == attacks::Schedule::Fixed ? "fixed" : "random_per_round";
        read(d, "kind", kind);
        read(d, "schedule", schedule);
        try {
            cfg.attack.kind = attacks::kind_from_name(kind);
        } catch (const ConfigError& e) {
            throw ValidationError(e.what());
        }
        if (schedule == "fixed") {
            cfg.attack.schedule = attacks::Schedule::Fixed;
        } else if (schedule == "random_per_round") {
            cfg.attack.schedule = attacks::Schedule::RandomPerRound;
        } else {
            throw ValidationError("attack.schedule must be 'fixed' or 'random_per_round'");
        }
        read(d, "pnr_db", cfg.attack.pnr_db);
        read(d, "pgd_iters", cfg.attack.pgd_iters);
        read(d, "start_round", cfg.attack.start_round);
        read(d, "flip_map", cfg.attack.flip_map);
    } else {
        cfg.attack.kind = attacks::Kind::Pgd;
    }
    if (doc.contains("defense")) {
        const json& d = doc.at("defense");
        check_keys(d,
                   {"kind", "a", "b", "gamma_max", "gamma_min", "gamma_new", "log_base", "auto_b",
                    "z"},
                   "defense");
        read(d, "kind", cfg.defense.kind);
        read(d, "a", cfg.defense.a);
        read(d, "b", cfg.defense.b);
        read(d, "gamma_max", cfg.defense.gamma_max);
        read(d, "gamma_min", cfg.defense.gamma_min);
        read(d, "gamma_new", cfg.defense.gamma_new);
        read(d, "log_base", cfg.defense.log_base);
        read(d, "auto_b", cfg.defense.auto_b);
        read(d, "z", cfg.defense.z);
    }
    if (doc.contains("knowledge")) {
        if (!doc.at("knowledge").is_string())
            throw ValidationError("knowledge must be a string");
        cfg.knowledge = knowledge_from_name(doc.at("knowledge").get<std::string>());
    }
    if (doc.contains("train")) {
        const json& d = doc.at("train");
        check_keys(d, {"eta", "batch_size", "local_epochs", "hidden", "init_scale", "pretrain"},
                   "train");
        read(d, "eta", cfg.train.eta);
        read(d, "batch_size", cfg.train.batch_size);
        read(d, "local_epochs", cfg.train.local_epochs);
        read(d, "hidden", cfg.train.hidden);
        read(d, "init_scale", cfg.train.init_scale);
        read(d, "pretrain", cfg.train.pretrain);
    }
    if (doc.contains("reserve")) {
        const json& d = doc.at("reserve");
        check_keys(d, {"size", "labels"}, "reserve");
        read(d, "size", cfg.reserve.size);
        read(d, "labels", cfg.reserve.labels);
    }
    read(doc, "rounds", cfg.rounds);
    if (doc.contains("dynamics")) {
        const json& d = doc.at("dynamics");
        check_keys(d, {"period", "churn"}, "dynamics");
        read(d, "period", cfg.dynamics.period);
        read(d, "churn", cfg.dynamics.churn);
    }
    if (doc.contains("seed") && doc.contains("seeds"))
        throw ValidationError("give either 'seed' or 'seeds', not both");
    if (doc.contains("seed")) {
        cfg.seeds = {doc.at("seed").get<std::uint64_t>()};
    }
    if (doc.contains("seeds")) {
        read(doc, "seeds", cfg.seeds);
    }
    read(doc, "threads", cfg.threads);
    if (doc.contains("output")) {
        const json& d = doc.at("output");
        check_keys(d, {"dir", "checkpoint_every", "dump_wasserstein", "write_datasets"}, "output");
        read(d, "dir", cfg.output.dir);
        read(d, "checkpoint_every", cfg.output.checkpoint_every);
        read(d, "dump_wasserstein", cfg.output.dump_wasserstein);
        read(d, "write_datasets", cfg.output.write_datasets);
    }
    read(doc, "twin_unperturbed", cfg.twin_unperturbed);
    if (doc.contains("sweep")) {
        const json& d = doc.at("sweep");
        check_keys(d, {"axis", "values"}, "sweep");
        SweepSection s;
        read(d, "axis", s.axis);
        if (!d.contains("values") || !d.at("values").is_array() || d.at("values").empty())
            throw ValidationError("sweep.values must be a non-empty array");
        for (const auto& v : d.at("values")) s.values.push_back(v);
        if (s.axis.empty()) throw ValidationError("sweep.axis must be set");
        cfg.sweep = std::move(s);
    }

    // Cross-field consistency.
    if (cfg.dataset.schemes.empty()) throw ValidationError("dataset.schemes must be non-empty");
    for (const auto& name : cfg.dataset.schemes) {
        try {
            sigsyn::scheme_from_name(name);
        } catch (const SchemeError& e) {
            throw ValidationError(e.what());
        }
    }
    try {
        sigsyn::channel_from_name(cfg.dataset.channel);
    } catch (const ConfigError& e) {
        throw ValidationError(e.what());
    }
    if (cfg.dataset.per_class < 1) throw ValidationError("dataset.per_class must be >= 1");
    if (cfg.dataset.test_per_class < 1)
        throw ValidationError("dataset.test_per_class must be >= 1");
    if (cfg.dataset.length < 8) throw ValidationError("dataset.length must be >= 8");
    if (cfg.dataset.snrs_db.empty()) throw ValidationError("dataset.snrs_db must be non-empty");
    const int classes = cfg.dataset.class_count();
    if (cfg.partition.mode == PartitionMode::NonIid &&
        (cfg.partition.labels_per_device < 1 || cfg.partition.labels_per_device > classes))
        throw ValidationError("partition.labels_per_device must be in [1, C]");
    if (cfg.network.devices < 1) throw ValidationError("network.devices must be >= 1");
    if (cfg.network.adversary_fraction < 0.0 || cfg.network.adversary_fraction > 1.0)
        throw ValidationError("network.adversary_fraction must be in [0, 1]");
    if (cfg.network.alpha_adversary <= 0.0)
        throw ValidationError("network.alpha_adversary must be positive");
    if (cfg.attack.pgd_iters < 1) throw ValidationError("attack.pgd_iters must be >= 1");
    if (cfg.attack.start_round < 0) throw ValidationError("attack.start_round must be >= 0");
    if (!cfg.attack.flip_map.empty()) {
        if (cfg.attack.flip_map.size() != static_cast<std::size_t>(classes))
            throw ValidationError("attack.flip_map must list every class once");
        std::vector<bool> seen(static_cast<std::size_t>(classes), false);
        bool any_moved = false;
        for (int c = 0; c < classes; ++c) {
            const int to = cfg.attack.flip_map[static_cast<std::size_t>(c)];
            if (to < 0 || to >= classes || seen[static_cast<std::size_t>(to)])
                throw ValidationError("attack.flip_map must be a permutation of [0, C)");
            seen[static_cast<std::size_t>(to)] = true;
            any_moved = any_moved || to != c;
        }
        if (!any_moved) throw ValidationError("attack.flip_map must move at least one class");
    }
    if (cfg.defense.gamma_min >= cfg.defense.gamma_max)
        throw ValidationError("defense.gamma_min must be below defense.gamma_max");
    if (cfg.defense.log_base != "natural" && cfg.defense.log_base != "ten")
        throw ValidationError("defense.log_base must be 'natural' or 'ten'");
    if (cfg.train.eta <= 0.0) throw ValidationError("train.eta must be positive");
    if (cfg.train.batch_size < 1) throw ValidationError("train.batch_size must be >= 1");
    if (cfg.train.local_epochs < 1) throw ValidationError("train.local_epochs must be >= 1");
    for (const int h : cfg.train.hidden) {
        if (h < 1) throw ValidationError("train.hidden sizes must be >= 1");
    }
    if (cfg.reserve.size < 1) throw ValidationError("reserve.size must be >= 1");
    if (cfg.reserve.labels < 1 || cfg.reserve.labels > classes)
        throw ValidationError("reserve.labels must be in [1, C]");
    if (cfg.rounds < 1) throw ValidationError("rounds must be >= 1");
    if (cfg.dynamics.period < 0) throw ValidationError("dynamics.period must be >= 0");
    if (cfg.dynamics.churn < 0.0 || cfg.dynamics.churn > 1.0)
        throw ValidationError("dynamics.churn must be in [0, 1]");
    if (cfg.seeds.empty()) throw ValidationError("at least one seed is required");
    if (cfg.threads < 1) throw ValidationError("threads must be >= 1");
    try {
        cfg.resolve_defense();  // validates the kind and z feasibility
    } catch (const ConfigError& e) {
        throw ValidationError(e.what());
    }
    return cfg;
}

ExperimentConfig parse_config(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_config_json(doc);
}

nlohmann::json serialize_config(const ExperimentConfig& cfg) {
    json doc;
    doc["dataset"] = {{"schemes", cfg.dataset.schemes},
                      {"per_class", cfg.dataset.per_class},
                      {"test_per_class", cfg.dataset.test_per_class},
                      {"snrs_db", cfg.dataset.snrs_db},
                      {"length", cfg.dataset.length},
                      {"channel", cfg.dataset.channel}};
    doc["partition"] = {{"mode", cfg.partition.mode == PartitionMode::Iid ? "iid" : "noniid"},
                        {"labels_per_device", cfg.partition.labels_per_device},
                        {"qty_mean", cfg.partition.qty_mean},
                        {"qty_std", cfg.partition.qty_std}};
    doc["network"] = {{"devices", cfg.network.devices},
                      {"adversary_fraction", cfg.network.adversary_fraction},
                      {"alpha_adversary", cfg.network.alpha_adversary}};
    doc["attack"] = {{"kind", attacks::kind_name(cfg.attack.kind)},
                     {"pnr_db", cfg.attack.pnr_db},
                     {"pgd_iters", cfg.attack.pgd_iters},
                     {"start_round", cfg.attack.start_round},
                     {"schedule", cfg.attack.schedule == attacks::Schedule::Fixed
                                      ? "fixed"
                                      : "random_per_round"},
                     {"flip_map", cfg.attack.flip_map}};
    doc["defense"] = {{"kind", cfg.defense.kind},
                      {"a", cfg.defense.a},
                      {"b", cfg.defense.b},
                      {"gamma_max", cfg.defense.gamma_max},
                      {"gamma_min", cfg.defense.gamma_min},
                      {"gamma_new", cfg.defense.gamma_new},
                      {"log_base", cfg.defense.log_base},
                      {"auto_b", cfg.defense.auto_b},
                      {"z", cfg.defense.z}};
    doc["knowledge"] = knowledge_name(cfg.knowledge);
    doc["train"] = {{"eta", cfg.train.eta},
                    {"batch_size", cfg.train.batch_size},
                    {"local_epochs", cfg.train.local_epochs},
                    {"hidden", cfg.train.hidden},
                    {"init_scale", cfg.train.init_scale},
                    {"pretrain", cfg.train.pretrain}};
    doc["reserve"] = {{"size", cfg.reserve.size}, {"labels", cfg.reserve.labels}};
    doc["rounds"] = cfg.rounds;
    doc["dynamics"] = {{"period", cfg.dynamics.period}, {"churn", cfg.dynamics.churn}};
    doc["seeds"] = cfg.seeds;
    doc["threads"] = cfg.threads;
    doc["output"] = {{"dir", cfg.output.dir},
                     {"checkpoint_every", cfg.output.checkpoint_every},
                     {"dump_wasserstein", cfg.output.dump_wasserstein},
                     {"write_datasets", cfg.output.write_datasets}};
    doc["twin_unperturbed"] = cfg.twin_unperturbed;
    if (cfg.sweep) {
        doc["sweep"] = {{"axis", cfg.sweep->axis}, {"values", cfg.sweep->values}};
    }
    return doc;
}

}  // namespace fedsc::harness
