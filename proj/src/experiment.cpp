#include "fedsc/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "fedsc/errors.hpp"

namespace fedsc::harness {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string fmt_double(double v) {
    char tmp[40];
    std::snprintf(tmp, sizeof(tmp), "%.17g", v);
    return tmp;
}

sigsyn::LabeledDataset build_reserve(const ExperimentConfig& cfg, RngStream rng) {
    const sigsyn::DatasetSpec spec = cfg.dataset.spec();
    const int c = cfg.dataset.class_count();

    std::vector<int> classes(static_cast<std::size_t>(c));
    std::iota(classes.begin(), classes.end(), 0);
    rng.shuffle(classes);
    classes.resize(static_cast<std::size_t>(cfg.reserve.labels));
    std::sort(classes.begin(), classes.end());

    sigsyn::LabeledDataset reserve;
    reserve.class_count = c;
    reserve.samples.reserve(static_cast<std::size_t>(cfg.reserve.size));
    for (int i = 0; i < cfg.reserve.size; ++i) {
        const int cls = classes[static_cast<std::size_t>(i) % classes.size()];
        const double snr =
            spec.snrs_db[(static_cast<std::size_t>(i) / classes.size()) % spec.snrs_db.size()];
        sigsyn::SignalSample s = sigsyn::synth_signal(
            spec.schemes[static_cast<std::size_t>(cls)], snr, spec.length, rng, spec.channel);
        s.label = cls;
        reserve.samples.push_back(std::move(s));
    }
    return reserve;
}

int fp_count_for_round(const fedsim::RoundRecord& rec) {
    int count = 0;
    for (std::size_t i = 0; i < rec.device_ids.size(); ++i) {
        if (rec.truth_adversary[i]) continue;
        if (std::find(rec.perceived_adversaries.begin(), rec.perceived_adversaries.end(),
                      rec.device_ids[i]) != rec.perceived_adversaries.end())
            ++count;
    }
    return count;
}

RunResult run_single_impl(const ExperimentConfig& cfg, std::uint64_t seed,
                          const std::string* artifact_dir) {
    const auto t_start = std::chrono::steady_clock::now();
    RunResult result;
    result.seed = seed;

    const RngStream master(seed);
    RngStream train_stream = master.fork(streams::kDataset);
    sigsyn::LabeledDataset train = sigsyn::build_dataset(cfg.dataset.spec(), train_stream);
    RngStream test_stream = master.fork(streams::kTestset);
    sigsyn::LabeledDataset test = sigsyn::build_dataset(cfg.dataset.test_spec(), test_stream);
    sigsyn::LabeledDataset reserve = build_reserve(cfg, master.fork(streams::kReserve));

    RngStream part_stream = master.fork(streams::kPartition);
    std::vector<sigsyn::LabeledDataset> shards;
    if (cfg.partition.mode == PartitionMode::Iid) {
        shards = fedsim::partition_iid(train, cfg.network.devices, part_stream);
    } else {
        shards = fedsim::partition_noniid(train, cfg.network.devices,
                                          cfg.partition.labels_per_device, cfg.partition.qty_mean,
                                          cfg.partition.qty_std, part_stream);
    }

    RngStream adv_stream = master.fork(streams::kAdversaries);
    std::vector<int> ids(static_cast<std::size_t>(cfg.network.devices));
    std::iota(ids.begin(), ids.end(), 0);
    adv_stream.shuffle(ids);
    std::set<int> adversaries(ids.begin(), ids.begin() + cfg.true_adversary_count());

    neural::ArchSpec arch;
    arch.input_dim = static_cast<std::size_t>(2 * cfg.dataset.length);
    arch.hidden.clear();
    for (const int h : cfg.train.hidden) arch.hidden.push_back(static_cast<std::size_t>(h));
    arch.output_dim = static_cast<std::size_t>(cfg.dataset.class_count());
    arch.init_scale = cfg.train.init_scale;

    RngStream init_stream = master.fork(streams::kModelInit);
    neural::ModelParams w0 = neural::init_model(arch, init_stream);
    if (cfg.train.pretrain) {
        RngStream pre_stream = master.fork(streams::kPretrain);
        w0 = neural::train_one_epoch(w0, reserve, cfg.train.eta, cfg.train.batch_size, pre_stream);
    }

    fedsim::NetworkState state;
    state.global = w0;
    state.reserve = reserve;
    state.seed_key = seed;
    state.next_device_id = cfg.network.devices;
    for (int i = 0; i < cfg.network.devices; ++i) {
        fedsim::DeviceState dev;
        dev.id = i;
        dev.data = std::move(shards[static_cast<std::size_t>(i)]);
        dev.is_adversary = adversaries.count(i) > 0;
        dev.attack = cfg.attack;
        dev.alpha = dev.is_adversary ? cfg.network.alpha_adversary : 1.0;
        dev.time_in_network = 1;
        dev.local_params = w0;
        state.devices.push_back(std::move(dev));
    }

    fedsim::RoundOptions opts;
    opts.defense = cfg.resolve_defense();
    opts.train = fedsim::TrainOptions{cfg.train.eta, cfg.train.batch_size, cfg.train.local_epochs,
                                      cfg.threads};
    opts.testset = &test;
    opts.record_wasserstein = cfg.output.dump_wasserstein;

    fedsim::EntrantSource entrants;
    entrants.dataset_spec = cfg.dataset.spec();
    entrants.labels_per_device = cfg.partition.labels_per_device;
    entrants.qty_mean = cfg.partition.qty_mean;
    entrants.qty_std = cfg.partition.qty_std;
    entrants.adversary_fraction = cfg.network.adversary_fraction;
    entrants.attack = cfg.attack;
    entrants.alpha = cfg.network.alpha_adversary;

    const fedsim::DynamicsSpec dynamics{cfg.dynamics.period, cfg.dynamics.churn};
    for (int t = 0; t < cfg.rounds; ++t) {
        if (t > 0) fedsim::apply_dynamics(state, t, dynamics, entrants);
        result.rounds.push_back(fedsim::run_round(state, opts));
        if (artifact_dir != nullptr && cfg.output.checkpoint_every > 0 &&
            (t + 1) % cfg.output.checkpoint_every == 0) {
            neural::save_checkpoint(state.global,
                                    *artifact_dir + "/checkpoint_round_" + std::to_string(t) +
                                        ".ckpt");
        }
    }

    result.final_model = state.global;
    result.final_test_acc = neural::accuracy(state.global, test);
    result.final_reserve_acc = neural::accuracy(state.global, reserve);
    result.confusion = confusion_matrix(state.global, test);
    result.fp = false_positive_stats(result.rounds);

    double post_sum = 0.0;
    int post_n = 0;
    for (const auto& rec : result.rounds) {
        if (rec.round >= cfg.attack.start_round) {
            post_sum += rec.test_acc;
            ++post_n;
        }
    }
    if (post_n == 0) {
        for (const auto& rec : result.rounds) {
            post_sum += rec.test_acc;
            ++post_n;
        }
    }
    result.mean_post_attack_test_acc = post_sum / static_cast<double>(post_n);

    if (artifact_dir != nullptr && cfg.output.write_datasets) {
        sigsyn::write_dataset_csv(train, *artifact_dir + "/train.csv");
        sigsyn::write_dataset_csv(test, *artifact_dir + "/test.csv");
        sigsyn::write_dataset_csv(reserve, *artifact_dir + "/reserve.csv");
    }

    if (cfg.twin_unperturbed) {
        ExperimentConfig twin = cfg;
        twin.attack.kind = attacks::Kind::None;
        twin.network.adversary_fraction = 0.0;
        twin.defense.kind = "none";
        twin.twin_unperturbed = false;
        twin.output.write_datasets = false;
        twin.output.checkpoint_every = 0;
        result.twin_rounds = run_single_impl(twin, seed, nullptr).rounds;
    }

    result.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return result;
}

void write_run_files(const ExperimentConfig& cfg, const RunResult& run, const std::string& dir) {
    fs::create_directories(dir);

    {
        std::ofstream out(dir + "/rounds.csv", std::ios::trunc);
        if (!out) throw IoError("cannot write " + dir + "/rounds.csv");
        out << "round,global_acc,test_acc,zeta_bar,gamma,threshold,flagged_count,fp_count,"
               "aggregation_fallback\n";
        for (const auto& rec : run.rounds) {
            out << rec.round << ',' << fmt_double(rec.global_acc) << ','
                << fmt_double(rec.test_acc) << ',' << fmt_double(rec.zeta_bar) << ','
                << fmt_double(rec.gamma) << ',' << fmt_double(rec.threshold) << ','
                << rec.perceived_adversaries.size() << ',' << fp_count_for_round(rec) << ','
                << (rec.aggregation_fallback ? 1 : 0) << '\n';
        }
    }
    {
        std::ofstream out(dir + "/detections.csv", std::ios::trunc);
        if (!out) throw IoError("cannot write " + dir + "/detections.csv");
        out << "round,device_id,reserve_acc,flagged,true_adversary\n";
        for (const auto& rec : run.rounds) {
            for (std::size_t i = 0; i < rec.device_ids.size(); ++i) {
                const int id = rec.device_ids[i];
                const bool flagged =
                    std::find(rec.perceived_adversaries.begin(), rec.perceived_adversaries.end(),
                              id) != rec.perceived_adversaries.end();
                out << rec.round << ',' << id << ',' << fmt_double(rec.device_acc[i]) << ','
                    << (flagged ? 1 : 0) << ',' << (rec.truth_adversary[i] ? 1 : 0) << '\n';
            }
        }
    }
    {
        std::ofstream out(dir + "/attacks.csv", std::ios::trunc);
        if (!out) throw IoError("cannot write " + dir + "/attacks.csv");
        out << "round,device_id,kind,pnr_db,fallback_count\n";
        for (const auto& rec : run.rounds) {
            for (const auto& audit : rec.attack_audit) {
                out << rec.round << ',' << audit.device_id << ','
                    << attacks::kind_name(audit.kind) << ',' << fmt_double(audit.pnr_db) << ','
                    << audit.fallback_count << '\n';
            }
        }
    }
    {
        std::ofstream out(dir + "/confusion.csv", std::ios::trunc);
        if (!out) throw IoError("cannot write " + dir + "/confusion.csv");
        const std::size_t c = run.confusion.size();
        out << "true_class";
        for (std::size_t j = 0; j < c; ++j) out << ",pred_" << j;
        out << '\n';
        for (std::size_t i = 0; i < c; ++i) {
            out << i;
            for (std::size_t j = 0; j < c; ++j) out << ',' << run.confusion[i][j];
            out << '\n';
        }
    }
    if (!run.twin_rounds.empty()) {
        std::ofstream out(dir + "/twin_rounds.csv", std::ios::trunc);
        if (!out) throw IoError("cannot write " + dir + "/twin_rounds.csv");
        out << "round,global_acc,test_acc\n";
        for (const auto& rec : run.twin_rounds) {
            out << rec.round << ',' << fmt_double(rec.global_acc) << ','
                << fmt_double(rec.test_acc) << '\n';
        }
    }
    if (cfg.output.dump_wasserstein) {
        std::ofstream out(dir + "/wasserstein_t.csv", std::ios::trunc);
        if (!out) throw IoError("cannot write " + dir + "/wasserstein_t.csv");
        out << "round,device_a,device_b,distance\n";
        for (const auto& rec : run.rounds) {
            for (std::size_t i = 0; i < rec.wasserstein.size(); ++i) {
                for (std::size_t j = 0; j < rec.wasserstein[i].size(); ++j) {
                    out << rec.round << ',' << rec.device_ids[i] << ',' << rec.device_ids[j]
                        << ',' << fmt_double(rec.wasserstein[i][j]) << '\n';
                }
            }
        }
    }
    neural::save_checkpoint(run.final_model, dir + "/model_final.ckpt");
}

json run_summary_json(const RunResult& run) {
    return json{{"seed", run.seed},
                {"final_test_acc", run.final_test_acc},
                {"final_reserve_acc", run.final_reserve_acc},
                {"mean_post_attack_test_acc", run.mean_post_attack_test_acc},
                {"fp_nominal", run.fp.nominal},
                {"fp_rate", run.fp.rate},
                {"rounds", run.rounds.size()},
                {"runtime_seconds", run.runtime_seconds}};
}

void aggregate(ResultsBundle& bundle) {
    if (bundle.runs.empty()) return;
    const double n = static_cast<double>(bundle.runs.size());
    bundle.mean_final_test_acc = 0.0;
    bundle.mean_post_attack_test_acc = 0.0;
    bundle.mean_fp_nominal = 0.0;
    bundle.mean_fp_rate = 0.0;
    for (const auto& run : bundle.runs) {
        bundle.mean_final_test_acc += run.final_test_acc / n;
        bundle.mean_post_attack_test_acc += run.mean_post_attack_test_acc / n;
        bundle.mean_fp_nominal += run.fp.nominal / n;
        bundle.mean_fp_rate += run.fp.rate / n;
    }
}

void set_json_path(json& doc, const std::string& axis, const json& value) {
    json* node = &doc;
    std::stringstream ss(axis);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    if (parts.empty()) throw ValidationError("empty sweep axis");
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];
    (*node)[parts.back()] = value;
}

std::string value_slug(const json& v) {
    std::string s = v.is_string() ? v.get<std::string>() : v.dump();
    for (auto& ch : s) {
        if (ch == '/' || ch == ' ' || ch == '"') ch = '_';
    }
    return s;
}

}  // namespace

RunResult run_single(const ExperimentConfig& config, std::uint64_t seed) {
    return run_single_impl(config, seed, nullptr);
}

ResultsBundle run_experiment(const ExperimentConfig& config) {
    ResultsBundle bundle;
    bundle.config = config;
    const bool single = config.seeds.size() == 1;
    try {
        for (const std::uint64_t seed : config.seeds) {
            const std::string dir = single
                                        ? config.output.dir
                                        : config.output.dir + "/seed_" + std::to_string(seed);
            fs::create_directories(dir);
            bundle.runs.push_back(run_single_impl(config, seed, &dir));
        }
    } catch (...) {
        // Flush whatever completed before propagating.
        aggregate(bundle);
        try {
            write_results(bundle, config.output.dir);
        } catch (...) {
        }
        throw;
    }
    aggregate(bundle);
    write_results(bundle, config.output.dir);
    return bundle;
}

void write_results(const ResultsBundle& bundle, const std::string& dir) {
    fs::create_directories(dir);
    const bool single = bundle.config.seeds.size() == 1;
    for (const auto& run : bundle.runs) {
        const std::string run_dir = single ? dir : dir + "/seed_" + std::to_string(run.seed);
        write_run_files(bundle.config, run, run_dir);
    }

    json doc;
    doc["schema_version"] = "1.0.0";
    doc["config"] = serialize_config(bundle.config);
    doc["n_runs"] = bundle.runs.size();
    doc["per_seed"] = json::array();
    for (const auto& run : bundle.runs) doc["per_seed"].push_back(run_summary_json(run));
    doc["mean_final_test_acc"] = bundle.mean_final_test_acc;
    doc["mean_post_attack_test_acc"] = bundle.mean_post_attack_test_acc;
    doc["mean_fp_nominal"] = bundle.mean_fp_nominal;
    doc["mean_fp_rate"] = bundle.mean_fp_rate;
    if (!bundle.runs.empty() && !bundle.runs.front().twin_rounds.empty()) {
        double twin_final = 0.0;
        for (const auto& run : bundle.runs)
            twin_final += run.twin_rounds.back().test_acc / static_cast<double>(bundle.runs.size());
        doc["mean_twin_final_test_acc"] = twin_final;
    }

    std::ofstream out(dir + "/summary.json", std::ios::trunc);
    if (!out) throw IoError("cannot write " + dir + "/summary.json");
    out << doc.dump(2) << '\n';
}

SweepResult run_sweep(const ExperimentConfig& base) {
    if (!base.sweep) throw ConfigError("config has no sweep section");
    SweepResult result;
    result.axis = base.sweep->axis;

    json base_doc = serialize_config(base);
    base_doc.erase("sweep");

    for (const auto& value : base.sweep->values) {
        SweepPoint point;
        point.value = value;
        try {
            json doc = base_doc;
            set_json_path(doc, base.sweep->axis, value);
            ExperimentConfig cfg = parse_config_json(doc);
            cfg.output.dir = base.output.dir + "/" + result.axis + "=" + value_slug(value);
            const ResultsBundle bundle = run_experiment(cfg);
            point.ok = true;
            point.final_test_acc = bundle.mean_final_test_acc;
            point.post_attack_test_acc = bundle.mean_post_attack_test_acc;
            point.fp_rate = bundle.mean_fp_rate;
        } catch (const std::exception& e) {
            point.ok = false;
            point.error = e.what();
        }
        result.points.push_back(std::move(point));
    }

    result.nondecreasing = true;
    double prev = -1.0;
    for (const auto& p : result.points) {
        if (!p.ok) continue;
        if (p.final_test_acc < prev - 1e-12) result.nondecreasing = false;
        prev = p.final_test_acc;
    }

    fs::create_directories(base.output.dir);
    {
        std::ofstream out(base.output.dir + "/sweep.csv", std::ios::trunc);
        if (!out) throw IoError("cannot write sweep.csv");
        out << "axis,value,status,final_test_acc,post_attack_test_acc,fp_rate\n";
        for (const auto& p : result.points) {
            out << result.axis << ',' << value_slug(p.value) << ',' << (p.ok ? "ok" : "error")
                << ',' << fmt_double(p.final_test_acc) << ','
                << fmt_double(p.post_attack_test_acc) << ',' << fmt_double(p.fp_rate) << '\n';
        }
    }
    {
        json doc;
        doc["axis"] = result.axis;
        doc["nondecreasing_final_acc"] = result.nondecreasing;
        doc["points"] = json::array();
        for (const auto& p : result.points) {
            doc["points"].push_back(json{{"value", p.value},
                                         {"ok", p.ok},
                                         {"error", p.error},
                                         {"final_test_acc", p.final_test_acc},
                                         {"post_attack_test_acc", p.post_attack_test_acc},
                                         {"fp_rate", p.fp_rate}});
        }
        std::ofstream out(base.output.dir + "/sweep_summary.json", std::ios::trunc);
        if (!out) throw IoError("cannot write sweep_summary.json");
        out << doc.dump(2) << '\n';
    }
    return result;
}

namespace {

// Balanced shard of n samples, one device: cycles (class, snr) deterministically.
sigsyn::LabeledDataset theory_shard(const sigsyn::DatasetSpec& spec, int n, RngStream& rng) {
    sigsyn::LabeledDataset out;
    out.class_count = static_cast<int>(spec.schemes.size());
    out.samples.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const std::size_t cls = static_cast<std::size_t>(i) % spec.schemes.size();
        const double snr =
            spec.snrs_db[(static_cast<std::size_t>(i) / spec.schemes.size()) % spec.snrs_db.size()];
        sigsyn::SignalSample s =
            sigsyn::synth_signal(spec.schemes[cls], snr, spec.length, rng, spec.channel);
        s.label = static_cast<int>(cls);
        out.samples.push_back(std::move(s));
    }
    return out;
}

struct SurrogateRun {
    theory::Trajectory traj;
    theory::LossFn pooled;
    std::vector<double> e_norms_filtered;
};

SurrogateRun surrogate_run(const TheoryStudyConfig& cfg, int shard_size, double rho,
                           std::uint64_t salt) {
    SurrogateRun run;
    std::vector<theory::LossFn> device_losses;
    sigsyn::LabeledDataset pooled_data;
    pooled_data.class_count = static_cast<int>(cfg.dataset.schemes.size());
    for (int d = 0; d < cfg.devices; ++d) {
        RngStream dev_stream = RngStream(cfg.seed)
                                   .fork(streams::kTheory)
                                   .fork(salt)
                                   .fork(static_cast<std::uint64_t>(d));
        sigsyn::LabeledDataset shard = theory_shard(cfg.dataset, shard_size, dev_stream);
        pooled_data.samples.insert(pooled_data.samples.end(), shard.samples.begin(),
                                   shard.samples.end());
        device_losses.push_back(
            theory::softmax_regression_loss(theory::flatten_dataset(shard), cfg.lambda));
    }
    run.pooled =
        theory::softmax_regression_loss(theory::flatten_dataset(pooled_data), cfg.lambda);

    theory::TrajectoryConfig tc;
    tc.rounds = cfg.rounds;
    tc.devices = cfg.devices;
    tc.filter_from = cfg.filter_from;
    for (int f = 0; f < cfg.filtered_devices; ++f)
        tc.filtered.push_back(static_cast<std::size_t>(f));
    run.traj = theory::run_trajectory(device_losses, run.pooled, tc, rho);

    for (std::size_t t = 0; t < run.traj.e.size(); ++t) {
        if (run.traj.flagged_count[t] == 0) continue;
        double acc = 0.0;
        for (const double v : run.traj.e[t]) acc += v * v;
        run.e_norms_filtered.push_back(std::sqrt(acc));
    }
    return run;
}

}  // namespace

TheoryStudyReport run_theory_study(const TheoryStudyConfig& cfg) {
    if (cfg.filtered_devices >= cfg.devices)
        throw ConfigError("the filtered set must leave at least one device");
    TheoryStudyReport rep;

    // Smoothness estimate from a probe dataset of the same shape.
    RngStream probe_stream = RngStream(cfg.seed).fork(streams::kTheory).fork(900001);
    const sigsyn::LabeledDataset probe =
        theory_shard(cfg.dataset, cfg.shard_size * cfg.devices, probe_stream);
    const theory::LossFn probe_loss =
        theory::softmax_regression_loss(theory::flatten_dataset(probe), cfg.lambda);
    RngStream est_stream = RngStream(cfg.seed).fork(streams::kTheory).fork(900002);
    const auto est = theory::estimate_smoothness(probe_loss, cfg.smoothness_pairs, est_stream);
    rep.rho = est.rho;
    rep.mu = est.mu;
    rep.eta = 1.0 / est.rho;

    const SurrogateRun base = surrogate_run(cfg, cfg.shard_size, rep.rho, 1);
    const std::vector<double> w_star = theory::minimize(base.pooled, rep.rho);
    rep.loss_star = base.pooled.value(w_star);
    rep.final_loss = base.pooled.value(base.traj.w.back());

    rep.lemma = theory::check_lemma_trajectory(base.traj, base.pooled, rep.rho);
    rep.lemma_all_hold = std::all_of(rep.lemma.begin(), rep.lemma.end(),
                                     [](const theory::LemmaRecord& r) { return r.holds; });

    rep.gap_checked = rep.mu > 0.0;
    if (rep.gap_checked) {
        rep.gap = theory::check_optimality_gap(base.traj, base.pooled, rep.rho, rep.mu, w_star);
        std::size_t holds = 0;
        for (const auto& g : rep.gap) holds += g.holds ? 1 : 0;
        rep.gap_hold_rate =
            rep.gap.empty() ? 1.0 : static_cast<double>(holds) / static_cast<double>(rep.gap.size());
    }

    const SurrogateRun scaled =
        surrogate_run(cfg, cfg.shard_size * cfg.scale_factor, rep.rho, 2);
    const std::size_t kept = static_cast<std::size_t>(cfg.devices - cfg.filtered_devices);
    rep.error_bound = theory::check_error_bound(
        base.e_norms_filtered, scaled.e_norms_filtered,
        std::vector<std::size_t>(kept, static_cast<std::size_t>(cfg.shard_size)), kept);
    return rep;
}

nlohmann::json theory_report_json(const TheoryStudyReport& rep) {
    json doc;
    doc["rho"] = rep.rho;
    doc["mu"] = rep.mu;
    doc["eta"] = rep.eta;
    doc["loss_star"] = rep.loss_star;
    doc["final_loss"] = rep.final_loss;
    doc["lemma_all_hold"] = rep.lemma_all_hold;
    doc["gap_checked"] = rep.gap_checked;
    doc["gap_hold_rate"] = rep.gap_hold_rate;
    doc["lemma"] = json::array();
    for (const auto& r : rep.lemma) {
        doc["lemma"].push_back(
            json{{"round", r.round}, {"lhs", r.lhs}, {"rhs", r.rhs}, {"holds", r.holds}});
    }
    doc["optimality_gap"] = json::array();
    for (const auto& r : rep.gap) {
        doc["optimality_gap"].push_back(json{{"round", r.round},
                                             {"lhs", r.lhs},
                                             {"rhs", r.rhs},
                                             {"zeta_norm", r.zeta_norm},
                                             {"e_norm", r.e_norm},
                                             {"holds", r.holds}});
    }
    doc["error_bound"] = json{{"median_base", rep.error_bound.median_base},
                              {"median_scaled", rep.error_bound.median_scaled},
                              {"ratio", rep.error_bound.ratio},
                              {"within", rep.error_bound.within},
                              {"gamma_q", rep.error_bound.gamma_q}};
    return doc;
}

}  // namespace fedsc::harness
