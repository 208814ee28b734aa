#include "fedsc/fedsim.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <numeric>
#include <thread>

#include "fedsc/errors.hpp"

namespace fedsc::fedsim {
namespace {

// Tags for the per-device round streams.
constexpr std::uint64_t kPoisonTag = 1;
constexpr std::uint64_t kTrainTag = 2;

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::atomic<std::size_t> next{0};
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                fn(i);
            }
        });
    }
    for (auto& t : pool) t.join();
}

std::vector<double> scaled_flat(const neural::ModelParams& p, double alpha) {
    std::vector<double> flat = p.flatten();
    if (alpha != 1.0) {
        for (auto& v : flat) v *= alpha;
    }
    return flat;
}

}  // namespace

std::vector<sigsyn::LabeledDataset> partition_iid(const sigsyn::LabeledDataset& dataset, int k,
                                                  RngStream& rng) {
    if (k <= 0) throw ConfigError("device count must be positive");
    if (dataset.size() < static_cast<std::size_t>(k))
        throw InsufficientDataError("fewer samples than devices");

    // Per-class random deal: each class's samples are shuffled and dealt
    // round-robin, with the offset carried across classes so shard sizes
    // differ by at most one.
    std::vector<std::vector<std::size_t>> pools(
        static_cast<std::size_t>(std::max(dataset.class_count, 1)));
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const int label = dataset.samples[i].label;
        if (label < 0 || label >= static_cast<int>(pools.size()))
            pools.resize(static_cast<std::size_t>(label) + 1);
        pools[static_cast<std::size_t>(label)].push_back(i);
    }

    std::vector<sigsyn::LabeledDataset> shards(static_cast<std::size_t>(k));
    for (auto& shard : shards) shard.class_count = dataset.class_count;
    std::size_t offset = 0;
    for (auto& pool : pools) {
        rng.shuffle(pool);
        for (std::size_t i = 0; i < pool.size(); ++i) {
            shards[(offset + i) % static_cast<std::size_t>(k)].samples.push_back(
                dataset.samples[pool[i]]);
        }
        offset = (offset + pool.size()) % static_cast<std::size_t>(k);
    }
    return shards;
}

std::vector<sigsyn::LabeledDataset> partition_noniid(const sigsyn::LabeledDataset& dataset, int k,
                                                     int labels_per_device, double qty_mean,
                                                     double qty_std, RngStream& rng) {
    if (k <= 0) throw ConfigError("device count must be positive");
    if (labels_per_device < 1 || labels_per_device > dataset.class_count)
        throw ConfigError("labels_per_device must be in [1, C]");

    std::vector<std::vector<std::size_t>> pools(static_cast<std::size_t>(dataset.class_count));
    for (std::size_t i = 0; i < dataset.size(); ++i)
        pools[static_cast<std::size_t>(dataset.samples[i].label)].push_back(i);
    for (auto& pool : pools) rng.shuffle(pool);

    std::vector<int> all_classes(static_cast<std::size_t>(dataset.class_count));
    std::iota(all_classes.begin(), all_classes.end(), 0);

    std::vector<sigsyn::LabeledDataset> shards(static_cast<std::size_t>(k));
    for (auto& shard : shards) {
        std::vector<int> classes = all_classes;
        rng.shuffle(classes);
        classes.resize(static_cast<std::size_t>(labels_per_device));

        // Target at least one sample per chosen class so the shard's label set
        // has exactly labels_per_device distinct classes.
        const double drawn = qty_std > 0.0 ? rng.normal(qty_mean, qty_std) : qty_mean;
        std::size_t target = static_cast<std::size_t>(
            std::max<double>(labels_per_device, std::llround(drawn)));

        shard.class_count = dataset.class_count;
        shard.samples.reserve(target);
        std::size_t taken = 0;
        bool any_left = true;
        while (taken < target && any_left) {
            any_left = false;
            for (const int c : classes) {
                auto& pool = pools[static_cast<std::size_t>(c)];
                if (pool.empty()) continue;
                shard.samples.push_back(dataset.samples[pool.back()]);
                pool.pop_back();
                ++taken;
                any_left = true;
                if (taken >= target) break;
            }
        }
        if (shard.samples.empty())
            throw InsufficientDataError("class pools exhausted before a shard received data");
    }
    return shards;
}

neural::ModelParams fedavg(const std::vector<neural::ModelParams>& params,
                           const std::vector<std::size_t>& sizes,
                           const std::vector<double>& alphas) {
    if (params.empty()) throw ConfigError("fedavg needs at least one model");
    if (sizes.size() != params.size() || alphas.size() != params.size())
        throw DimensionError("one size and one alpha per model expected");
    const std::size_t n = params.front().flat_size();
    double total = 0.0;
    for (const std::size_t d : sizes) total += static_cast<double>(d);
    if (total <= 0.0) throw ConfigError("total data size must be positive");

    std::vector<double> acc(n, 0.0);
    for (std::size_t k = 0; k < params.size(); ++k) {
        if (params[k].flat_size() != n) throw DimensionError("model shapes differ");
        const double w = static_cast<double>(sizes[k]) / total * alphas[k];
        const std::vector<double> flat = params[k].flatten();
        for (std::size_t i = 0; i < n; ++i) acc[i] += w * flat[i];
    }
    return neural::unflatten(params.front().arch, acc);
}

DefenseKind defense_from_name(const std::string& name) {
    if (name == "none") return DefenseKind::None;
    if (name == "usdfl") return DefenseKind::Usdfl;
    if (name == "dusdfl") return DefenseKind::Dusdfl;
    if (name == "median") return DefenseKind::Median;
    if (name == "trimmed") return DefenseKind::Trimmed;
    if (name == "union_m") return DefenseKind::UnionMedian;
    if (name == "union_t") return DefenseKind::UnionTrimmed;
    throw ConfigError("unknown defense: " + name);
}

std::string defense_name(DefenseKind kind) {
    switch (kind) {
        case DefenseKind::None: return "none";
        case DefenseKind::Usdfl: return "usdfl";
        case DefenseKind::Dusdfl: return "dusdfl";
        case DefenseKind::Median: return "median";
        case DefenseKind::Trimmed: return "trimmed";
        case DefenseKind::UnionMedian: return "union_m";
        case DefenseKind::UnionTrimmed: return "union_t";
    }
    return "?";
}

RoundRecord run_round(NetworkState& state, const RoundOptions& options) {
    const auto t_start = std::chrono::steady_clock::now();
    const std::size_t k = state.devices.size();
    if (k == 0) throw ConfigError("network has no devices");

    RoundRecord rec;
    rec.round = state.round;
    rec.global_acc = neural::accuracy(state.global, state.reserve);

    struct DeviceWork {
        neural::ModelParams submitted;  // alpha-scaled trained parameters
        neural::ModelParams trained;    // as trained, before alpha scaling
        double reserve_acc = 0.0;
        defense::LogitMatrix logits;
        AttackAudit audit;
        bool attacked = false;
    };
    std::vector<DeviceWork> work(k);

    const RngStream master(state.seed_key);
    const int round = state.round;
    parallel_for(k, options.train.threads, [&](std::size_t i) {
        const DeviceState& dev = state.devices[i];
        RngStream dev_stream = master.fork(streams::kDevice)
                                   .fork(static_cast<std::uint64_t>(dev.id))
                                   .fork(static_cast<std::uint64_t>(round));
        const sigsyn::LabeledDataset* train_data = &dev.data;
        attacks::PoisonResult poisoned;
        if (dev.is_adversary && dev.attack.kind != attacks::Kind::None &&
            round >= dev.attack.start_round) {
            RngStream poison_stream = dev_stream.fork(kPoisonTag);
            RngStream stable_stream = master.fork(streams::kDevice)
                                          .fork(static_cast<std::uint64_t>(dev.id))
                                          .fork(kPoisonTag);
            poisoned = attacks::poison_local_dataset(dev.data, state.global, dev.attack, round,
                                                     poison_stream, stable_stream);
            train_data = &poisoned.dataset;
            work[i].attacked = true;
            work[i].audit = AttackAudit{dev.id, poisoned.applied_kind, poisoned.applied_pnr_db,
                                        poisoned.fallback_count};
        }

        RngStream train_stream = dev_stream.fork(kTrainTag);
        neural::ModelParams local = state.global;
        for (int e = 0; e < options.train.local_epochs; ++e) {
            local = neural::train_one_epoch(local, *train_data, options.train.eta,
                                            options.train.batch_size, train_stream);
        }
        work[i].trained = local;
        work[i].submitted = dev.alpha == 1.0
                                ? local
                                : neural::unflatten(local.arch, scaled_flat(local, dev.alpha));
        work[i].reserve_acc = neural::accuracy(work[i].submitted, state.reserve);
        work[i].logits = defense::extract_logits(work[i].submitted, state.reserve);
        work[i].logits.device_id = dev.id;
        work[i].logits.round = round;
    });

    std::vector<neural::ModelParams> submitted;
    std::vector<neural::ModelParams> trained;
    std::vector<std::size_t> sizes;
    std::vector<double> alphas;
    std::vector<double> accs;
    std::vector<defense::LogitMatrix> logits;
    std::vector<int> times;
    submitted.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        const DeviceState& dev = state.devices[i];
        submitted.push_back(work[i].submitted);
        trained.push_back(work[i].trained);
        sizes.push_back(dev.data.size());
        alphas.push_back(dev.alpha);
        accs.push_back(work[i].reserve_acc);
        logits.push_back(work[i].logits);
        times.push_back(dev.time_in_network);
        rec.device_ids.push_back(dev.id);
        rec.device_acc.push_back(work[i].reserve_acc);
        rec.device_time.push_back(dev.time_in_network);
        rec.truth_adversary.push_back(dev.is_adversary);
        if (work[i].attacked) rec.attack_audit.push_back(work[i].audit);
    }

    const DefenseChoice& choice = options.defense;
    const bool baseline_active = round >= choice.active_from;
    const std::vector<double> unit_alphas(k, 1.0);
    neural::ModelParams next_global;

    auto flag_ids = [&](const std::vector<std::size_t>& idx) {
        std::vector<int> ids;
        ids.reserve(idx.size());
        for (const std::size_t i : idx) ids.push_back(state.devices[i].id);
        return ids;
    };
    auto kept_complement = [&](const std::vector<int>& flagged) {
        std::vector<int> kept;
        for (const auto& dev : state.devices) {
            if (std::find(flagged.begin(), flagged.end(), dev.id) == flagged.end())
                kept.push_back(dev.id);
        }
        return kept;
    };
    // Device-level footprint of the element-wise rules: a device counts as
    // perceived-adversarial when the rule discarded its value in a majority
    // of coordinates (trimmed) or used it below the 1/K fair share (median).
    auto flagged_above = [&](const std::vector<double>& score, double cut) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < k; ++i) {
            if (score[i] > cut) idx.push_back(i);
        }
        return idx;
    };
    auto flagged_below = [&](const std::vector<double>& score, double cut) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < k; ++i) {
            if (score[i] < cut) idx.push_back(i);
        }
        return idx;
    };

    switch (choice.kind) {
        case DefenseKind::None:
            next_global = fedavg(trained, sizes, alphas);
            rec.kept = kept_complement({});
            break;
        case DefenseKind::Usdfl: {
            rec.zeta_bar = k >= 2 ? defense::avg_logit_distance(logits) : 0.0;
            defense::PenaltyCoeffs coeffs = choice.coeffs;
            if (choice.auto_b) {
                if (!state.has_calibrated_b && rec.zeta_bar > 0.0) {
                    const double target = coeffs.gamma_min / coeffs.a;
                    state.calibrated_b = (coeffs.base == defense::LogBase::Natural
                                              ? std::exp(target)
                                              : std::pow(10.0, target)) /
                                         rec.zeta_bar;
                    state.has_calibrated_b = true;
                }
                if (state.has_calibrated_b) coeffs.b = state.calibrated_b;
            }
            rec.gamma = defense::penalty(rec.zeta_bar, coeffs);
            rec.threshold = defense::threshold(rec.global_acc, rec.gamma);
            try {
                auto agg = defense::usdfl_aggregate(submitted, sizes, accs, rec.threshold);
                next_global = std::move(agg.params);
                rec.perceived_adversaries = flag_ids(agg.flagged);
                rec.kept = flag_ids(agg.kept);
            } catch (const AllFilteredError&) {
                next_global = state.global;
                rec.aggregation_fallback = true;
                rec.perceived_adversaries = kept_complement({});
            }
            break;
        }
        case DefenseKind::Dusdfl: {
            rec.zeta_bar = k >= 2 ? defense::weighted_avg_logit_distance(logits, times) : 0.0;
            defense::PenaltyCoeffs coeffs = choice.coeffs;
            if (choice.auto_b) {
                if (!state.has_calibrated_b && rec.zeta_bar > 0.0) {
                    const double target = coeffs.gamma_min / coeffs.a;
                    state.calibrated_b = (coeffs.base == defense::LogBase::Natural
                                              ? std::exp(target)
                                              : std::pow(10.0, target)) /
                                         rec.zeta_bar;
                    state.has_calibrated_b = true;
                }
                if (state.has_calibrated_b) coeffs.b = state.calibrated_b;
            }
            rec.gamma = defense::penalty(rec.zeta_bar, coeffs);
            const int t_max = *std::max_element(times.begin(), times.end());
            rec.thresholds.resize(k);
            for (std::size_t i = 0; i < k; ++i) {
                rec.thresholds[i] = defense::personalized_threshold(rec.global_acc, rec.gamma,
                                                                    times[i], t_max,
                                                                    choice.gamma_new);
            }
            rec.threshold = std::accumulate(rec.thresholds.begin(), rec.thresholds.end(), 0.0) /
                            static_cast<double>(k);
            try {
                auto agg = defense::dusdfl_aggregate(submitted, sizes, accs, rec.thresholds);
                next_global = std::move(agg.params);
                rec.perceived_adversaries = flag_ids(agg.flagged);
                rec.kept = flag_ids(agg.kept);
            } catch (const AllFilteredError&) {
                next_global = state.global;
                rec.aggregation_fallback = true;
                rec.perceived_adversaries = kept_complement({});
            }
            break;
        }
        case DefenseKind::Median:
            if (!baseline_active) {
                next_global = fedavg(submitted, sizes, unit_alphas);
                rec.kept = kept_complement({});
            } else {
                next_global = defense::median_aggregate(submitted);
                rec.defense_scores = defense::median_selection_fraction(submitted);
                const auto flagged =
                    flagged_below(rec.defense_scores, 1.0 / static_cast<double>(k));
                rec.perceived_adversaries = flag_ids(flagged);
                rec.kept = kept_complement(rec.perceived_adversaries);
            }
            break;
        case DefenseKind::Trimmed:
            if (!baseline_active) {
                next_global = fedavg(submitted, sizes, unit_alphas);
                rec.kept = kept_complement({});
            } else {
                next_global = defense::trimmed_aggregate(submitted, choice.z);
                rec.defense_scores = defense::trimmed_exclusion_fraction(submitted, choice.z);
                const auto flagged = flagged_above(rec.defense_scores, 0.5);
                rec.perceived_adversaries = flag_ids(flagged);
                rec.kept = kept_complement(rec.perceived_adversaries);
            }
            break;
        case DefenseKind::UnionMedian:
        case DefenseKind::UnionTrimmed:
            if (!baseline_active) {
                next_global = fedavg(submitted, sizes, unit_alphas);
                rec.kept = kept_complement({});
            } else {
                const auto inner = choice.kind == DefenseKind::UnionMedian
                                       ? defense::InnerRule::Median
                                       : defense::InnerRule::Trimmed;
                auto agg = defense::union_aggregate(submitted, sizes, state.reserve, choice.z, inner);
                next_global = std::move(agg.params);
                rec.perceived_adversaries = flag_ids(agg.dropped);
                rec.kept = kept_complement(rec.perceived_adversaries);
            }
            break;
    }

    if (options.record_wasserstein && k >= 2)
        rec.wasserstein = defense::pairwise_distance_matrix(logits);
    if (options.record_submitted) {
        for (const auto& p : submitted) rec.submitted_flat.push_back(p.flatten());
        rec.aggregate_flat = next_global.flatten();
    }

    if (options.testset != nullptr) rec.test_acc = neural::accuracy(next_global, *options.testset);

    state.global = std::move(next_global);
    for (auto& dev : state.devices) dev.local_params = state.global;
    state.round = round + 1;

    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return rec;
}

void apply_dynamics(NetworkState& state, int round, const DynamicsSpec& dynamics,
                    const EntrantSource& source) {
    if (dynamics.churn < 0.0 || dynamics.churn > 1.0)
        throw ConfigError("churn fraction must be in [0, 1]");
    for (auto& dev : state.devices) dev.time_in_network += 1;

    const bool churn_now = dynamics.period > 0 && dynamics.churn > 0.0 && round > 0 &&
                           round % dynamics.period == 0;
    if (!churn_now) return;

    const std::size_t k = state.devices.size();
    const std::size_t leaving = static_cast<std::size_t>(
        std::ceil(dynamics.churn * static_cast<double>(k)));
    if (leaving == 0) return;

    RngStream dyn = RngStream(state.seed_key)
                        .fork(streams::kDynamics)
                        .fork(static_cast<std::uint64_t>(round));
    std::vector<std::size_t> idx(k);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    dyn.shuffle(idx);
    idx.resize(leaving);
    std::sort(idx.begin(), idx.end(), std::greater<>());
    for (const std::size_t i : idx)
        state.devices.erase(state.devices.begin() + static_cast<std::ptrdiff_t>(i));

    RngStream data_stream = dyn.fork(1);
    RngStream part_stream = dyn.fork(2);
    RngStream role_stream = dyn.fork(3);
    for (std::size_t e = 0; e < leaving; ++e) {
        // Fresh non-i.i.d. shard: a one-device partition over freshly
        // synthesized data, so reserve disjointness is preserved.
        sigsyn::DatasetSpec spec = source.dataset_spec;
        const double need = std::max(source.qty_mean + 6.0 * source.qty_std,
                                     static_cast<double>(source.labels_per_device));
        spec.per_class = static_cast<int>(std::ceil(
            need / static_cast<double>(spec.schemes.size() * spec.snrs_db.size()))) + 1;
        sigsyn::LabeledDataset pool = sigsyn::build_dataset(spec, data_stream);
        auto shards = partition_noniid(pool, 1, source.labels_per_device, source.qty_mean,
                                       source.qty_std, part_stream);

        DeviceState dev;
        dev.id = state.next_device_id++;
        dev.data = std::move(shards.front());
        dev.is_adversary = role_stream.uniform01() < source.adversary_fraction;
        dev.attack = source.attack;
        dev.alpha = dev.is_adversary ? source.alpha : 1.0;
        dev.time_in_network = 1;
        dev.local_params = state.global;
        state.devices.push_back(std::move(dev));
    }
    std::sort(state.devices.begin(), state.devices.end(),
              [](const DeviceState& a, const DeviceState& b) { return a.id < b.id; });
}

}  // namespace fedsc::fedsim
