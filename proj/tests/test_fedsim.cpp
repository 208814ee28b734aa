#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "fedsc/errors.hpp"
#include "fedsc/fedsim.hpp"
#include "fedsc/rng.hpp"

using namespace fedsc;
using namespace fedsc::fedsim;

namespace {

sigsyn::LabeledDataset balanced_dataset(int per_class, std::uint64_t seed) {
    sigsyn::DatasetSpec spec;
    spec.schemes = {sigsyn::Scheme::Bpsk, sigsyn::Scheme::Qpsk, sigsyn::Scheme::Pam4,
                    sigsyn::Scheme::Qam16};
    spec.per_class = per_class;
    spec.snrs_db = {10.0};
    spec.length = 16;
    RngStream rng(seed);
    return sigsyn::build_dataset(spec, rng);
}

neural::ModelParams scalar_model(double v) {
    neural::ArchSpec arch;
    arch.input_dim = 1;
    arch.hidden = {};
    arch.output_dim = 1;
    neural::ModelParams m = neural::zero_model(arch);
    m.assign_flat({v, 0.0});
    return m;
}

NetworkState tiny_network(int devices, int adversaries, const attacks::AttackSpec& attack,
                          std::uint64_t seed) {
    NetworkState state;
    state.seed_key = seed;
    state.next_device_id = devices;

    sigsyn::LabeledDataset train = balanced_dataset(devices * 10, seed + 101);
    RngStream part(seed + 5);
    auto shards = partition_iid(train, devices, part);

    RngStream reserve_rng(seed + 7);
    sigsyn::DatasetSpec rspec;
    rspec.schemes = {sigsyn::Scheme::Bpsk, sigsyn::Scheme::Qpsk, sigsyn::Scheme::Pam4,
                     sigsyn::Scheme::Qam16};
    rspec.per_class = 10;
    rspec.snrs_db = {10.0};
    rspec.length = 16;
    state.reserve = sigsyn::build_dataset(rspec, reserve_rng);

    neural::ArchSpec arch;
    arch.input_dim = 32;
    arch.hidden = {16};
    arch.output_dim = 4;
    RngStream init(seed + 9);
    state.global = neural::init_model(arch, init);

    for (int i = 0; i < devices; ++i) {
        DeviceState dev;
        dev.id = i;
        dev.data = std::move(shards[static_cast<std::size_t>(i)]);
        dev.is_adversary = i < adversaries;
        dev.attack = attack;
        dev.local_params = state.global;
        state.devices.push_back(std::move(dev));
    }
    return state;
}

}  // namespace

TEST_CASE("partition_iid") {
    SUBCASE("a single device receives the whole dataset") {
        const auto ds = balanced_dataset(5, 1);
        RngStream rng(2);
        const auto shards = partition_iid(ds, 1, rng);
        REQUIRE(shards.size() == 1);
        CHECK(shards[0].size() == ds.size());
    }
    SUBCASE("shards form a disjoint cover with near-equal sizes") {
        const auto ds = balanced_dataset(25, 3);  // 100 samples
        RngStream rng(4);
        const auto shards = partition_iid(ds, 7, rng);
        std::size_t total = 0;
        for (const auto& s : shards) {
            total += s.size();
            CHECK(s.size() >= 100 / 7);
            CHECK(s.size() <= 100 / 7 + 1);
        }
        CHECK(total == ds.size());
        // Multiset equality with the source: count by quantized first entry.
        std::map<long long, int> src, dst;
        for (const auto& s : ds.samples) src[llround(s.iq[0] * 1e12)]++;
        for (const auto& shard : shards) {
            for (const auto& s : shard.samples) dst[llround(s.iq[0] * 1e12)]++;
        }
        CHECK(src == dst);
    }
    SUBCASE("10 devices over 1600 balanced samples: 160 each, classes 20 +/- 8") {
        sigsyn::DatasetSpec spec;  // 8 schemes x 100 x 2 SNRs
        RngStream data_rng(5);
        const auto ds = sigsyn::build_dataset(spec, data_rng);
        RngStream rng(6);
        const auto shards = partition_iid(ds, 10, rng);
        for (const auto& shard : shards) {
            REQUIRE(shard.size() == 160);
            std::map<int, int> hist;
            for (const auto& s : shard.samples) hist[s.label]++;
            for (int c = 0; c < 8; ++c) {
                CHECK(hist[c] >= 12);
                CHECK(hist[c] <= 28);
            }
        }
    }
    SUBCASE("invalid device counts are rejected") {
        const auto ds = balanced_dataset(2, 7);
        RngStream rng(8);
        CHECK_THROWS_AS(partition_iid(ds, 0, rng), ConfigError);
    }
}

TEST_CASE("partition_noniid") {
    SUBCASE("L = C with zero std degenerates to equal shards") {
        const auto ds = balanced_dataset(30, 9);  // 120 samples
        RngStream rng(10);
        const auto shards = partition_noniid(ds, 4, 4, 30.0, 0.0, rng);
        for (const auto& s : shards) CHECK(s.size() == 30);
    }
    SUBCASE("each shard holds exactly L distinct classes") {
        const auto ds = balanced_dataset(50, 11);
        RngStream rng(12);
        const auto shards = partition_noniid(ds, 4, 2, 40.0, 2.0, rng);
        for (const auto& shard : shards) {
            std::set<int> classes;
            for (const auto& s : shard.samples) classes.insert(s.label);
            CHECK(classes.size() == 2);
        }
    }
    SUBCASE("desk-scale sizes stay within the 3-sigma band") {
        sigsyn::DatasetSpec spec;  // 1600 samples, 8 classes
        spec.per_class = 400;      // 6400 total so the demand is feasible
        RngStream data_rng(13);
        const auto ds = sigsyn::build_dataset(spec, data_rng);
        RngStream rng(14);
        const auto shards = partition_noniid(ds, 10, 5, 450.0, 4.5, rng);
        for (const auto& shard : shards) {
            CHECK(shard.size() >= 435);
            CHECK(shard.size() <= 465);
        }
    }
    SUBCASE("shards are pairwise disjoint draws") {
        const auto ds = balanced_dataset(40, 15);
        RngStream rng(16);
        const auto shards = partition_noniid(ds, 3, 2, 30.0, 1.0, rng);
        std::size_t total = 0;
        for (const auto& s : shards) total += s.size();
        CHECK(total <= ds.size());
    }
    SUBCASE("infeasible label demand is rejected") {
        const auto ds = balanced_dataset(5, 17);
        RngStream rng(18);
        CHECK_THROWS_AS(partition_noniid(ds, 2, 9, 10.0, 0.0, rng), ConfigError);
    }
}

TEST_CASE("fedavg") {
    SUBCASE("equal sizes average to the midpoint") {
        neural::ArchSpec arch;
        arch.input_dim = 1;
        arch.hidden = {};
        arch.output_dim = 2;
        neural::ModelParams a = neural::zero_model(arch);
        a.assign_flat({0.0, 2.0, 0.0, 0.0});
        neural::ModelParams b = neural::zero_model(arch);
        b.assign_flat({2.0, 0.0, 0.0, 0.0});
        const auto avg = fedavg({a, b}, {5, 5}, {1.0, 1.0}).flatten();
        CHECK(avg[0] == doctest::Approx(1.0));
        CHECK(avg[1] == doctest::Approx(1.0));
    }
    SUBCASE("a device holding all data dominates") {
        const auto avg =
            fedavg({scalar_model(3.0), scalar_model(5.0)}, {0, 10}, {1.0, 1.0}).flatten();
        CHECK(avg[0] == doctest::Approx(5.0));
    }
    SUBCASE("worked weighted mean") {
        // (10*3 + 20*6 + 30*9) / 60 = 420 / 60
        const auto avg = fedavg({scalar_model(3.0), scalar_model(6.0), scalar_model(9.0)},
                                {10, 20, 30}, {1.0, 1.0, 1.0})
                             .flatten();
        CHECK(avg[0] == doctest::Approx(7.0).epsilon(1e-12));
    }
    SUBCASE("alpha scales a device's contribution") {
        const auto avg =
            fedavg({scalar_model(4.0), scalar_model(4.0)}, {1, 1}, {1.0, 2.0}).flatten();
        CHECK(avg[0] == doctest::Approx(6.0));
    }
    SUBCASE("shape mismatch is rejected") {
        neural::ArchSpec arch;
        arch.input_dim = 2;
        arch.hidden = {};
        arch.output_dim = 1;
        CHECK_THROWS_AS(fedavg({scalar_model(1.0), neural::zero_model(arch)}, {1, 1}, {1.0, 1.0}),
                        DimensionError);
    }
}

TEST_CASE("run_round") {
    attacks::AttackSpec no_attack;
    no_attack.kind = attacks::Kind::None;

    SUBCASE("defense none with zero adversaries equals plain FedAvg") {
        NetworkState state = tiny_network(4, 0, no_attack, 21);
        RoundOptions opts;
        opts.defense.kind = DefenseKind::None;
        opts.train = TrainOptions{0.05, 8, 1, 1};
        opts.record_submitted = true;
        const RoundRecord rec = run_round(state, opts);

        std::vector<double> expected(rec.submitted_flat.front().size(), 0.0);
        double total = 0.0;
        for (const auto& dev : state.devices) total += static_cast<double>(dev.data.size());
        for (std::size_t k = 0; k < rec.submitted_flat.size(); ++k) {
            const double w =
                static_cast<double>(state.devices[k].data.size()) / total;
            for (std::size_t i = 0; i < expected.size(); ++i)
                expected[i] += w * rec.submitted_flat[k][i];
        }
        REQUIRE(rec.aggregate_flat.size() == expected.size());
        for (std::size_t i = 0; i < expected.size(); ++i)
            CHECK(std::abs(rec.aggregate_flat[i] - expected[i]) <= 1e-12);
    }
    SUBCASE("same seed gives a bit-identical round") {
        attacks::AttackSpec pgd;
        pgd.kind = attacks::Kind::Pgd;
        pgd.start_round = 0;
        pgd.pnr_db = 8.0;
        pgd.pgd_iters = 2;

        RoundOptions opts;
        opts.defense.kind = DefenseKind::Usdfl;
        opts.train = TrainOptions{0.05, 8, 1, 1};
        opts.record_submitted = true;

        NetworkState a = tiny_network(4, 1, pgd, 22);
        NetworkState b = tiny_network(4, 1, pgd, 22);
        const RoundRecord ra = run_round(a, opts);
        const RoundRecord rb = run_round(b, opts);
        CHECK(ra.device_acc == rb.device_acc);
        CHECK(ra.zeta_bar == rb.zeta_bar);
        CHECK(ra.aggregate_flat == rb.aggregate_flat);
        CHECK(ra.perceived_adversaries == rb.perceived_adversaries);
    }
    SUBCASE("serial and threaded execution agree bitwise") {
        attacks::AttackSpec fgsm;
        fgsm.kind = attacks::Kind::Fgsm;
        fgsm.start_round = 0;

        RoundOptions serial;
        serial.defense.kind = DefenseKind::Usdfl;
        serial.train = TrainOptions{0.05, 8, 1, 1};
        serial.record_submitted = true;
        RoundOptions threaded = serial;
        threaded.train.threads = 4;

        NetworkState a = tiny_network(6, 2, fgsm, 23);
        NetworkState b = tiny_network(6, 2, fgsm, 23);
        const RoundRecord ra = run_round(a, serial);
        const RoundRecord rb = run_round(b, threaded);
        CHECK(ra.aggregate_flat == rb.aggregate_flat);
        CHECK(ra.device_acc == rb.device_acc);
    }
    SUBCASE("the round synchronizes every device to the new global model") {
        NetworkState state = tiny_network(3, 0, no_attack, 24);
        RoundOptions opts;
        opts.defense.kind = DefenseKind::None;
        opts.train = TrainOptions{0.05, 8, 1, 1};
        run_round(state, opts);
        const auto global_flat = state.global.flatten();
        for (const auto& dev : state.devices) CHECK(dev.local_params.flatten() == global_flat);
        CHECK(state.round == 1);
    }
    SUBCASE("adversaries poison only from their start round") {
        attacks::AttackSpec pgd;
        pgd.kind = attacks::Kind::Pgd;
        pgd.start_round = 5;

        NetworkState state = tiny_network(3, 1, pgd, 25);
        RoundOptions opts;
        opts.defense.kind = DefenseKind::None;
        opts.train = TrainOptions{0.05, 8, 1, 1};
        const RoundRecord rec = run_round(state, opts);  // round 0 < start
        CHECK(rec.attack_audit.empty());
    }
}

TEST_CASE("apply_dynamics") {
    attacks::AttackSpec no_attack;
    no_attack.kind = attacks::Kind::None;
    EntrantSource source;
    source.dataset_spec.schemes = {sigsyn::Scheme::Bpsk, sigsyn::Scheme::Qpsk,
                                   sigsyn::Scheme::Pam4, sigsyn::Scheme::Qam16};
    source.dataset_spec.snrs_db = {10.0};
    source.dataset_spec.length = 16;
    source.labels_per_device = 2;
    source.qty_mean = 20.0;
    source.qty_std = 1.0;

    SUBCASE("zero churn only advances time-in-network") {
        NetworkState state = tiny_network(5, 0, no_attack, 26);
        const auto ids_before = [&] {
            std::vector<int> ids;
            for (const auto& d : state.devices) ids.push_back(d.id);
            return ids;
        }();
        apply_dynamics(state, 10, DynamicsSpec{10, 0.0}, source);
        std::vector<int> ids_after;
        for (const auto& d : state.devices) {
            ids_after.push_back(d.id);
            CHECK(d.time_in_network == 2);
        }
        CHECK(ids_after == ids_before);
    }
    SUBCASE("30 percent churn at the period swaps three of ten devices") {
        NetworkState state = tiny_network(10, 0, no_attack, 27);
        apply_dynamics(state, 10, DynamicsSpec{10, 0.3}, source);
        CHECK(state.devices.size() == 10);
        int entered = 0, survived = 0;
        for (const auto& d : state.devices) {
            if (d.id >= 10) {
                ++entered;
                CHECK(d.time_in_network == 1);
                std::set<int> classes;
                for (const auto& s : d.data.samples) classes.insert(s.label);
                CHECK(classes.size() == 2);
            } else {
                ++survived;
                CHECK(d.time_in_network == 2);
            }
        }
        CHECK(entered == 3);
        CHECK(survived == 7);
    }
    SUBCASE("no churn off the period multiple") {
        NetworkState state = tiny_network(10, 0, no_attack, 28);
        apply_dynamics(state, 7, DynamicsSpec{10, 0.3}, source);
        for (const auto& d : state.devices) CHECK(d.id < 10);
    }
}
