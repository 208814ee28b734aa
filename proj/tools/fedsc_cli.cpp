#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "fedsc/attacks.hpp"
#include "fedsc/config.hpp"
#include "fedsc/defense.hpp"
#include "fedsc/errors.hpp"
#include "fedsc/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw fedsc::IoError("cannot open config: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fedsc::harness::ExperimentConfig load_config(const std::string& path, std::uint64_t* seed,
                                             const std::string& out_dir, int threads) {
    fedsc::harness::ExperimentConfig cfg =
        path.empty() ? fedsc::harness::parse_config("{}")
                     : fedsc::harness::parse_config(read_file(path));
    if (seed != nullptr) cfg.seeds = {*seed};
    if (!out_dir.empty()) cfg.output.dir = out_dir;
    if (threads > 0) cfg.threads = threads;
    return cfg;
}

int run_selftest() {
    using namespace fedsc;
    int failures = 0;
    auto check = [&](bool ok, const std::string& name) {
        std::printf("[%s] %s\n", ok ? "PASS" : "FAIL", name.c_str());
        if (!ok) ++failures;
    };

    // Sorted Wasserstein against the explicit permutation minimum.
    {
        RngStream rng(7);
        bool ok = true;
        for (int trial = 0; trial < 50 && ok; ++trial) {
            const std::size_t n = 1 + rng.below(5);
            std::vector<double> p(n), q(n);
            for (auto& v : p) v = rng.uniform(-2.0, 2.0);
            for (auto& v : q) v = rng.uniform(-2.0, 2.0);
            ok = std::abs(defense::wasserstein1(p, q) - defense::wasserstein1_bruteforce(p, q)) <
                 1e-9;
        }
        check(ok, "wasserstein1 matches brute force");
    }
    // Dataset determinism.
    {
        sigsyn::DatasetSpec spec;
        spec.per_class = 3;
        RngStream a(11), b(11);
        const auto da = sigsyn::build_dataset(spec, a);
        const auto db = sigsyn::build_dataset(spec, b);
        bool ok = da.size() == db.size();
        for (std::size_t i = 0; ok && i < da.size(); ++i) ok = da.samples[i].iq == db.samples[i].iq;
        check(ok, "dataset synthesis is seed deterministic");
    }
    // Energy normalization.
    {
        sigsyn::DatasetSpec spec;
        spec.per_class = 2;
        RngStream rng(13);
        const auto ds = sigsyn::build_dataset(spec, rng);
        bool ok = true;
        for (const auto& s : ds.samples) ok = ok && std::abs(s.energy() - 1.0) < 1e-9;
        check(ok, "every sample is unit energy");
    }
    // PGD with one iteration reduces to FGSM.
    {
        RngStream rng(17);
        neural::ArchSpec arch;
        arch.input_dim = 16;
        arch.hidden = {8};
        arch.output_dim = 4;
        auto model = neural::init_model(arch, rng);
        sigsyn::SignalSample s;
        s.iq.resize(16);
        for (auto& v : s.iq) v = rng.normal();
        s.label = 1;
        const auto a = attacks::fgsm(model, s, 1, 0.25);
        const auto b = attacks::pgd(model, s, 1, 0.25, 1);
        bool ok = true;
        for (std::size_t i = 0; i < a.delta.size(); ++i)
            ok = ok && std::abs(a.delta[i] - b.delta[i]) < 1e-12;
        check(ok, "pgd(Q=1) equals fgsm");
    }
    std::printf("%s\n", failures == 0 ? "selftest passed" : "selftest FAILED");
    return failures == 0 ? kExitOk : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Config-driven simulator for attack and defense studies in federated "
                 "signal classification"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed_value = 0;
    bool seed_given = false;
    int threads = 0;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON experiment configuration");
        cmd->add_option("--out", out_dir, "output directory override");
        cmd->add_option("--seed", seed_value, "single-seed override")
            ->each([&](const std::string&) { seed_given = true; });
        cmd->add_option("--threads", threads, "worker threads for device training");
    };

    CLI::App* cmd_run = app.add_subcommand("run", "run one experiment");
    add_common(cmd_run);
    CLI::App* cmd_sweep = app.add_subcommand("sweep", "run the sweep axis in the config");
    add_common(cmd_sweep);
    CLI::App* cmd_theory = app.add_subcommand("verify-theory", "convex-surrogate bound checks");
    add_common(cmd_theory);
    int theory_rounds = 50;
    int theory_shard = 160;
    double theory_lambda = 0.01;
    cmd_theory->add_option("--rounds", theory_rounds, "trajectory length");
    cmd_theory->add_option("--shard-size", theory_shard, "per-device samples");
    cmd_theory->add_option("--lambda", theory_lambda, "L2 coefficient (mu)");
    CLI::App* cmd_selftest = app.add_subcommand("selftest", "quick internal consistency checks");

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_selftest->parsed()) return run_selftest();

        if (cmd_run->parsed()) {
            const auto cfg =
                load_config(config_path, seed_given ? &seed_value : nullptr, out_dir, threads);
            const auto bundle = fedsc::harness::run_experiment(cfg);
            std::printf("runs: %zu  mean final test acc: %.4f  mean FP rate: %.2f%%\n",
                        bundle.runs.size(), bundle.mean_final_test_acc, bundle.mean_fp_rate);
            std::printf("results written to %s\n", cfg.output.dir.c_str());
            return kExitOk;
        }
        if (cmd_sweep->parsed()) {
            const auto cfg =
                load_config(config_path, seed_given ? &seed_value : nullptr, out_dir, threads);
            const auto sweep = fedsc::harness::run_sweep(cfg);
            int ok_points = 0;
            for (const auto& p : sweep.points) ok_points += p.ok ? 1 : 0;
            std::printf("sweep over %s: %d/%zu points ok, nondecreasing=%d\n", sweep.axis.c_str(),
                        ok_points, sweep.points.size(), sweep.nondecreasing ? 1 : 0);
            std::printf("results written to %s\n", cfg.output.dir.c_str());
            return kExitOk;
        }
        if (cmd_theory->parsed()) {
            fedsc::harness::TheoryStudyConfig tc;
            tc.rounds = theory_rounds;
            tc.shard_size = theory_shard;
            tc.lambda = theory_lambda;
            if (seed_given) tc.seed = seed_value;
            const std::string dir = out_dir.empty() ? "out" : out_dir;
            const auto report = fedsc::harness::run_theory_study(tc);
            std::filesystem::create_directories(dir);
            std::ofstream out(dir + "/theory_report.json", std::ios::trunc);
            out << fedsc::harness::theory_report_json(report).dump(2) << '\n';
            std::printf("rho=%.4f mu=%.4g lemma_all_hold=%d gap_hold_rate=%.3f "
                        "e-shrink ratio=%.3f (within=%d)\n",
                        report.rho, report.mu, report.lemma_all_hold ? 1 : 0,
                        report.gap_hold_rate, report.error_bound.ratio,
                        report.error_bound.within ? 1 : 0);
            if (!report.gap_checked)
                std::printf("warning: mu = 0, optimality-gap checks skipped\n");
            std::printf("report written to %s/theory_report.json\n", dir.c_str());
            return kExitOk;
        }
    } catch (const fedsc::ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    } catch (const fedsc::ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    } catch (const fedsc::ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "runtime failure: %s\n", e.what());
        return kExitRuntime;
    }
    return kExitOk;
}
