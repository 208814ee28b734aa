#include "fedsc/attacks.hpp"

#include <cmath>

#include "fedsc/errors.hpp"

namespace fedsc::attacks {
namespace {

constexpr double kDegenerateNorm = 1e-15;

double l2_norm(const std::vector<double>& v) {
    double acc = 0.0;
    for (const double x : v) acc += x * x;
    return std::sqrt(acc);
}

}  // namespace

Kind kind_from_name(const std::string& name) {
    if (name == "none") return Kind::None;
    if (name == "awgn") return Kind::Awgn;
    if (name == "flip") return Kind::Flip;
    if (name == "fgsm") return Kind::Fgsm;
    if (name == "pgd") return Kind::Pgd;
    throw ConfigError("unknown attack kind: " + name);
}

std::string kind_name(Kind kind) {
    switch (kind) {
        case Kind::None: return "none";
        case Kind::Awgn: return "awgn";
        case Kind::Flip: return "flip";
        case Kind::Fgsm: return "fgsm";
        case Kind::Pgd: return "pgd";
    }
    return "?";
}

double Perturbation::norm2() const { return l2_norm(delta); }

Perturbation fgsm(const neural::ModelParams& params, const sigsyn::SignalSample& sample,
                  int label, double power) {
    if (power <= 0.0) throw ConfigError("fgsm needs a positive power budget");
    std::vector<double> g = neural::input_gradient(params, sample.iq, label);
    const double n = l2_norm(g);
    if (n < kDegenerateNorm) throw DegenerateGradientError("zero input gradient");
    const double scale = std::sqrt(power) / n;
    for (auto& v : g) v *= scale;
    return Perturbation{std::move(g)};
}

Perturbation pgd(const neural::ModelParams& params, const sigsyn::SignalSample& sample,
                 int label, double power, int iters) {
    if (power <= 0.0) throw ConfigError("pgd needs a positive power budget");
    if (iters < 1) throw ConfigError("pgd needs at least one iteration");
    const double alpha = std::sqrt(power) / static_cast<double>(iters);
    std::vector<double> delta(sample.iq.size(), 0.0);
    std::vector<double> point(sample.iq.size());
    for (int q = 0; q < iters; ++q) {
        for (std::size_t i = 0; i < point.size(); ++i) point[i] = sample.iq[i] + delta[i];
        std::vector<double> g = neural::input_gradient(params, point, label);
        const double n = l2_norm(g);
        if (n < kDegenerateNorm) break;
        const double scale = alpha / n;
        for (std::size_t i = 0; i < delta.size(); ++i) delta[i] += scale * g[i];
    }
    return Perturbation{std::move(delta)};
}

Perturbation awgn_perturb(const sigsyn::SignalSample& sample, double power, RngStream& rng) {
    if (power < 0.0) throw ConfigError("awgn power must be non-negative");
    std::vector<double> delta(sample.iq.size(), 0.0);
    if (power > 0.0) {
        const double std_dev = std::sqrt(power / static_cast<double>(sample.iq.size()));
        for (auto& v : delta) v = rng.normal(0.0, std_dev);
    }
    return Perturbation{std::move(delta)};
}

std::vector<int> derangement(int classes, RngStream& rng) {
    if (classes < 2) throw ConfigError("a derangement needs at least two classes");
    // Sattolo's algorithm yields a uniformly random single cycle, which never
    // maps an element to itself.
    std::vector<int> perm(static_cast<std::size_t>(classes));
    for (int i = 0; i < classes; ++i) perm[static_cast<std::size_t>(i)] = i;
    for (std::size_t i = perm.size() - 1; i > 0; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.below(i));
        std::swap(perm[i], perm[j]);
    }
    return perm;
}

sigsyn::LabeledDataset label_flip(const sigsyn::LabeledDataset& dataset, RngStream& rng) {
    const std::vector<int> perm = derangement(dataset.class_count, rng);
    sigsyn::LabeledDataset out = dataset;
    for (auto& s : out.samples) s.label = perm[static_cast<std::size_t>(s.label)];
    return out;
}

PoisonResult poison_local_dataset(const sigsyn::LabeledDataset& data,
                                  const neural::ModelParams& global_params,
                                  const AttackSpec& spec, int round, RngStream& rng,
                                  RngStream stable_rng) {
    PoisonResult res;
    res.dataset = data;
    if (spec.kind == Kind::None || round < spec.start_round) return res;

    Kind kind = spec.kind;
    double pnr = spec.pnr_db;
    if (spec.schedule == Schedule::RandomPerRound) {
        static const Kind kinds[3] = {Kind::Pgd, Kind::Fgsm, Kind::Awgn};
        static const double powers[3] = {8.0, 4.0, 0.0};
        kind = kinds[rng.below(3)];
        pnr = powers[rng.below(3)];
    }
    res.applied_kind = kind;
    res.applied_pnr_db = pnr;

    if (kind == Kind::Flip) {
        if (!spec.flip_map.empty()) {
            if (spec.flip_map.size() != static_cast<std::size_t>(data.class_count))
                throw ConfigError("flip_map must cover every class");
            for (auto& s : res.dataset.samples)
                s.label = spec.flip_map[static_cast<std::size_t>(s.label)];
        } else {
            // The derangement comes from the stable stream: one consistent
            // wrong mapping per device, not a fresh one each round.
            res.dataset = label_flip(data, stable_rng);
        }
        return res;
    }

    for (auto& s : res.dataset.samples) {
        const double power = sigsyn::perturbation_power_for_pnr(pnr, s.snr_db, s);
        if (power <= 0.0) continue;
        Perturbation p;
        switch (kind) {
            case Kind::Awgn: p = awgn_perturb(s, power, rng); break;
            case Kind::Pgd: p = pgd(global_params, s, s.label, power, spec.pgd_iters); break;
            case Kind::Fgsm:
                try {
                    p = fgsm(global_params, s, s.label, power);
                } catch (const DegenerateGradientError&) {
                    p = awgn_perturb(s, power, rng);
                    ++res.fallback_count;
                }
                break;
            default: throw ConfigError("unsupported poisoning kind");
        }
        for (std::size_t i = 0; i < s.iq.size(); ++i) s.iq[i] += p.delta[i];
    }
    return res;
}

}  // namespace fedsc::attacks
