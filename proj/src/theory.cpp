#include "fedsc/theory.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "fedsc/errors.hpp"

namespace fedsc::theory {
namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double norm2(const std::vector<double>& v) { return std::sqrt(dot(v, v)); }

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    return v[(v.size() - 1) / 2];
}

}  // namespace

FlatDataset flatten_dataset(const sigsyn::LabeledDataset& dataset) {
    FlatDataset out;
    out.classes = static_cast<std::size_t>(dataset.class_count);
    out.x.reserve(dataset.size());
    out.y.reserve(dataset.size());
    for (const auto& s : dataset.samples) {
        out.x.push_back(s.iq);
        out.y.push_back(s.label);
    }
    return out;
}

LossFn softmax_regression_loss(const FlatDataset& data_in, double lambda) {
    if (data_in.size() == 0) throw EmptyDatasetError("surrogate loss needs data");
    if (lambda < 0.0) throw ConfigError("lambda must be non-negative");
    const auto data = std::make_shared<const FlatDataset>(data_in);
    const std::size_t d = data->x.front().size();
    const std::size_t c = data->classes;
    const std::size_t dim = c * (d + 1);

    // Shared forward pass: probabilities for one example.
    auto probs = [c, d](const std::vector<double>& w, const std::vector<double>& x) {
        std::vector<double> logits(c);
        for (std::size_t j = 0; j < c; ++j) {
            const double* row = w.data() + j * d;
            double acc = w[c * d + j];  // bias block sits after the weights
            for (std::size_t i = 0; i < d; ++i) acc += row[i] * x[i];
            logits[j] = acc;
        }
        const double m = *std::max_element(logits.begin(), logits.end());
        double sum = 0.0;
        for (auto& v : logits) {
            v = std::exp(v - m);
            sum += v;
        }
        for (auto& v : logits) v /= sum;
        return logits;
    };

    LossFn fn;
    fn.dim = dim;
    fn.convex = true;
    fn.mu = lambda;
    // The ridge term covers the whole parameter vector (biases included) so
    // lambda is a genuine strong-convexity modulus.
    fn.value = [data, probs, lambda, dim](const std::vector<double>& w) {
        double loss = 0.0;
        const double inv_n = 1.0 / static_cast<double>(data->size());
        for (std::size_t n = 0; n < data->size(); ++n) {
            const auto p = probs(w, data->x[n]);
            loss += -std::log(std::max(p[static_cast<std::size_t>(data->y[n])], 1e-300)) * inv_n;
        }
        double reg = 0.0;
        for (std::size_t i = 0; i < dim; ++i) reg += w[i] * w[i];
        return loss + 0.5 * lambda * reg;
    };
    fn.grad = [data, probs, lambda, c, d, dim](const std::vector<double>& w) {
        std::vector<double> g(dim, 0.0);
        const double inv_n = 1.0 / static_cast<double>(data->size());
        for (std::size_t n = 0; n < data->size(); ++n) {
            auto p = probs(w, data->x[n]);
            p[static_cast<std::size_t>(data->y[n])] -= 1.0;
            for (std::size_t j = 0; j < c; ++j) {
                const double coef = p[j] * inv_n;
                double* row = g.data() + j * d;
                const auto& x = data->x[n];
                for (std::size_t i = 0; i < d; ++i) row[i] += coef * x[i];
                g[c * d + j] += coef;
            }
        }
        for (std::size_t i = 0; i < dim; ++i) g[i] += lambda * w[i];
        return g;
    };
    return fn;
}

LossFn quadratic_loss(std::size_t dim) {
    LossFn fn;
    fn.dim = dim;
    fn.convex = true;
    fn.mu = 1.0;
    fn.value = [](const std::vector<double>& w) {
        double acc = 0.0;
        for (const double v : w) acc += v * v;
        return 0.5 * acc;
    };
    fn.grad = [](const std::vector<double>& w) { return w; };
    return fn;
}

SmoothnessEstimate estimate_smoothness(const LossFn& loss, int sample_pairs, RngStream& rng) {
    if (!loss.convex)
        throw SurrogateRequiredError("smoothness checks require the convex surrogate");
    if (sample_pairs < 1) throw ConfigError("need at least one sampled pair");
    // Each sampled pair is (w, w + eps v): a gradient-difference secant. The
    // directions follow a power iteration on the local Hessian, so the max
    // ratio climbs to the operator norm instead of the average curvature a
    // random direction would see. Base points start at the origin, where the
    // softmax curvature peaks, then move to random small-scale points.
    constexpr double kEps = 1e-4;
    constexpr int kItersPerBase = 12;
    double best = 0.0;
    int used = 0;
    bool first_base = true;
    std::vector<double> w(loss.dim), w2(loss.dim), dir(loss.dim);
    while (used < sample_pairs) {
        if (first_base) {
            std::fill(w.begin(), w.end(), 0.0);
            first_base = false;
        } else {
            const double scale = std::pow(10.0, rng.uniform(-2.0, 0.0));
            for (auto& v : w) v = rng.normal(0.0, scale);
        }
        const auto g0 = loss.grad(w);
        for (auto& v : dir) v = rng.normal();
        double dn = norm2(dir);
        for (auto& v : dir) v /= dn;
        for (int it = 0; it < kItersPerBase && used < sample_pairs; ++it, ++used) {
            for (std::size_t i = 0; i < w.size(); ++i) w2[i] = w[i] + kEps * dir[i];
            const auto g1 = loss.grad(w2);
            for (std::size_t i = 0; i < dir.size(); ++i) dir[i] = (g1[i] - g0[i]) / kEps;
            dn = norm2(dir);
            best = std::max(best, dn);
            if (dn < 1e-12) break;
            for (auto& v : dir) v /= dn;
        }
    }
    return SmoothnessEstimate{1.5 * best, loss.mu};
}

std::vector<double> zeta_gap(const std::vector<double>& standard_params,
                             const std::vector<double>& filtered_params) {
    if (standard_params.size() != filtered_params.size())
        throw DimensionError("parameter vectors must have equal length");
    std::vector<double> z(standard_params.size());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = standard_params[i] - filtered_params[i];
    return z;
}

std::vector<double> gradient_loss_differential(
    const std::vector<std::vector<double>>& device_grads, const std::vector<std::size_t>& kept,
    const std::vector<std::size_t>& flagged) {
    if (kept.empty()) throw ConfigError("the kept set must be non-empty");
    const std::size_t k_total = kept.size() + flagged.size();
    if (device_grads.empty()) throw ConfigError("no device gradients given");
    const std::size_t dim = device_grads.front().size();

    const double q_hat = static_cast<double>(kept.size());
    const double k = static_cast<double>(k_total);
    const double kept_coef = (k - q_hat) / (k * q_hat);
    std::vector<double> e(dim, 0.0);
    for (const std::size_t q : kept) {
        const auto& g = device_grads.at(q);
        if (g.size() != dim) throw DimensionError("gradient lengths differ");
        for (std::size_t i = 0; i < dim; ++i) e[i] += kept_coef * g[i];
    }
    for (const std::size_t a : flagged) {
        const auto& g = device_grads.at(a);
        if (g.size() != dim) throw DimensionError("gradient lengths differ");
        for (std::size_t i = 0; i < dim; ++i) e[i] -= g[i] / k;
    }
    return e;
}

LemmaRecord check_lemma_gap(double loss_standard, double loss_filtered,
                            const std::vector<double>& zeta, const std::vector<double>& grad_at_w,
                            double rho) {
    if (zeta.size() != grad_at_w.size()) throw DimensionError("zeta/gradient length mismatch");
    LemmaRecord rec;
    rec.lhs = loss_standard - loss_filtered;
    const double zn = norm2(zeta);
    rec.rhs = dot(zeta, grad_at_w) + 0.5 * rho * zn * zn;
    rec.holds = rec.lhs <= rec.rhs + 1e-9;
    return rec;
}

Trajectory run_trajectory(const std::vector<LossFn>& device_losses, const LossFn& pooled,
                          const TrajectoryConfig& cfg, double rho) {
    if (device_losses.empty()) throw ConfigError("need at least one device loss");
    if (!pooled.convex) throw SurrogateRequiredError("trajectory checks require a convex loss");
    for (const std::size_t f : cfg.filtered) {
        if (f >= device_losses.size()) throw ConfigError("filtered index out of range");
    }
    const std::size_t dim = pooled.dim;
    const double eta = cfg.eta > 0.0 ? cfg.eta : 1.0 / rho;
    const std::size_t k = device_losses.size();

    std::vector<std::size_t> all(k);
    std::iota(all.begin(), all.end(), std::size_t{0});

    Trajectory traj;
    traj.w.push_back(std::vector<double>(dim, 0.0));
    for (int t = 0; t < cfg.rounds; ++t) {
        const std::vector<double>& w = traj.w.back();
        std::vector<std::vector<double>> grads(k);
        for (std::size_t q = 0; q < k; ++q) grads[q] = device_losses[q].grad(w);

        std::vector<std::size_t> flagged;
        if (t >= cfg.filter_from) flagged = cfg.filtered;
        std::vector<std::size_t> kept;
        for (const std::size_t q : all) {
            if (std::find(flagged.begin(), flagged.end(), q) == flagged.end()) kept.push_back(q);
        }

        std::vector<double> step_kept(dim, 0.0), step_all(dim, 0.0);
        for (const std::size_t q : kept) {
            for (std::size_t i = 0; i < dim; ++i) step_kept[i] += grads[q][i];
        }
        for (std::size_t i = 0; i < dim; ++i) step_kept[i] /= static_cast<double>(kept.size());
        for (const std::size_t q : all) {
            for (std::size_t i = 0; i < dim; ++i) step_all[i] += grads[q][i];
        }
        for (std::size_t i = 0; i < dim; ++i) step_all[i] /= static_cast<double>(k);

        std::vector<double> w_next(dim), w_hat(dim);
        for (std::size_t i = 0; i < dim; ++i) {
            w_next[i] = w[i] - eta * step_kept[i];
            w_hat[i] = w[i] - eta * step_all[i];
        }
        traj.e.push_back(gradient_loss_differential(grads, kept, flagged));
        traj.flagged_count.push_back(flagged.size());
        traj.w.push_back(std::move(w_next));
        traj.w_hat.push_back(std::move(w_hat));
        traj.zeta.push_back(zeta_gap(traj.w_hat.back(), traj.w.back()));
    }
    return traj;
}

std::vector<double> minimize(const LossFn& loss, double rho, int max_steps, double grad_tol) {
    std::vector<double> w(loss.dim, 0.0);
    const double eta = 1.0 / rho;
    for (int s = 0; s < max_steps; ++s) {
        const auto g = loss.grad(w);
        if (norm2(g) < grad_tol) break;
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= eta * g[i];
    }
    return w;
}

std::vector<LemmaRecord> check_lemma_trajectory(const Trajectory& traj, const LossFn& pooled,
                                                double rho) {
    std::vector<LemmaRecord> out;
    for (std::size_t t = 0; t < traj.zeta.size(); ++t) {
        LemmaRecord rec = check_lemma_gap(pooled.value(traj.w_hat[t]), pooled.value(traj.w[t + 1]),
                                          traj.zeta[t], pooled.grad(traj.w[t + 1]), rho);
        rec.round = static_cast<int>(t);
        out.push_back(rec);
    }
    return out;
}

std::vector<GapRecord> check_optimality_gap(const Trajectory& traj, const LossFn& pooled,
                                            double rho, double mu,
                                            const std::vector<double>& w_star) {
    if (w_star.size() != pooled.dim) throw ConfigError("optimum parameter vector missing");
    std::vector<GapRecord> out;
    const double loss_star = pooled.value(w_star);
    const double ratio = mu / rho;
    // The bound references the previous round's standard parameters, so it is
    // undefined at t = 0.
    for (std::size_t t = 1; t + 1 < traj.w.size(); ++t) {
        GapRecord rec;
        rec.round = static_cast<int>(t);
        rec.lhs = pooled.value(traj.w[t + 1]) - loss_star;
        const auto grad_w = pooled.grad(traj.w[t]);
        const double zn = norm2(traj.zeta[t]);
        rec.zeta_norm = zn;
        rec.e_norm = norm2(traj.e[t]);
        rec.term_prev_gap = pooled.value(traj.w[t]) - loss_star;
        rec.term_lemma = ratio * (dot(traj.zeta[t], grad_w) + 0.5 * rho * zn * zn);
        rec.term_monotone = ratio * (1.0 - ratio) * (loss_star - pooled.value(traj.w_hat[t - 1]));
        rec.term_error = 0.5 / rho * rec.e_norm * rec.e_norm;
        rec.rhs = rec.term_prev_gap + rec.term_lemma + rec.term_monotone + rec.term_error;
        rec.holds = rec.lhs <= rec.rhs + 1e-9;
        out.push_back(rec);
    }
    return out;
}

ErrorBoundReport check_error_bound(const std::vector<double>& e_norms_base,
                                   const std::vector<double>& e_norms_scaled,
                                   const std::vector<std::size_t>& kept_sizes_base,
                                   std::size_t kept_count) {
    ErrorBoundReport rep;
    rep.median_base = median_of(e_norms_base);
    rep.median_scaled = median_of(e_norms_scaled);
    rep.ratio = rep.median_base > 0.0 ? rep.median_scaled / rep.median_base : 0.0;
    rep.within = rep.ratio >= 0.25 && rep.ratio <= 0.75;

    // gamma_q fit: with each kept device given an equal share of the bound,
    // ||e|| <= (1/Q) sum_q gamma_q / sqrt(D_q) is tight at gamma_q =
    // sqrt(D_q) * ||e||; maximize over rounds.
    (void)kept_count;
    rep.gamma_q.assign(kept_sizes_base.size(), 0.0);
    for (const double en : e_norms_base) {
        for (std::size_t q = 0; q < kept_sizes_base.size(); ++q) {
            rep.gamma_q[q] = std::max(
                rep.gamma_q[q], en * std::sqrt(static_cast<double>(kept_sizes_base[q])));
        }
    }
    return rep;
}

}  // namespace fedsc::theory
