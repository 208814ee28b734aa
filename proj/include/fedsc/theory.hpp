#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "fedsc/rng.hpp"
#include "fedsc/sigsyn.hpp"

namespace fedsc::theory {

// A differentiable loss over a flat parameter vector. The convergence checks
// require convexity; `convex` and `mu` (the known strong-convexity modulus)
// are declared by whoever builds the function.
struct LossFn {
    std::size_t dim = 0;
    bool convex = false;
    double mu = 0.0;
    std::function<double(const std::vector<double>&)> value;
    std::function<std::vector<double>(const std::vector<double>&)> grad;
};

// Feature/label pairs for the convex surrogate.
struct FlatDataset {
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    std::size_t classes = 0;

    std::size_t size() const { return x.size(); }
};

FlatDataset flatten_dataset(const sigsyn::LabeledDataset& dataset);

// L2-regularized multinomial logistic regression: convex, mu = lambda.
// Parameters are a flat vector of C x (d + 1) entries (weights then biases
// per class; the regularizer covers the weights only).
LossFn softmax_regression_loss(const FlatDataset& data, double lambda);

// Fixture loss 0.5 ||w||^2 (rho = 1 exactly, mu = 1).
LossFn quadratic_loss(std::size_t dim);

struct SmoothnessEstimate {
    double rho = 0.0;  // empirical gradient-Lipschitz estimate, inflated 1.5x
    double mu = 0.0;
};

// Max over sampled parameter pairs of ||grad(w) - grad(w')|| / ||w - w'||,
// inflated by a 1.5x safety factor. Throws SurrogateRequiredError for
// non-convex losses.
SmoothnessEstimate estimate_smoothness(const LossFn& loss, int sample_pairs, RngStream& rng);

// zeta = w_hat - w (standard-FL minus filtered aggregate of the same round).
std::vector<double> zeta_gap(const std::vector<double>& standard_params,
                             const std::vector<double>& filtered_params);

// e^t from per-device gradients at the shared point and the kept/flagged
// index sets.
std::vector<double> gradient_loss_differential(
    const std::vector<std::vector<double>>& device_grads, const std::vector<std::size_t>& kept,
    const std::vector<std::size_t>& flagged);

struct LemmaRecord {
    int round = 0;
    double lhs = 0.0;
    double rhs = 0.0;
    bool holds = false;
};

LemmaRecord check_lemma_gap(double loss_standard, double loss_filtered,
                            const std::vector<double>& zeta, const std::vector<double>& grad_at_w,
                            double rho);

struct GapRecord {
    int round = 0;
    double lhs = 0.0;
    double rhs = 0.0;
    double term_prev_gap = 0.0;
    double term_lemma = 0.0;
    double term_monotone = 0.0;
    double term_error = 0.0;
    double e_norm = 0.0;
    double zeta_norm = 0.0;
    bool holds = false;
};

// One instrumented trajectory of the filtered update rule on a convex loss.
struct Trajectory {
    std::vector<std::vector<double>> w;       // w[0..T], filtered trajectory
    std::vector<std::vector<double>> w_hat;   // w_hat[t] = unfiltered step from w[t-1]
    std::vector<std::vector<double>> zeta;    // zeta[t] = w_hat[t] - w[t]
    std::vector<std::vector<double>> e;       // e[t] at w[t] with round-t sets
    std::vector<std::size_t> flagged_count;   // |A^t| per round
};

struct TrajectoryConfig {
    int rounds = 50;
    int devices = 10;
    std::vector<std::size_t> filtered;  // device indices filtered once active
    int filter_from = 25;               // rounds before this keep every device
    double eta = 0.0;                   // 0 means "use 1/rho"
};

// Runs the equal-shard one-gradient-step-per-round loop: per round, every
// device contributes its full-batch gradient at w^t; the filtered aggregate
// averages kept devices, the standard twin averages all of them.
Trajectory run_trajectory(const std::vector<LossFn>& device_losses, const LossFn& pooled,
                          const TrajectoryConfig& cfg, double rho);

// Long-horizon full-batch descent to the pooled optimum.
std::vector<double> minimize(const LossFn& loss, double rho, int max_steps = 5000,
                             double grad_tol = 1e-8);

std::vector<LemmaRecord> check_lemma_trajectory(const Trajectory& traj, const LossFn& pooled,
                                                double rho);

// Per-round optimality-gap bound records; starts at t = 1 because the bound
// references the previous round's standard parameters.
std::vector<GapRecord> check_optimality_gap(const Trajectory& traj, const LossFn& pooled,
                                            double rho, double mu,
                                            const std::vector<double>& w_star);

struct ErrorBoundReport {
    double median_base = 0.0;     // median ||e^t|| with base shard sizes
    double median_scaled = 0.0;   // median ||e^t|| with 4x shard sizes
    double ratio = 0.0;           // scaled / base, ~0.5 expected
    bool within = false;          // ratio in [0.25, 0.75]
    std::vector<double> gamma_q;  // fitted per-device constants
};

// Fits gamma_q = max_t sqrt(D_q) * Q^t * ||e^t|| per kept device and checks
// the 1/sqrt(D) shrink between a base and a 4x-shard-size run.
ErrorBoundReport check_error_bound(const std::vector<double>& e_norms_base,
                                   const std::vector<double>& e_norms_scaled,
                                   const std::vector<std::size_t>& kept_sizes_base,
                                   std::size_t kept_count);

}  // namespace fedsc::theory
