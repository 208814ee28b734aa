#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fedsc/rng.hpp"
#include "fedsc/sigsyn.hpp"

namespace fedsc::neural {

// Fully connected classifier over the flattened l x 2 input: hidden layers
// use ReLU, the output layer is linear (softmax is applied by the loss).
// All arithmetic is 64-bit.
struct ArchSpec {
    std::size_t input_dim = 64;
    std::vector<std::size_t> hidden{64};
    std::size_t output_dim = 8;
    double init_scale = 1.0;  // layer weight std = init_scale / sqrt(fan_in)

    bool operator==(const ArchSpec&) const = default;
};

struct Layer {
    std::size_t in = 0, out = 0;
    std::vector<double> w;  // row-major out x in
    std::vector<double> b;  // out
};

struct ModelParams {
    ArchSpec arch;
    std::vector<Layer> layers;

    std::size_t flat_size() const;
    std::vector<double> flatten() const;
    void assign_flat(const std::vector<double>& flat);  // throws DimensionError
};

ModelParams unflatten(const ArchSpec& arch, const std::vector<double>& flat);

struct GradBundle {
    ModelParams grads;  // congruent with the model
    double loss = 0.0;
};

// Deterministic Gaussian init; per-layer weight std is init_scale/sqrt(fan_in).
ModelParams init_model(const ArchSpec& arch, RngStream& rng);
ModelParams zero_model(const ArchSpec& arch);
double layer_init_std(const ArchSpec& arch, std::size_t layer_index);

std::vector<double> forward_logits(const ModelParams& params, const std::vector<double>& input);
std::vector<double> softmax(const std::vector<double>& logits);  // max-subtracted
int predict(const ModelParams& params, const std::vector<double>& input);

struct BatchItem {
    const std::vector<double>* input = nullptr;
    int label = 0;
};

// Mean cross-entropy over the batch and its exact parameter gradients.
GradBundle loss_and_grads(const ModelParams& params, const std::vector<BatchItem>& batch);

// Gradient of the single-sample cross-entropy w.r.t. the input.
std::vector<double> input_gradient(const ModelParams& params, const std::vector<double>& input,
                                   int label);

ModelParams sgd_step(const ModelParams& params, const ModelParams& grads, double eta);

double accuracy(const ModelParams& params, const sigsyn::LabeledDataset& dataset);
double mean_loss(const ModelParams& params, const sigsyn::LabeledDataset& dataset);

std::vector<BatchItem> whole_dataset_batch(const sigsyn::LabeledDataset& dataset);

// One pass over the dataset in shuffled mini-batches of batch_size, each batch
// applying one SGD step at rate eta.
ModelParams train_one_epoch(const ModelParams& start, const sigsyn::LabeledDataset& dataset,
                            double eta, int batch_size, RngStream& rng);

// Parameter checkpoint: magic, architecture header, then the flat 64-bit
// float vector, all little-endian.
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

}  // namespace fedsc::neural
