#include "fedsc/neural.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "fedsc/errors.hpp"

namespace fedsc::neural {
namespace {

std::vector<Layer> make_layers(const ArchSpec& arch) {
    std::vector<Layer> layers;
    std::size_t prev = arch.input_dim;
    for (const std::size_t h : arch.hidden) {
        layers.push_back(Layer{prev, h, std::vector<double>(h * prev, 0.0),
                               std::vector<double>(h, 0.0)});
        prev = h;
    }
    layers.push_back(Layer{prev, arch.output_dim,
                           std::vector<double>(arch.output_dim * prev, 0.0),
                           std::vector<double>(arch.output_dim, 0.0)});
    return layers;
}

void check_congruent(const ModelParams& a, const ModelParams& b, const char* what) {
    if (a.layers.size() != b.layers.size()) throw DimensionError(what);
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
        if (a.layers[i].in != b.layers[i].in || a.layers[i].out != b.layers[i].out)
            throw DimensionError(what);
    }
}

// Forward pass keeping pre/post-activation values for backprop.
struct ForwardTrace {
    std::vector<std::vector<double>> activations;  // [0] = input, last = logits
};

ForwardTrace forward_trace(const ModelParams& params, const std::vector<double>& input) {
    if (input.size() != params.arch.input_dim)
        throw DimensionError("input size does not match the architecture");
    ForwardTrace tr;
    tr.activations.reserve(params.layers.size() + 1);
    tr.activations.push_back(input);
    for (std::size_t li = 0; li < params.layers.size(); ++li) {
        const Layer& layer = params.layers[li];
        const std::vector<double>& x = tr.activations.back();
        std::vector<double> y(layer.out);
        for (std::size_t o = 0; o < layer.out; ++o) {
            double acc = layer.b[o];
            const double* wrow = layer.w.data() + o * layer.in;
            for (std::size_t i = 0; i < layer.in; ++i) acc += wrow[i] * x[i];
            y[o] = acc;
        }
        const bool output_layer = li + 1 == params.layers.size();
        if (!output_layer) {
            for (auto& v : y) v = v > 0.0 ? v : 0.0;
        }
        tr.activations.push_back(std::move(y));
    }
    return tr;
}

// Backprop from a gradient on the logits. Accumulates parameter gradients
// into grads (when non-null) and returns the gradient on the input.
std::vector<double> backprop(const ModelParams& params, const ForwardTrace& tr,
                             std::vector<double> dlogits, ModelParams* grads) {
    std::vector<double> delta = std::move(dlogits);
    for (std::size_t li = params.layers.size(); li-- > 0;) {
        const Layer& layer = params.layers[li];
        const std::vector<double>& x = tr.activations[li];
        if (grads) {
            Layer& g = grads->layers[li];
            for (std::size_t o = 0; o < layer.out; ++o) {
                g.b[o] += delta[o];
                double* grow = g.w.data() + o * layer.in;
                const double d = delta[o];
                for (std::size_t i = 0; i < layer.in; ++i) grow[i] += d * x[i];
            }
        }
        std::vector<double> prev(layer.in, 0.0);
        for (std::size_t o = 0; o < layer.out; ++o) {
            const double d = delta[o];
            if (d == 0.0) continue;
            const double* wrow = layer.w.data() + o * layer.in;
            for (std::size_t i = 0; i < layer.in; ++i) prev[i] += d * wrow[i];
        }
        if (li > 0) {
            // ReLU mask of the layer input (post-activation of the layer below).
            for (std::size_t i = 0; i < layer.in; ++i) {
                if (x[i] <= 0.0) prev[i] = 0.0;
            }
        }
        delta = std::move(prev);
    }
    return delta;
}

}  // namespace

std::size_t ModelParams::flat_size() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.w.size() + l.b.size();
    return n;
}

std::vector<double> ModelParams::flatten() const {
    std::vector<double> flat;
    flat.reserve(flat_size());
    for (const auto& l : layers) {
        flat.insert(flat.end(), l.w.begin(), l.w.end());
        flat.insert(flat.end(), l.b.begin(), l.b.end());
    }
    return flat;
}

void ModelParams::assign_flat(const std::vector<double>& flat) {
    if (flat.size() != flat_size()) throw DimensionError("flat vector size mismatch");
    std::size_t pos = 0;
    for (auto& l : layers) {
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), l.w.size(), l.w.begin());
        pos += l.w.size();
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), l.b.size(), l.b.begin());
        pos += l.b.size();
    }
}

ModelParams unflatten(const ArchSpec& arch, const std::vector<double>& flat) {
    ModelParams p = zero_model(arch);
    p.assign_flat(flat);
    return p;
}

double layer_init_std(const ArchSpec& arch, std::size_t layer_index) {
    std::size_t fan_in = arch.input_dim;
    for (std::size_t i = 0; i < layer_index && i < arch.hidden.size(); ++i) fan_in = arch.hidden[i];
    return arch.init_scale / std::sqrt(static_cast<double>(fan_in));
}

ModelParams init_model(const ArchSpec& arch, RngStream& rng) {
    ModelParams p;
    p.arch = arch;
    p.layers = make_layers(arch);
    for (std::size_t li = 0; li < p.layers.size(); ++li) {
        const double std_dev = layer_init_std(arch, li);
        for (auto& w : p.layers[li].w) w = rng.normal(0.0, std_dev);
        // biases start at zero
    }
    return p;
}

ModelParams zero_model(const ArchSpec& arch) {
    ModelParams p;
    p.arch = arch;
    p.layers = make_layers(arch);
    return p;
}

std::vector<double> forward_logits(const ModelParams& params, const std::vector<double>& input) {
    return forward_trace(params, input).activations.back();
}

std::vector<double> softmax(const std::vector<double>& logits) {
    std::vector<double> p(logits.size());
    const double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - m);
        sum += p[i];
    }
    for (auto& v : p) v /= sum;
    return p;
}

int predict(const ModelParams& params, const std::vector<double>& input) {
    const auto logits = forward_logits(params, input);
    return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

GradBundle loss_and_grads(const ModelParams& params, const std::vector<BatchItem>& batch) {
    if (batch.empty()) throw EmptyBatchError("loss_and_grads needs a non-empty batch");
    GradBundle out;
    out.grads = zero_model(params.arch);
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    for (const BatchItem& item : batch) {
        const ForwardTrace tr = forward_trace(params, *item.input);
        const std::vector<double>& logits = tr.activations.back();
        if (item.label < 0 || static_cast<std::size_t>(item.label) >= logits.size())
            throw DimensionError("label out of range");
        std::vector<double> p = softmax(logits);
        out.loss += -std::log(std::max(p[static_cast<std::size_t>(item.label)], 1e-300)) * inv_n;
        // d(mean CE)/dlogits = (softmax - onehot) / n
        p[static_cast<std::size_t>(item.label)] -= 1.0;
        for (auto& v : p) v *= inv_n;
        backprop(params, tr, std::move(p), &out.grads);
    }
    return out;
}

std::vector<double> input_gradient(const ModelParams& params, const std::vector<double>& input,
                                   int label) {
    const ForwardTrace tr = forward_trace(params, input);
    const std::vector<double>& logits = tr.activations.back();
    if (label < 0 || static_cast<std::size_t>(label) >= logits.size())
        throw DimensionError("label out of range");
    std::vector<double> p = softmax(logits);
    p[static_cast<std::size_t>(label)] -= 1.0;
    return backprop(params, tr, std::move(p), nullptr);
}

ModelParams sgd_step(const ModelParams& params, const ModelParams& grads, double eta) {
    check_congruent(params, grads, "sgd_step shapes must match");
    ModelParams next = params;
    for (std::size_t li = 0; li < next.layers.size(); ++li) {
        for (std::size_t i = 0; i < next.layers[li].w.size(); ++i)
            next.layers[li].w[i] -= eta * grads.layers[li].w[i];
        for (std::size_t i = 0; i < next.layers[li].b.size(); ++i)
            next.layers[li].b[i] -= eta * grads.layers[li].b[i];
    }
    return next;
}

double accuracy(const ModelParams& params, const sigsyn::LabeledDataset& dataset) {
    if (dataset.empty()) throw EmptyDatasetError("accuracy over an empty dataset");
    std::size_t correct = 0;
    for (const auto& s : dataset.samples) {
        if (predict(params, s.iq) == s.label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

double mean_loss(const ModelParams& params, const sigsyn::LabeledDataset& dataset) {
    if (dataset.empty()) throw EmptyDatasetError("mean_loss over an empty dataset");
    double loss = 0.0;
    const double inv_n = 1.0 / static_cast<double>(dataset.size());
    for (const auto& s : dataset.samples) {
        const auto p = softmax(forward_logits(params, s.iq));
        loss += -std::log(std::max(p[static_cast<std::size_t>(s.label)], 1e-300)) * inv_n;
    }
    return loss;
}

std::vector<BatchItem> whole_dataset_batch(const sigsyn::LabeledDataset& dataset) {
    std::vector<BatchItem> batch;
    batch.reserve(dataset.size());
    for (const auto& s : dataset.samples) batch.push_back(BatchItem{&s.iq, s.label});
    return batch;
}

ModelParams train_one_epoch(const ModelParams& start, const sigsyn::LabeledDataset& dataset,
                            double eta, int batch_size, RngStream& rng) {
    if (dataset.empty()) throw EmptyDatasetError("cannot train on an empty dataset");
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);

    ModelParams params = start;
    std::vector<BatchItem> batch;
    for (std::size_t pos = 0; pos < order.size(); pos += static_cast<std::size_t>(batch_size)) {
        batch.clear();
        const std::size_t end = std::min(order.size(), pos + static_cast<std::size_t>(batch_size));
        for (std::size_t i = pos; i < end; ++i) {
            const auto& s = dataset.samples[order[i]];
            batch.push_back(BatchItem{&s.iq, s.label});
        }
        const GradBundle g = loss_and_grads(params, batch);
        params = sgd_step(params, g.grads, eta);
    }
    return params;
}

void save_checkpoint(const ModelParams& params, const std::string& path) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    const char magic[8] = {'F', 'S', 'C', 'C', 'P', '0', '1', '\0'};
    out.write(magic, sizeof(magic));
    const std::uint64_t input_dim = params.arch.input_dim;
    const std::uint64_t output_dim = params.arch.output_dim;
    const std::uint64_t hidden_count = params.arch.hidden.size();
    out.write(reinterpret_cast<const char*>(&input_dim), 8);
    out.write(reinterpret_cast<const char*>(&output_dim), 8);
    out.write(reinterpret_cast<const char*>(&params.arch.init_scale), 8);
    out.write(reinterpret_cast<const char*>(&hidden_count), 8);
    for (const std::size_t h : params.arch.hidden) {
        const std::uint64_t v = h;
        out.write(reinterpret_cast<const char*>(&v), 8);
    }
    const std::vector<double> flat = params.flatten();
    const std::uint64_t n = flat.size();
    out.write(reinterpret_cast<const char*>(&n), 8);
    out.write(reinterpret_cast<const char*>(flat.data()),
              static_cast<std::streamsize>(flat.size() * sizeof(double)));
    if (!out) throw IoError("write failed: " + path);
}

ModelParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, "FSCCP01", 7) != 0) throw IoError("bad checkpoint magic: " + path);
    ArchSpec arch;
    std::uint64_t input_dim = 0, output_dim = 0, hidden_count = 0;
    in.read(reinterpret_cast<char*>(&input_dim), 8);
    in.read(reinterpret_cast<char*>(&output_dim), 8);
    in.read(reinterpret_cast<char*>(&arch.init_scale), 8);
    in.read(reinterpret_cast<char*>(&hidden_count), 8);
    arch.input_dim = input_dim;
    arch.output_dim = output_dim;
    arch.hidden.resize(hidden_count);
    for (auto& h : arch.hidden) {
        std::uint64_t v = 0;
        in.read(reinterpret_cast<char*>(&v), 8);
        h = v;
    }
    std::uint64_t n = 0;
    in.read(reinterpret_cast<char*>(&n), 8);
    std::vector<double> flat(n);
    in.read(reinterpret_cast<char*>(flat.data()),
            static_cast<std::streamsize>(flat.size() * sizeof(double)));
    if (!in) throw IoError("truncated checkpoint: " + path);
    return unflatten(arch, flat);
}

}  // namespace fedsc::neural
