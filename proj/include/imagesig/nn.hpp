#ifndef IMAGESIG_NN_HPP
#define IMAGESIG_NN_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace imagesig {

// Dense row-major tensor, 64-bit arithmetic throughout training; weights
// are narrowed to 32-bit floats on serialization.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s);
    int64_t size() const { return static_cast<int64_t>(data.size()); }
};

enum class Encoder { fc, cnn1d };

std::string encoder_name(Encoder e);
Encoder encoder_from_name(const std::string& name);

// Architecture of the classifier head consuming a rows x width feature
// matrix. fc flattens everything into one hidden layer; cnn1d treats the
// row axis as the sequence and the feature width as channels.
struct ModelSpec {
    Encoder encoder = Encoder::cnn1d;
    int rows = 64;      // R: streams per image (2H for two-direction)
    int width = 120;    // Q': signature coordinates per stream
    int neurons = 50;   // hidden fully-connected layer
    int classes = 2;
    // cnn1d settings; valid (no) padding, pool stride = pool size.
    int conv1_filters = 32;
    int conv2_filters = 64;
    int kernel = 3;
    int pool = 3;

    void validate() const;
    // Sequence lengths through the conv/pool stack (cnn1d only).
    int conv1_out() const { return rows - kernel + 1; }
    int pool1_out() const { return (conv1_out() - pool) / pool + 1; }
    int conv2_out() const { return pool1_out() - kernel + 1; }
    int pool2_out() const { return (conv2_out() - pool) / pool + 1; }
    int flat_size() const;  // input size of the hidden dense layer
};

// Trainable parameters in serialization order: weight/bias pairs per layer.
struct ModelParams {
    ModelSpec spec;
    std::vector<Tensor> tensors;
    std::vector<std::string> names;

    int64_t param_count() const;
};

// Exact trainable-parameter count including biases.
int64_t count_params(const ModelSpec& spec);

// FLOPs for a single forward pass at batch size 1, 2 FLOPs per
// multiply-accumulate; pooling and activations excluded.
int64_t count_flops(const ModelSpec& spec);

// He-style fan-in uniform initialization (seeded); biases zero.
ModelParams build_model(const ModelSpec& spec, uint64_t seed);

// Batch of feature matrices: count samples, each rows x width, row-major.
struct FeatureBatch {
    int count = 0;
    int rows = 0;
    int width = 0;
    const float* data = nullptr;

    std::span<const float> sample(int i) const {
        const size_t stride = static_cast<size_t>(rows) * width;
        return {data + i * stride, stride};
    }
};

// Intermediate activations cached by forward() for backward().
struct ForwardCache {
    int count = 0;
    std::vector<Tensor> acts;       // encoder-specific stack, inputs first
    std::vector<Tensor> pool_argmax;  // cnn1d: argmax index per pooled cell
};

// Softmax probabilities, count x classes, rows summing to 1. When cache is
// non-null the activations needed by backward() are retained.
Tensor forward(const ModelParams& model, const FeatureBatch& batch, ForwardCache* cache = nullptr);

// Class-weighted focal loss. probs is count x classes; alpha holds one
// positive weight per class; gamma >= 0 (gamma = 0, alpha = 1 is plain
// cross-entropy). Probabilities are clamped to [1e-7, 1 - 1e-7] before
// logarithms. Returns the batch-mean loss and its gradient with respect to
// the pre-softmax logits.
struct FocalLossResult {
    double loss = 0.0;
    Tensor dlogits;  // count x classes
};
FocalLossResult focal_loss(const Tensor& probs, std::span<const int32_t> labels,
                           std::span<const double> alpha, double gamma);

// Reverse-mode gradients for every parameter tensor, shapes matching
// model.tensors. Requires the cache produced by forward() on the same batch.
std::vector<Tensor> backward(const ModelParams& model, const FeatureBatch& batch, const ForwardCache& cache,
                             const Tensor& dlogits);

struct AdamHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    int64_t step = 0;

    static AdamState init(const ModelParams& model);
};

// Standard Adam update with bias correction; increments the step counter.
void adam_step(ModelParams& model, const std::vector<Tensor>& grads, AdamState& state, const AdamHyper& hyper);

}  // namespace imagesig

#endif  // IMAGESIG_NN_HPP
