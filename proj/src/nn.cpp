#include "imagesig/nn.hpp"

#include "imagesig/rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace imagesig {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

int64_t shape_size(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

MatMap as_matrix(Tensor& t, int rows, int cols) { return MatMap(t.data.data(), rows, cols); }
ConstMatMap as_matrix(const Tensor& t, int rows, int cols) { return ConstMatMap(t.data.data(), rows, cols); }

void softmax_rows(MatMap m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        auto row = m.row(i);
        const double mx = row.maxCoeff();
        row = (row.array() - mx).exp();
        row /= row.sum();
    }
}

void relu_inplace(MatMap m) { m = m.cwiseMax(0.0); }

// out[t] = max over the pool window, argmax records the source row.
void maxpool_rows(ConstMatMap in, MatMap out, MatMap argmax, int pool) {
    const int channels = static_cast<int>(in.cols());
    for (Eigen::Index t = 0; t < out.rows(); ++t) {
        for (int c = 0; c < channels; ++c) {
            int best = static_cast<int>(t) * pool;
            double v = in(best, c);
            for (int d = 1; d < pool; ++d) {
                const int r = static_cast<int>(t) * pool + d;
                if (in(r, c) > v) {
                    v = in(r, c);
                    best = r;
                }
            }
            out(t, c) = v;
            argmax(t, c) = best;
        }
    }
}

void im2col(ConstMatMap in, MatMap out, int kernel) {
    const int cols = static_cast<int>(in.cols());
    for (Eigen::Index t = 0; t < out.rows(); ++t)
        for (int d = 0; d < kernel; ++d) out.block(t, d * cols, 1, cols) = in.row(t + d);
}

}  // namespace

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)), data(shape_size(shape), 0.0) {}

std::string encoder_name(Encoder e) { return e == Encoder::fc ? "fc" : "cnn1d"; }

Encoder encoder_from_name(const std::string& name) {
    if (name == "fc") return Encoder::fc;
    if (name == "cnn1d") return Encoder::cnn1d;
    throw std::invalid_argument("unknown encoder: " + name + " (expected fc or cnn1d)");
}

void ModelSpec::validate() const {
    if (rows < 1 || width < 1) throw std::invalid_argument("ModelSpec: input dimensions must be positive");
    if (neurons < 1) throw std::invalid_argument("ModelSpec: neurons must be >= 1");
    if (classes < 2) throw std::invalid_argument("ModelSpec: classes must be >= 2");
    if (encoder == Encoder::cnn1d) {
        if (kernel < 1 || pool < 1 || conv1_filters < 1 || conv2_filters < 1)
            throw std::invalid_argument("ModelSpec: conv settings must be positive");
        if (conv1_out() < pool || conv2_out() < pool)
            throw std::invalid_argument("ModelSpec: sequence too short for the conv/pool stack");
    }
}

int ModelSpec::flat_size() const {
    return encoder == Encoder::fc ? rows * width : pool2_out() * conv2_filters;
}

int64_t ModelParams::param_count() const {
    int64_t n = 0;
    for (const Tensor& t : tensors) n += t.size();
    return n;
}

int64_t count_params(const ModelSpec& spec) {
    spec.validate();
    const int64_t head = static_cast<int64_t>(spec.flat_size()) * spec.neurons + spec.neurons +
                         static_cast<int64_t>(spec.neurons) * spec.classes + spec.classes;
    if (spec.encoder == Encoder::fc) return head;
    const int64_t conv1 = static_cast<int64_t>(spec.kernel) * spec.width * spec.conv1_filters + spec.conv1_filters;
    const int64_t conv2 = static_cast<int64_t>(spec.kernel) * spec.conv1_filters * spec.conv2_filters + spec.conv2_filters;
    return conv1 + conv2 + head;
}

int64_t count_flops(const ModelSpec& spec) {
    spec.validate();
    const int64_t head = 2LL * spec.flat_size() * spec.neurons + 2LL * spec.neurons * spec.classes;
    if (spec.encoder == Encoder::fc) return head;
    const int64_t conv1 = 2LL * spec.conv1_out() * spec.conv1_filters * (spec.width * spec.kernel);
    const int64_t conv2 = 2LL * spec.conv2_out() * spec.conv2_filters * (spec.conv1_filters * spec.kernel);
    return conv1 + conv2 + head;
}

ModelParams build_model(const ModelSpec& spec, uint64_t seed) {
    spec.validate();
    ModelParams model;
    model.spec = spec;
    Rng rng(seed, "init");

    auto he_uniform = [&rng](Tensor& t, int fan_in) {
        const double limit = std::sqrt(6.0 / fan_in);
        for (double& w : t.data) w = rng.uniform(-limit, limit);
    };
    auto add = [&model](const std::string& name, std::vector<int> shape) -> Tensor& {
        model.names.push_back(name);
        model.tensors.emplace_back(std::move(shape));
        return model.tensors.back();
    };

    if (spec.encoder == Encoder::cnn1d) {
        he_uniform(add("conv1.weight", {spec.kernel, spec.width, spec.conv1_filters}), spec.kernel * spec.width);
        add("conv1.bias", {spec.conv1_filters});
        he_uniform(add("conv2.weight", {spec.kernel, spec.conv1_filters, spec.conv2_filters}),
                   spec.kernel * spec.conv1_filters);
        add("conv2.bias", {spec.conv2_filters});
    }
    he_uniform(add("dense.weight", {spec.flat_size(), spec.neurons}), spec.flat_size());
    add("dense.bias", {spec.neurons});
    he_uniform(add("output.weight", {spec.neurons, spec.classes}), spec.neurons);
    add("output.bias", {spec.classes});
    return model;
}

namespace {

// Cache slot indices. fc: [X, A1]; cnn1d: [A1, P1, A2, P2, A3] where A* are
// post-ReLU activations and P* pooled maps (P2 doubles as the flat input).
enum FcSlot { kFcX = 0, kFcHidden = 1 };
enum CnnSlot { kCnnConv1 = 0, kCnnPool1 = 1, kCnnConv2 = 2, kCnnPool2 = 3, kCnnHidden = 4 };

Tensor forward_fc(const ModelParams& model, const FeatureBatch& batch, ForwardCache* cache) {
    const ModelSpec& spec = model.spec;
    const int B = batch.count;
    const int D = spec.rows * spec.width;

    Tensor x({B, D});
    for (int64_t i = 0; i < x.size(); ++i) x.data[i] = batch.data[i];

    Tensor hidden({B, spec.neurons});
    {
        auto X = as_matrix(x, B, D);
        auto W1 = as_matrix(model.tensors[0], D, spec.neurons);
        auto H = as_matrix(hidden, B, spec.neurons);
        H.noalias() = X * W1;
        H.rowwise() += ConstVecMap(model.tensors[1].data.data(), spec.neurons).transpose();
        relu_inplace(H);
    }

    Tensor logits({B, spec.classes});
    {
        auto H = as_matrix(hidden, B, spec.neurons);
        auto W2 = as_matrix(model.tensors[2], spec.neurons, spec.classes);
        auto Z = as_matrix(logits, B, spec.classes);
        Z.noalias() = H * W2;
        Z.rowwise() += ConstVecMap(model.tensors[3].data.data(), spec.classes).transpose();
        softmax_rows(Z);
    }

    if (cache) {
        cache->count = B;
        cache->acts.clear();
        cache->pool_argmax.clear();
        cache->acts.push_back(std::move(x));
        cache->acts.push_back(std::move(hidden));
    }
    return logits;
}

Tensor forward_cnn(const ModelParams& model, const FeatureBatch& batch, ForwardCache* cache) {
    const ModelSpec& spec = model.spec;
    const int B = batch.count;
    const int T1 = spec.conv1_out(), T1p = spec.pool1_out();
    const int T2 = spec.conv2_out(), T2p = spec.pool2_out();
    const int F1 = spec.conv1_filters, F2 = spec.conv2_filters;
    const int K = spec.kernel;

    Tensor conv1({B, T1, F1}), pool1({B, T1p, F1}), arg1({B, T1p, F1});
    Tensor conv2({B, T2, F2}), pool2({B, T2p, F2}), arg2({B, T2p, F2});

    auto W1 = as_matrix(model.tensors[0], K * spec.width, F1);
    auto W2 = as_matrix(model.tensors[2], K * F1, F2);
    ConstVecMap b1(model.tensors[1].data.data(), F1), b2(model.tensors[3].data.data(), F2);

    Tensor xs({spec.rows, spec.width});
    Tensor col1({T1, K * spec.width}), col2({T2, K * F1});
    for (int b = 0; b < B; ++b) {
        auto sample = batch.sample(b);
        for (size_t i = 0; i < sample.size(); ++i) xs.data[i] = sample[i];

        auto C1 = MatMap(conv1.data.data() + static_cast<size_t>(b) * T1 * F1, T1, F1);
        im2col(as_matrix(xs, spec.rows, spec.width), as_matrix(col1, T1, K * spec.width), K);
        C1.noalias() = as_matrix(col1, T1, K * spec.width) * W1;
        C1.rowwise() += b1.transpose();
        relu_inplace(C1);

        auto P1 = MatMap(pool1.data.data() + static_cast<size_t>(b) * T1p * F1, T1p, F1);
        auto AM1 = MatMap(arg1.data.data() + static_cast<size_t>(b) * T1p * F1, T1p, F1);
        maxpool_rows(ConstMatMap(C1.data(), T1, F1), P1, AM1, spec.pool);

        auto C2 = MatMap(conv2.data.data() + static_cast<size_t>(b) * T2 * F2, T2, F2);
        im2col(ConstMatMap(P1.data(), T1p, F1), as_matrix(col2, T2, K * F1), K);
        C2.noalias() = as_matrix(col2, T2, K * F1) * W2;
        C2.rowwise() += b2.transpose();
        relu_inplace(C2);

        auto P2 = MatMap(pool2.data.data() + static_cast<size_t>(b) * T2p * F2, T2p, F2);
        auto AM2 = MatMap(arg2.data.data() + static_cast<size_t>(b) * T2p * F2, T2p, F2);
        maxpool_rows(ConstMatMap(C2.data(), T2, F2), P2, AM2, spec.pool);
    }

    // pool2 rows per sample are contiguous, so it doubles as the flattened
    // dense input of shape B x (T2p*F2).
    const int flat = spec.flat_size();
    Tensor hidden({B, spec.neurons});
    {
        auto X = ConstMatMap(pool2.data.data(), B, flat);
        auto W3 = as_matrix(model.tensors[4], flat, spec.neurons);
        auto H = as_matrix(hidden, B, spec.neurons);
        H.noalias() = X * W3;
        H.rowwise() += ConstVecMap(model.tensors[5].data.data(), spec.neurons).transpose();
        relu_inplace(H);
    }

    Tensor logits({B, spec.classes});
    {
        auto H = as_matrix(hidden, B, spec.neurons);
        auto W4 = as_matrix(model.tensors[6], spec.neurons, spec.classes);
        auto Z = as_matrix(logits, B, spec.classes);
        Z.noalias() = H * W4;
        Z.rowwise() += ConstVecMap(model.tensors[7].data.data(), spec.classes).transpose();
        softmax_rows(Z);
    }

    if (cache) {
        cache->count = B;
        cache->acts.clear();
        cache->pool_argmax.clear();
        cache->acts.push_back(std::move(conv1));
        cache->acts.push_back(std::move(pool1));
        cache->acts.push_back(std::move(conv2));
        cache->acts.push_back(std::move(pool2));
        cache->acts.push_back(std::move(hidden));
        cache->pool_argmax.push_back(std::move(arg1));
        cache->pool_argmax.push_back(std::move(arg2));
    }
    return logits;
}

}  // namespace

Tensor forward(const ModelParams& model, const FeatureBatch& batch, ForwardCache* cache) {
    model.spec.validate();
    if (batch.rows != model.spec.rows || batch.width != model.spec.width)
        throw std::invalid_argument("forward: batch shape does not match model spec");
    if (batch.count < 1) throw std::invalid_argument("forward: empty batch");
    return model.spec.encoder == Encoder::fc ? forward_fc(model, batch, cache)
                                             : forward_cnn(model, batch, cache);
}

FocalLossResult focal_loss(const Tensor& probs, std::span<const int32_t> labels,
                           std::span<const double> alpha, double gamma) {
    if (probs.shape.size() != 2) throw std::invalid_argument("focal_loss: probs must be 2-D");
    const int B = probs.shape[0];
    const int K = probs.shape[1];
    if (static_cast<int>(labels.size()) != B) throw std::invalid_argument("focal_loss: label count mismatch");
    if (static_cast<int>(alpha.size()) != K) throw std::invalid_argument("focal_loss: alpha size mismatch");
    if (gamma < 0.0) throw std::invalid_argument("focal_loss: gamma must be >= 0");

    FocalLossResult out;
    out.dlogits = Tensor({B, K});
    constexpr double kClamp = 1e-7;
    double total = 0.0;
    for (int i = 0; i < B; ++i) {
        const int t = labels[i];
        if (t < 0 || t >= K) throw std::invalid_argument("focal_loss: label out of range");
        const double pt = std::min(1.0 - kClamp, std::max(kClamp, probs.data[static_cast<size_t>(i) * K + t]));
        const double a = alpha[t];
        const double one_minus = 1.0 - pt;
        const double mod = std::pow(one_minus, gamma);
        total += -a * mod * std::log(pt);
        // d/dz of -a*(1-pt)^g*log(pt) through softmax:
        //   factor * (p_j - [j==t]),  factor = a*((1-pt)^g - g*pt*(1-pt)^(g-1)*log(pt))
        const double factor =
            a * (mod - (gamma == 0.0 ? 0.0 : gamma * pt * std::pow(one_minus, gamma - 1.0) * std::log(pt)));
        for (int j = 0; j < K; ++j) {
            const double p = probs.data[static_cast<size_t>(i) * K + j];
            out.dlogits.data[static_cast<size_t>(i) * K + j] = factor * (p - (j == t ? 1.0 : 0.0)) / B;
        }
    }
    out.loss = total / B;
    return out;
}

namespace {

std::vector<Tensor> backward_fc(const ModelParams& model, const ForwardCache& cache, const Tensor& dlogits) {
    const ModelSpec& spec = model.spec;
    const int B = cache.count;
    const int D = spec.rows * spec.width;

    std::vector<Tensor> grads;
    for (const Tensor& t : model.tensors) grads.emplace_back(t.shape);

    auto X = as_matrix(cache.acts[kFcX], B, D);
    auto H = as_matrix(cache.acts[kFcHidden], B, spec.neurons);
    auto dZ2 = as_matrix(dlogits, B, spec.classes);

    as_matrix(grads[2], spec.neurons, spec.classes).noalias() = H.transpose() * dZ2;
    VecMap(grads[3].data.data(), spec.classes) = dZ2.colwise().sum();

    Tensor dh({B, spec.neurons});
    auto dH = as_matrix(dh, B, spec.neurons);
    dH.noalias() = dZ2 * as_matrix(model.tensors[2], spec.neurons, spec.classes).transpose();
    dH.array() *= (H.array() > 0.0).cast<double>();

    as_matrix(grads[0], D, spec.neurons).noalias() = X.transpose() * dH;
    VecMap(grads[1].data.data(), spec.neurons) = dH.colwise().sum();
    return grads;
}

std::vector<Tensor> backward_cnn(const ModelParams& model, const FeatureBatch& batch, const ForwardCache& cache,
                                 const Tensor& dlogits) {
    const ModelSpec& spec = model.spec;
    const int B = cache.count;
    const int T1 = spec.conv1_out(), T1p = spec.pool1_out();
    const int T2 = spec.conv2_out(), T2p = spec.pool2_out();
    const int F1 = spec.conv1_filters, F2 = spec.conv2_filters;
    const int K = spec.kernel;
    const int flat = spec.flat_size();

    std::vector<Tensor> grads;
    for (const Tensor& t : model.tensors) grads.emplace_back(t.shape);

    const Tensor& conv1 = cache.acts[kCnnConv1];
    const Tensor& pool1 = cache.acts[kCnnPool1];
    const Tensor& conv2 = cache.acts[kCnnConv2];
    const Tensor& pool2 = cache.acts[kCnnPool2];
    const Tensor& hidden = cache.acts[kCnnHidden];

    // Dense head, batched.
    auto dZ4 = as_matrix(dlogits, B, spec.classes);
    auto H = as_matrix(hidden, B, spec.neurons);
    as_matrix(grads[6], spec.neurons, spec.classes).noalias() = H.transpose() * dZ4;
    VecMap(grads[7].data.data(), spec.classes) = dZ4.colwise().sum();

    Tensor dh({B, spec.neurons});
    auto dH = as_matrix(dh, B, spec.neurons);
    dH.noalias() = dZ4 * as_matrix(model.tensors[6], spec.neurons, spec.classes).transpose();
    dH.array() *= (H.array() > 0.0).cast<double>();

    auto Flat = ConstMatMap(pool2.data.data(), B, flat);
    as_matrix(grads[4], flat, spec.neurons).noalias() = Flat.transpose() * dH;
    VecMap(grads[5].data.data(), spec.neurons) = dH.colwise().sum();

    Tensor dflat({B, flat});
    as_matrix(dflat, B, flat).noalias() = dH * as_matrix(model.tensors[4], flat, spec.neurons).transpose();

    // Conv stack, per sample; im2col matrices are rebuilt rather than cached.
    auto W1 = as_matrix(model.tensors[0], K * spec.width, F1);
    auto W2 = as_matrix(model.tensors[2], K * F1, F2);
    auto dW1 = as_matrix(grads[0], K * spec.width, F1);
    auto dW2 = as_matrix(grads[2], K * F1, F2);
    VecMap db1(grads[1].data.data(), F1), db2(grads[3].data.data(), F2);

    Tensor xs({spec.rows, spec.width});
    Tensor col1({T1, K * spec.width}), col2({T2, K * F1});
    Tensor dc2({T2, F2}), dp1({T1p, F1}), dcol2({T2, K * F1}), dc1({T1, F1});
    for (int b = 0; b < B; ++b) {
        auto C1 = ConstMatMap(conv1.data.data() + static_cast<size_t>(b) * T1 * F1, T1, F1);
        auto P1 = ConstMatMap(pool1.data.data() + static_cast<size_t>(b) * T1p * F1, T1p, F1);
        auto C2 = ConstMatMap(conv2.data.data() + static_cast<size_t>(b) * T2 * F2, T2, F2);
        auto AM1 = ConstMatMap(cache.pool_argmax[0].data.data() + static_cast<size_t>(b) * T1p * F1, T1p, F1);
        auto AM2 = ConstMatMap(cache.pool_argmax[1].data.data() + static_cast<size_t>(b) * T2p * F2, T2p, F2);
        auto dP2 = ConstMatMap(dflat.data.data() + static_cast<size_t>(b) * flat, T2p, F2);

        // Unpool into conv2 rows, then ReLU mask.
        auto dC2 = as_matrix(dc2, T2, F2);
        dC2.setZero();
        for (int t = 0; t < T2p; ++t)
            for (int c = 0; c < F2; ++c) dC2(static_cast<int>(AM2(t, c)), c) += dP2(t, c);
        dC2.array() *= (C2.array() > 0.0).cast<double>();

        im2col(P1, as_matrix(col2, T2, K * F1), K);
        dW2.noalias() += as_matrix(col2, T2, K * F1).transpose() * dC2;
        db2 += dC2.colwise().sum();

        // col2im: scatter the im2col gradient back to pool1 rows.
        as_matrix(dcol2, T2, K * F1).noalias() = dC2 * W2.transpose();
        auto dP1 = as_matrix(dp1, T1p, F1);
        dP1.setZero();
        for (int t = 0; t < T2; ++t)
            for (int d = 0; d < K; ++d)
                dP1.row(t + d) += as_matrix(dcol2, T2, K * F1).block(t, d * F1, 1, F1);

        auto dC1 = as_matrix(dc1, T1, F1);
        dC1.setZero();
        for (int t = 0; t < T1p; ++t)
            for (int c = 0; c < F1; ++c) dC1(static_cast<int>(AM1(t, c)), c) += dP1(t, c);
        dC1.array() *= (C1.array() > 0.0).cast<double>();

        auto sample = batch.sample(b);
        for (size_t i = 0; i < sample.size(); ++i) xs.data[i] = sample[i];
        im2col(as_matrix(xs, spec.rows, spec.width), as_matrix(col1, T1, K * spec.width), K);
        dW1.noalias() += as_matrix(col1, T1, K * spec.width).transpose() * dC1;
        db1 += dC1.colwise().sum();
    }
    return grads;
}

}  // namespace

std::vector<Tensor> backward(const ModelParams& model, const FeatureBatch& batch, const ForwardCache& cache,
                             const Tensor& dlogits) {
    if (cache.count != batch.count || cache.acts.empty())
        throw std::invalid_argument("backward: stale or missing forward cache");
    if (dlogits.shape.size() != 2 || dlogits.shape[0] != batch.count || dlogits.shape[1] != model.spec.classes)
        throw std::invalid_argument("backward: loss gradient shape mismatch");
    return model.spec.encoder == Encoder::fc ? backward_fc(model, cache, dlogits)
                                             : backward_cnn(model, batch, cache, dlogits);
}

AdamState AdamState::init(const ModelParams& model) {
    AdamState s;
    for (const Tensor& t : model.tensors) {
        s.m.emplace_back(t.shape);
        s.v.emplace_back(t.shape);
    }
    return s;
}

void adam_step(ModelParams& model, const std::vector<Tensor>& grads, AdamState& state, const AdamHyper& hyper) {
    if (grads.size() != model.tensors.size() || state.m.size() != model.tensors.size())
        throw std::invalid_argument("adam_step: gradient/state shape mismatch");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
    for (size_t k = 0; k < model.tensors.size(); ++k) {
        auto& p = model.tensors[k].data;
        const auto& g = grads[k].data;
        auto& m = state.m[k].data;
        auto& v = state.v[k].data;
        for (size_t i = 0; i < p.size(); ++i) {
            m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * g[i];
            v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * g[i] * g[i];
            p[i] -= hyper.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + hyper.eps);
        }
    }
}

}  // namespace imagesig
