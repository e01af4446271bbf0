#include "imagesig/quant.hpp"

#include <cmath>
#include <stdexcept>

namespace imagesig {

QuantizedTensor quantize_tensor(const Tensor& t) {
    QuantizedTensor q;
    q.shape = t.shape;
    q.values.resize(t.data.size());
    double max_abs = 0.0;
    for (double w : t.data) max_abs = std::max(max_abs, std::abs(w));
    q.scale = max_abs > 0.0 ? max_abs / 127.0 : 1.0;
    for (size_t i = 0; i < t.data.size(); ++i) {
        const long r = std::lround(t.data[i] / q.scale);  // rounds half away from zero
        q.values[i] = static_cast<int8_t>(std::min(127L, std::max(-127L, r)));
    }
    return q;
}

QuantizedModel quantize(const ModelParams& model) {
    if (model.tensors.size() % 2 != 0)
        throw std::invalid_argument("quantize: expected weight/bias tensor pairs");
    QuantizedModel q;
    q.spec = model.spec;
    q.names = model.names;
    for (size_t i = 0; i < model.tensors.size(); i += 2) {
        for (double w : model.tensors[i].data)
            if (!std::isfinite(w)) throw std::invalid_argument("quantize: non-finite weight");
        q.weights.push_back(quantize_tensor(model.tensors[i]));
        q.biases.push_back(model.tensors[i + 1]);
    }
    return q;
}

ModelParams dequantize(const QuantizedModel& qmodel) {
    ModelParams model;
    model.spec = qmodel.spec;
    model.names = qmodel.names;
    for (size_t i = 0; i < qmodel.weights.size(); ++i) {
        Tensor w(qmodel.weights[i].shape);
        for (size_t j = 0; j < w.data.size(); ++j)
            w.data[j] = static_cast<double>(qmodel.weights[i].values[j]) * qmodel.weights[i].scale;
        model.tensors.push_back(std::move(w));
        model.tensors.push_back(qmodel.biases[i]);
    }
    return model;
}

Tensor q_forward(const QuantizedModel& qmodel, const FeatureBatch& batch) {
    return forward(dequantize(qmodel), batch);
}

}  // namespace imagesig
