#ifndef IMAGESIG_QUANT_HPP
#define IMAGESIG_QUANT_HPP

#include "imagesig/nn.hpp"

#include <cstdint>
#include <vector>

namespace imagesig {

// Symmetric per-tensor int8 quantization: scale = max|w|/127 (1 for an
// all-zero tensor), q = round(w/scale) clamped to [-127, 127], rounding
// half away from zero.
struct QuantizedTensor {
    std::vector<int> shape;
    std::vector<int8_t> values;
    double scale = 1.0;

    int64_t size() const { return static_cast<int64_t>(values.size()); }
};

// Weight tensors quantized, biases kept in 32-bit float; mirrors the
// ModelParams tensor order (weight/bias pairs).
struct QuantizedModel {
    ModelSpec spec;
    std::vector<QuantizedTensor> weights;
    std::vector<Tensor> biases;
    std::vector<std::string> names;  // one per tensor, spec order
};

QuantizedTensor quantize_tensor(const Tensor& t);

QuantizedModel quantize(const ModelParams& model);

// Dequantized-weight copy of the model (dynamic-range inference: weights
// stored int8, expanded to float at use; activations stay float).
ModelParams dequantize(const QuantizedModel& qmodel);

// Identical control flow to forward() with dequantized weights.
Tensor q_forward(const QuantizedModel& qmodel, const FeatureBatch& batch);

}  // namespace imagesig

#endif  // IMAGESIG_QUANT_HPP
