#ifndef IMAGESIG_MODEL_IO_HPP
#define IMAGESIG_MODEL_IO_HPP

#include "imagesig/featurize.hpp"
#include "imagesig/nn.hpp"
#include "imagesig/quant.hpp"

#include <optional>
#include <string>
#include <vector>

namespace imagesig {

// Evaluation snapshot embedded in model headers and metrics.json. Wall-clock
// and file-size fields live only in metrics.json so that model files are
// byte-identical across reruns with the same seed.
struct MetricsSnapshot {
    double acc = 0.0;
    double ap = 0.0;
    double f1 = 0.0;
    double auc = 0.0;
    int64_t params = 0;
    int64_t flops = 0;
};

// Training provenance recorded in the model header.
struct TrainInfo {
    int epochs = 0;
    int batch = 0;
    double lr = 0.0;
    double gamma = 0.0;
    uint64_t seed = 0;
    double val_fraction = 0.0;
    bool augmented = false;
    std::vector<double> alpha;        // per-class focal weights
    std::vector<int64_t> class_counts;
};

// Self-describing sidecar stored in the JSON header of both model formats.
struct ModelMeta {
    FeaturizeConfig featurize;
    std::vector<std::string> class_names;
    std::optional<MetricsSnapshot> metrics;
    std::optional<TrainInfo> train;
};

// Model file formats, both little-endian:
//   float:     magic "IMGSIG01", u32 header length, UTF-8 JSON header,
//              raw float32 parameter blobs in spec order.
//   quantized: magic "IMGSIGQ1", same JSON header plus per-tensor scales,
//              int8 weight blobs and float32 bias blobs in spec order.
void save_model(const std::string& path, const ModelParams& model, const ModelMeta& meta);
void save_quantized(const std::string& path, const QuantizedModel& qmodel, const ModelMeta& meta);

struct LoadedModel {
    bool quantized = false;
    ModelParams params;                     // dequantized when quantized
    std::optional<QuantizedModel> qmodel;   // present for quantized files
    ModelMeta meta;
};

LoadedModel load_model(const std::string& path);

// Exact serialized byte counts of the on-disk format, by section. The
// header section includes the magic and the length prefix.
struct SizeReport {
    int64_t header_bytes = 0;
    int64_t weight_bytes = 0;
    int64_t bias_bytes = 0;
    int64_t total() const { return header_bytes + weight_bytes + bias_bytes; }
};

SizeReport size_report(const ModelParams& model, const ModelMeta& meta);
SizeReport size_report(const QuantizedModel& qmodel, const ModelMeta& meta);

}  // namespace imagesig

#endif  // IMAGESIG_MODEL_IO_HPP
