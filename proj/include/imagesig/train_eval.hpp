#ifndef IMAGESIG_TRAIN_EVAL_HPP
#define IMAGESIG_TRAIN_EVAL_HPP

#include "imagesig/featurize.hpp"
#include "imagesig/nn.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace imagesig {

struct TrainConfig {
    int batch = 3000;
    int epochs = 300;
    double lr = 1e-3;
    double gamma = 2.0;       // focal focusing parameter
    uint64_t seed = 0;
    double val_fraction = 0.2;
    bool augment = false;     // consumed at featurization time
    bool verbose = false;

    void validate() const;
};

// Stratified, seed-deterministic index split; disjoint and exhaustive, the
// validation share of each class is round(fraction * count).
struct SplitIndices {
    std::vector<int> train;
    std::vector<int> validation;
};
SplitIndices split(std::span<const int32_t> labels, double fraction, uint64_t seed);

// Inverse-frequency class weights: alpha_c = N_total / (K * N_c).
std::vector<double> class_alpha(std::span<const int64_t> class_counts);

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;
};

struct TrainResult {
    ModelParams model;  // parameters with the best validation accuracy
    std::vector<EpochStats> history;
    std::vector<double> alpha;
    std::vector<int64_t> class_counts;
    double train_seconds = 0.0;
    int best_epoch = -1;
};

// Mini-batch Adam on class-weighted focal loss with an internal stratified
// train/validation split; per-epoch shuffling is seeded, so runs with the
// same seed are bit-identical. A batch size larger than the training set is
// clamped to full batch with a warning. epochs = 0 returns the initialized
// model and empty history.
TrainResult train(const FeatureSet& data, const ModelSpec& spec, const TrainConfig& cfg);

struct RocPoint {
    double threshold = 0.0;
    double fpr = 0.0;
    double tpr = 0.0;
};

struct Metrics {
    double accuracy = 0.0;
    double average_precision = 0.0;
    double f1 = 0.0;
    double auc = 0.0;
    std::vector<RocPoint> roc;  // from (0,0) to (1,1)
    int64_t tp = 0, fp = 0, tn = 0, fn = 0;  // binary confusion at argmax
};

// Threshold sweep over distinct scores (ties grouped), trapezoidal AUC.
std::pair<std::vector<RocPoint>, double> roc_auc(std::span<const double> scores, std::span<const int32_t> labels);

// Step-wise AP = sum (R_k - R_{k-1}) * P_k over the descending-score sweep,
// no interpolation.
double average_precision(std::span<const double> scores, std::span<const int32_t> labels);

// Accuracy at argmax; AP/F1/ROC on the positive-class probability (class 1)
// for binary problems, macro-averaged one-vs-rest for more classes.
Metrics evaluate(const ModelParams& model, const FeatureBatch& batch, std::span<const int32_t> labels);

// Batched helper: argmax predictions and positive-class scores.
struct Predictions {
    std::vector<int32_t> argmax;
    std::vector<double> scores;       // probability of class 1 (binary)
    std::vector<double> probs;        // count x classes, row-major
    int classes = 0;
};
Predictions predict_batch(const ModelParams& model, const FeatureBatch& batch, int chunk = 256);

// Output files.
void write_history_csv(const std::string& path, std::span<const EpochStats> history);
void write_roc_csv(const std::string& path, std::span<const RocPoint> roc);
void write_metrics_json(const std::string& path, const Metrics& m, int64_t params, int64_t flops,
                        int64_t model_bytes, double train_seconds);

}  // namespace imagesig

#endif  // IMAGESIG_TRAIN_EVAL_HPP
