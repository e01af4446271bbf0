#include "imagesig/train_eval.hpp"

#include "imagesig/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace imagesig {

void TrainConfig::validate() const {
    if (batch < 1) throw std::invalid_argument("TrainConfig: batch size must be >= 1");
    if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
        throw std::invalid_argument("TrainConfig: validation fraction must be in (0, 1)");
    if (gamma < 0.0) throw std::invalid_argument("TrainConfig: gamma must be >= 0");
    if (lr <= 0.0) throw std::invalid_argument("TrainConfig: learning rate must be positive");
}

SplitIndices split(std::span<const int32_t> labels, double fraction, uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw std::invalid_argument("split: fraction must be in (0, 1)");
    int32_t max_label = -1;
    for (int32_t l : labels) max_label = std::max(max_label, l);
    std::vector<std::vector<int>> by_class(max_label + 1);
    for (size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(static_cast<int>(i));

    Rng rng(seed, "split");
    SplitIndices out;
    for (auto& members : by_class) {
        rng.shuffle(members.data(), members.size());
        const size_t n_val = static_cast<size_t>(std::lround(fraction * static_cast<double>(members.size())));
        for (size_t i = 0; i < members.size(); ++i)
            (i < n_val ? out.validation : out.train).push_back(members[i]);
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.validation.begin(), out.validation.end());
    return out;
}

std::vector<double> class_alpha(std::span<const int64_t> class_counts) {
    const int k = static_cast<int>(class_counts.size());
    if (k < 1) throw std::invalid_argument("class_alpha: need at least one class");
    int64_t total = 0;
    for (int64_t c : class_counts) {
        if (c < 1) throw std::invalid_argument("class_alpha: all counts must be >= 1");
        total += c;
    }
    std::vector<double> alpha(k);
    for (int c = 0; c < k; ++c) alpha[c] = static_cast<double>(total) / (static_cast<double>(k) * class_counts[c]);
    return alpha;
}

namespace {

struct Subset {
    std::vector<float> data;
    std::vector<int32_t> labels;
    int rows = 0, width = 0;

    FeatureBatch batch() const {
        return {static_cast<int>(labels.size()), rows, width, data.data()};
    }
};

Subset gather(const FeatureSet& set, std::span<const int> indices) {
    Subset s;
    s.rows = set.rows;
    s.width = set.width;
    const size_t stride = static_cast<size_t>(set.rows) * set.width;
    s.data.resize(indices.size() * stride);
    s.labels.resize(indices.size());
    for (size_t i = 0; i < indices.size(); ++i) {
        auto src = set.sample(indices[i]);
        std::copy(src.begin(), src.end(), s.data.begin() + i * stride);
        s.labels[i] = set.labels[indices[i]];
    }
    return s;
}

// Mean focal loss and argmax accuracy over a subset, evaluated in chunks.
std::pair<double, double> eval_loss_acc(const ModelParams& model, const Subset& s,
                                        std::span<const double> alpha, double gamma, int chunk = 512) {
    const int n = static_cast<int>(s.labels.size());
    const size_t stride = static_cast<size_t>(s.rows) * s.width;
    double loss_sum = 0.0;
    int64_t correct = 0;
    for (int start = 0; start < n; start += chunk) {
        const int count = std::min(chunk, n - start);
        FeatureBatch fb{count, s.rows, s.width, s.data.data() + start * stride};
        Tensor probs = forward(model, fb);
        std::span<const int32_t> lbl(s.labels.data() + start, static_cast<size_t>(count));
        loss_sum += focal_loss(probs, lbl, alpha, gamma).loss * count;
        const int k = model.spec.classes;
        for (int i = 0; i < count; ++i) {
            const double* row = probs.data.data() + static_cast<size_t>(i) * k;
            const int pred = static_cast<int>(std::max_element(row, row + k) - row);
            if (pred == lbl[i]) ++correct;
        }
    }
    return {loss_sum / n, static_cast<double>(correct) / n};
}

}  // namespace

TrainResult train(const FeatureSet& data, const ModelSpec& spec, const TrainConfig& cfg) {
    cfg.validate();
    spec.validate();
    if (data.count < 2) throw std::invalid_argument("train: need at least two samples");
    if (data.rows != spec.rows || data.width != spec.width)
        throw std::invalid_argument("train: feature dimensions do not match model spec");
    if (static_cast<int>(data.class_names.size()) > spec.classes)
        throw std::invalid_argument("train: more classes in data than in model spec");

    const auto t_start = std::chrono::steady_clock::now();

    SplitIndices idx = split(std::span<const int32_t>(data.labels), cfg.val_fraction, cfg.seed);
    if (idx.train.empty() || idx.validation.empty())
        throw std::invalid_argument("train: split produced an empty subset");
    Subset train_set = gather(data, idx.train);
    Subset val_set = gather(data, idx.validation);

    TrainResult result;
    result.class_counts.assign(spec.classes, 0);
    for (int32_t l : train_set.labels) result.class_counts[l]++;
    std::vector<int64_t> nonzero = result.class_counts;
    for (int64_t& c : nonzero) c = std::max<int64_t>(c, 1);  // classes absent from training get weight of a singleton
    result.alpha = class_alpha(nonzero);

    result.model = build_model(spec, cfg.seed);
    AdamState adam = AdamState::init(result.model);
    AdamHyper hyper;
    hyper.lr = cfg.lr;

    const int n_train = static_cast<int>(train_set.labels.size());
    int batch_size = cfg.batch;
    if (batch_size > n_train) {
        std::cerr << "warning: batch size " << batch_size << " exceeds training set (" << n_train
                  << "); clamping to full batch\n";
        batch_size = n_train;
    }

    Rng shuffle_rng(cfg.seed, "shuffle");
    std::vector<int> order(n_train);
    std::iota(order.begin(), order.end(), 0);

    const size_t stride = static_cast<size_t>(data.rows) * data.width;
    std::vector<float> batch_data(static_cast<size_t>(batch_size) * stride);
    std::vector<int32_t> batch_labels(batch_size);
    ForwardCache cache;
    double best_val_acc = -1.0;
    std::vector<Tensor> best_params;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order.data(), order.size());
        double loss_sum = 0.0;
        int64_t correct = 0;
        for (int start = 0; start < n_train; start += batch_size) {
            const int count = std::min(batch_size, n_train - start);
            for (int i = 0; i < count; ++i) {
                const int src = order[start + i];
                std::copy_n(train_set.data.begin() + src * stride, stride, batch_data.begin() + i * stride);
                batch_labels[i] = train_set.labels[src];
            }
            FeatureBatch fb{count, data.rows, data.width, batch_data.data()};
            Tensor probs = forward(result.model, fb, &cache);
            std::span<const int32_t> lbl(batch_labels.data(), static_cast<size_t>(count));
            FocalLossResult fl = focal_loss(probs, lbl, result.alpha, cfg.gamma);
            loss_sum += fl.loss * count;
            for (int i = 0; i < count; ++i) {
                const double* row = probs.data.data() + static_cast<size_t>(i) * spec.classes;
                const int pred = static_cast<int>(std::max_element(row, row + spec.classes) - row);
                if (pred == lbl[i]) ++correct;
            }
            std::vector<Tensor> grads = backward(result.model, fb, cache, fl.dlogits);
            adam_step(result.model, grads, adam, hyper);
        }

        EpochStats row;
        row.epoch = epoch;
        row.train_loss = loss_sum / n_train;
        row.train_acc = static_cast<double>(correct) / n_train;
        std::tie(row.val_loss, row.val_acc) = eval_loss_acc(result.model, val_set, result.alpha, cfg.gamma);
        result.history.push_back(row);
        if (row.val_acc > best_val_acc) {
            best_val_acc = row.val_acc;
            result.best_epoch = epoch;
            result.best_params = result.model.tensors;
        }
        if (cfg.verbose) {
            std::fprintf(stderr, "epoch %4d  train_loss %.6f acc %.4f  val_loss %.6f acc %.4f\n", epoch,
                         row.train_loss, row.train_acc, row.val_loss, row.val_acc);
        }
    }

    if (result.best_epoch >= 0) result.model.tensors = result.best_params;
    result.best_params.clear();
    result.train_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return result;
}

std::pair<std::vector<RocPoint>, double> roc_auc(std::span<const double> scores, std::span<const int32_t> labels) {
    if (scores.size() != labels.size() || scores.empty())
        throw std::invalid_argument("roc_auc: scores and labels must be non-empty and aligned");
    const size_t n = scores.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return scores[a] > scores[b]; });

    int64_t pos = 0, neg = 0;
    for (int32_t l : labels) (l == 1 ? pos : neg)++;
    const double pos_d = pos > 0 ? static_cast<double>(pos) : 1.0;
    const double neg_d = neg > 0 ? static_cast<double>(neg) : 1.0;

    std::vector<RocPoint> points{{std::numeric_limits<double>::infinity(), 0.0, 0.0}};
    int64_t tp = 0, fp = 0;
    for (size_t i = 0; i < n; ++i) {
        (labels[order[i]] == 1 ? tp : fp)++;
        // Emit one point per distinct threshold, ties grouped.
        if (i + 1 < n && scores[order[i + 1]] == scores[order[i]]) continue;
        points.push_back({scores[order[i]], fp / neg_d, tp / pos_d});
    }
    double auc = 0.0;
    for (size_t i = 1; i < points.size(); ++i)
        auc += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) * 0.5;
    return {std::move(points), auc};
}

double average_precision(std::span<const double> scores, std::span<const int32_t> labels) {
    if (scores.size() != labels.size() || scores.empty())
        throw std::invalid_argument("average_precision: scores and labels must be non-empty and aligned");
    const size_t n = scores.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return scores[a] > scores[b]; });

    int64_t pos = 0;
    for (int32_t l : labels) pos += (l == 1);
    if (pos == 0) return 0.0;

    double ap = 0.0, prev_recall = 0.0;
    int64_t tp = 0, fp = 0;
    for (size_t i = 0; i < n; ++i) {
        (labels[order[i]] == 1 ? tp : fp)++;
        if (i + 1 < n && scores[order[i + 1]] == scores[order[i]]) continue;
        const double recall = static_cast<double>(tp) / pos;
        const double precision = static_cast<double>(tp) / (tp + fp);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    return ap;
}

Predictions predict_batch(const ModelParams& model, const FeatureBatch& batch, int chunk) {
    Predictions out;
    const int k = model.spec.classes;
    out.classes = k;
    out.argmax.resize(batch.count);
    out.scores.resize(batch.count);
    out.probs.resize(static_cast<size_t>(batch.count) * k);
    const size_t stride = static_cast<size_t>(batch.rows) * batch.width;
    for (int start = 0; start < batch.count; start += chunk) {
        const int count = std::min(chunk, batch.count - start);
        FeatureBatch fb{count, batch.rows, batch.width, batch.data + start * stride};
        Tensor probs = forward(model, fb);
        for (int i = 0; i < count; ++i) {
            const double* row = probs.data.data() + static_cast<size_t>(i) * k;
            std::copy(row, row + k, out.probs.begin() + static_cast<size_t>(start + i) * k);
            out.argmax[start + i] = static_cast<int32_t>(std::max_element(row, row + k) - row);
            out.scores[start + i] = row[std::min(1, k - 1)];
        }
    }
    return out;
}

namespace {

struct BinaryCounts {
    int64_t tp = 0, fp = 0, tn = 0, fn = 0;
    double f1() const {
        const double precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
        const double recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
        return precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    }
};

BinaryCounts confusion(std::span<const int32_t> pred, std::span<const int32_t> truth, int32_t positive) {
    BinaryCounts c;
    for (size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred[i] == positive, t = truth[i] == positive;
        if (p && t) c.tp++;
        else if (p && !t) c.fp++;
        else if (!p && t) c.fn++;
        else c.tn++;
    }
    return c;
}

}  // namespace

Metrics evaluate(const ModelParams& model, const FeatureBatch& batch, std::span<const int32_t> labels) {
    if (static_cast<int>(labels.size()) != batch.count)
        throw std::invalid_argument("evaluate: label count does not match batch");
    Predictions pred = predict_batch(model, batch);

    Metrics m;
    int64_t correct = 0;
    for (int i = 0; i < batch.count; ++i) correct += (pred.argmax[i] == labels[i]);
    m.accuracy = static_cast<double>(correct) / batch.count;

    const int k = model.spec.classes;
    if (k == 2) {
        BinaryCounts c = confusion(pred.argmax, labels, 1);
        m.tp = c.tp;
        m.fp = c.fp;
        m.tn = c.tn;
        m.fn = c.fn;
        m.f1 = c.f1();
        std::tie(m.roc, m.auc) = roc_auc(pred.scores, labels);
        m.average_precision = average_precision(pred.scores, labels);
    } else {
        // Macro-averaged one-vs-rest; the stored ROC curve is class 1's.
        double f1_sum = 0.0, ap_sum = 0.0, auc_sum = 0.0;
        std::vector<double> scores(batch.count);
        std::vector<int32_t> ovr(batch.count);
        for (int c = 0; c < k; ++c) {
            for (int i = 0; i < batch.count; ++i) {
                scores[i] = pred.probs[static_cast<size_t>(i) * k + c];
                ovr[i] = labels[i] == c ? 1 : 0;
            }
            std::vector<int32_t> pred_ovr(batch.count);
            for (int i = 0; i < batch.count; ++i) pred_ovr[i] = pred.argmax[i] == c ? 1 : 0;
            f1_sum += confusion(pred_ovr, ovr, 1).f1();
            auto [roc, auc] = roc_auc(scores, ovr);
            auc_sum += auc;
            ap_sum += average_precision(scores, ovr);
            if (c == 1) m.roc = std::move(roc);
        }
        m.f1 = f1_sum / k;
        m.auc = auc_sum / k;
        m.average_precision = ap_sum / k;
    }
    return m;
}

void write_history_csv(const std::string& path, std::span<const EpochStats> history) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << "epoch,train_loss,train_acc,val_loss,val_acc\n";
    char line[256];
    for (const EpochStats& r : history) {
        std::snprintf(line, sizeof(line), "%d,%.9g,%.9g,%.9g,%.9g\n", r.epoch, r.train_loss, r.train_acc,
                      r.val_loss, r.val_acc);
        os << line;
    }
}

void write_roc_csv(const std::string& path, std::span<const RocPoint> roc) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << "threshold,fpr,tpr\n";
    char line[256];
    for (const RocPoint& p : roc) {
        std::snprintf(line, sizeof(line), "%.9g,%.9g,%.9g\n", p.threshold, p.fpr, p.tpr);
        os << line;
    }
}

void write_metrics_json(const std::string& path, const Metrics& m, int64_t params, int64_t flops,
                        int64_t model_bytes, double train_seconds) {
    nlohmann::json j{{"acc", m.accuracy},   {"ap", m.average_precision}, {"f1", m.f1},
                     {"auc", m.auc},        {"params", params},          {"flops", flops},
                     {"model_bytes", model_bytes}, {"train_seconds", train_seconds}};
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << j.dump(2) << "\n";
}

}  // namespace imagesig
