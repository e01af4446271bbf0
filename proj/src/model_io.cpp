#include "imagesig/model_io.hpp"

#include <json.hpp>

#include <cstring>
#include <fstream>
#include <stdexcept>

using nlohmann::json;

namespace imagesig {

namespace {

constexpr char kFloatMagic[8] = {'I', 'M', 'G', 'S', 'I', 'G', '0', '1'};
constexpr char kQuantMagic[8] = {'I', 'M', 'G', 'S', 'I', 'G', 'Q', '1'};

json spec_to_json(const ModelSpec& s) {
    return json{{"encoder", encoder_name(s.encoder)}, {"rows", s.rows},          {"width", s.width},
                {"neurons", s.neurons},               {"classes", s.classes},    {"conv1_filters", s.conv1_filters},
                {"conv2_filters", s.conv2_filters},   {"kernel", s.kernel},      {"pool", s.pool}};
}

ModelSpec spec_from_json(const json& j) {
    ModelSpec s;
    s.encoder = encoder_from_name(j.at("encoder").get<std::string>());
    s.rows = j.at("rows").get<int>();
    s.width = j.at("width").get<int>();
    s.neurons = j.at("neurons").get<int>();
    s.classes = j.at("classes").get<int>();
    s.conv1_filters = j.at("conv1_filters").get<int>();
    s.conv2_filters = j.at("conv2_filters").get<int>();
    s.kernel = j.at("kernel").get<int>();
    s.pool = j.at("pool").get<int>();
    return s;
}

json featurize_to_json(const FeaturizeConfig& f) {
    return json{{"height", f.height},
                {"width", f.width},
                {"depth", f.depth},
                {"log_signature", f.log_signature},
                {"two_direction", f.two_direction},
                {"flatten", f.flatten}};
}

FeaturizeConfig featurize_from_json(const json& j) {
    FeaturizeConfig f;
    f.height = j.at("height").get<int>();
    f.width = j.at("width").get<int>();
    f.depth = j.at("depth").get<int>();
    f.log_signature = j.at("log_signature").get<bool>();
    f.two_direction = j.at("two_direction").get<bool>();
    f.flatten = j.at("flatten").get<bool>();
    return f;
}

json meta_to_json(const ModelMeta& meta) {
    json j;
    j["featurize"] = featurize_to_json(meta.featurize);
    j["classes"] = meta.class_names;
    if (meta.metrics) {
        const MetricsSnapshot& m = *meta.metrics;
        j["metrics"] = json{{"acc", m.acc}, {"ap", m.ap},         {"f1", m.f1},
                            {"auc", m.auc}, {"params", m.params}, {"flops", m.flops}};
    }
    if (meta.train) {
        const TrainInfo& t = *meta.train;
        j["train"] = json{{"epochs", t.epochs},
                          {"batch", t.batch},
                          {"lr", t.lr},
                          {"gamma", t.gamma},
                          {"seed", t.seed},
                          {"val_fraction", t.val_fraction},
                          {"augmented", t.augmented},
                          {"alpha", t.alpha},
                          {"class_counts", t.class_counts}};
    }
    return j;
}

ModelMeta meta_from_json(const json& j) {
    ModelMeta meta;
    meta.featurize = featurize_from_json(j.at("featurize"));
    meta.class_names = j.at("classes").get<std::vector<std::string>>();
    if (j.contains("metrics")) {
        MetricsSnapshot m;
        const json& jm = j.at("metrics");
        m.acc = jm.at("acc").get<double>();
        m.ap = jm.at("ap").get<double>();
        m.f1 = jm.at("f1").get<double>();
        m.auc = jm.at("auc").get<double>();
        m.params = jm.at("params").get<int64_t>();
        m.flops = jm.at("flops").get<int64_t>();
        meta.metrics = m;
    }
    if (j.contains("train")) {
        TrainInfo t;
        const json& jt = j.at("train");
        t.epochs = jt.at("epochs").get<int>();
        t.batch = jt.at("batch").get<int>();
        t.lr = jt.at("lr").get<double>();
        t.gamma = jt.at("gamma").get<double>();
        t.seed = jt.at("seed").get<uint64_t>();
        t.val_fraction = jt.at("val_fraction").get<double>();
        t.augmented = jt.at("augmented").get<bool>();
        t.alpha = jt.at("alpha").get<std::vector<double>>();
        t.class_counts = jt.at("class_counts").get<std::vector<int64_t>>();
        meta.train = t;
    }
    return meta;
}

struct SerializedModel {
    std::string header;  // magic + u32 length + JSON
    std::string weights;
    std::string biases;
    std::string blob;  // all tensor payloads in spec order
};

void append_f32(std::string& out, const std::vector<double>& values) {
    for (double v : values) {
        const float f = static_cast<float>(v);
        out.append(reinterpret_cast<const char*>(&f), sizeof(float));
    }
}

SerializedModel serialize(const ModelParams* model, const QuantizedModel* qmodel, const ModelMeta& meta) {
    const bool quantized = qmodel != nullptr;
    const ModelSpec& spec = quantized ? qmodel->spec : model->spec;
    const std::vector<std::string>& names = quantized ? qmodel->names : model->names;

    json j = meta_to_json(meta);
    j["format_version"] = 1;
    j["kind"] = quantized ? "quantized" : "float";
    j["producer"] = "imagesig 0.1.0";
    j["spec"] = spec_to_json(spec);

    SerializedModel out;
    json tensors = json::array();
    int64_t offset = 0;
    const size_t n_tensors = quantized ? qmodel->weights.size() * 2 : model->tensors.size();
    for (size_t i = 0; i < n_tensors; ++i) {
        const bool is_weight = i % 2 == 0;
        json tj;
        tj["name"] = names[i];
        std::string payload;
        if (quantized && is_weight) {
            const QuantizedTensor& q = qmodel->weights[i / 2];
            tj["shape"] = q.shape;
            tj["dtype"] = "int8";
            tj["scale"] = q.scale;
            tj["params"] = q.size();
            payload.assign(reinterpret_cast<const char*>(q.values.data()), q.values.size());
        } else {
            const Tensor& t = quantized ? qmodel->biases[i / 2] : model->tensors[i];
            tj["shape"] = t.shape;
            tj["dtype"] = "float32";
            tj["params"] = t.size();
            append_f32(payload, t.data);
        }
        tj["offset"] = offset;
        tj["bytes"] = static_cast<int64_t>(payload.size());
        offset += static_cast<int64_t>(payload.size());
        tensors.push_back(std::move(tj));
        if (is_weight)
            out.weights += payload;
        else
            out.biases += payload;
        out.blob += payload;
    }
    j["tensors"] = std::move(tensors);

    const std::string header_json = j.dump(2);
    out.header.append(quantized ? kQuantMagic : kFloatMagic, 8);
    const uint32_t len = static_cast<uint32_t>(header_json.size());
    out.header.append(reinterpret_cast<const char*>(&len), sizeof(len));
    out.header += header_json;
    return out;
}

void write_file(const std::string& path, const SerializedModel& s) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open model file for writing: " + path);
    os.write(s.header.data(), static_cast<std::streamsize>(s.header.size()));
    os.write(s.blob.data(), static_cast<std::streamsize>(s.blob.size()));
    if (!os) throw std::runtime_error("failed writing model file: " + path);
}

}  // namespace

void save_model(const std::string& path, const ModelParams& model, const ModelMeta& meta) {
    write_file(path, serialize(&model, nullptr, meta));
}

void save_quantized(const std::string& path, const QuantizedModel& qmodel, const ModelMeta& meta) {
    write_file(path, serialize(nullptr, &qmodel, meta));
}

LoadedModel load_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open model file: " + path);
    char magic[8];
    is.read(magic, 8);
    bool quantized;
    if (is && std::memcmp(magic, kFloatMagic, 8) == 0)
        quantized = false;
    else if (is && std::memcmp(magic, kQuantMagic, 8) == 0)
        quantized = true;
    else
        throw std::runtime_error("not a model file (bad magic): " + path);

    uint32_t len = 0;
    is.read(reinterpret_cast<char*>(&len), sizeof(len));
    std::string header_json(len, '\0');
    is.read(header_json.data(), len);
    if (!is) throw std::runtime_error("truncated model header: " + path);
    const json j = json::parse(header_json);

    LoadedModel out;
    out.quantized = quantized;
    out.meta = meta_from_json(j);
    const ModelSpec spec = spec_from_json(j.at("spec"));

    auto read_exact = [&is, &path](char* dst, std::streamsize n) {
        is.read(dst, n);
        if (!is) throw std::runtime_error("truncated model payload: " + path);
    };

    if (!quantized) {
        out.params.spec = spec;
        for (const json& tj : j.at("tensors")) {
            Tensor t(tj.at("shape").get<std::vector<int>>());
            std::vector<float> buf(t.data.size());
            read_exact(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
            for (size_t i = 0; i < buf.size(); ++i) t.data[i] = buf[i];
            out.params.names.push_back(tj.at("name").get<std::string>());
            out.params.tensors.push_back(std::move(t));
        }
    } else {
        QuantizedModel qm;
        qm.spec = spec;
        for (const json& tj : j.at("tensors")) {
            qm.names.push_back(tj.at("name").get<std::string>());
            const auto shape = tj.at("shape").get<std::vector<int>>();
            if (tj.at("dtype").get<std::string>() == "int8") {
                QuantizedTensor q;
                q.shape = shape;
                q.scale = tj.at("scale").get<double>();
                int64_t n = 1;
                for (int d : shape) n *= d;
                q.values.resize(n);
                read_exact(reinterpret_cast<char*>(q.values.data()), n);
                qm.weights.push_back(std::move(q));
            } else {
                Tensor t(shape);
                std::vector<float> buf(t.data.size());
                read_exact(reinterpret_cast<char*>(buf.data()),
                           static_cast<std::streamsize>(buf.size() * sizeof(float)));
                for (size_t i = 0; i < buf.size(); ++i) t.data[i] = buf[i];
                qm.biases.push_back(std::move(t));
            }
        }
        out.params = dequantize(qm);
        out.qmodel = std::move(qm);
    }
    return out;
}

namespace {

SizeReport report_from(const SerializedModel& s) {
    SizeReport r;
    r.header_bytes = static_cast<int64_t>(s.header.size());
    r.weight_bytes = static_cast<int64_t>(s.weights.size());
    r.bias_bytes = static_cast<int64_t>(s.biases.size());
    return r;
}

}  // namespace

SizeReport size_report(const ModelParams& model, const ModelMeta& meta) {
    return report_from(serialize(&model, nullptr, meta));
}

SizeReport size_report(const QuantizedModel& qmodel, const ModelMeta& meta) {
    return report_from(serialize(nullptr, &qmodel, meta));
}

}  // namespace imagesig
