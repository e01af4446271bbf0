#include "imagesig/featurize.hpp"

#include <algorithm>
#include <atomic>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace fs = std::filesystem;

namespace imagesig {

void FeaturizeConfig::validate() const {
    if (height < 1 || width < 1) throw std::invalid_argument("FeaturizeConfig: resolution must be positive");
    if (depth < 1) throw std::invalid_argument("FeaturizeConfig: depth must be >= 1");
    if (two_direction && height != width)
        throw std::invalid_argument("FeaturizeConfig: two_direction requires a square resolution");
}

int64_t FeaturizeConfig::feature_width() const {
    if (log_signature) {
        int64_t total = 0;
        for (int64_t w : witt_dims(ImageTensor::channels, depth)) total += w;
        return total;
    }
    return tensor_dim(ImageTensor::channels, depth);
}

namespace {

void stream_features(const std::vector<PathStream>& streams, const FeaturizeConfig& cfg,
                     const LyndonBasis* basis, float* out, int width) {
    for (size_t i = 0; i < streams.size(); ++i) {
        TensorSeries sig = path_signature(streams[i], cfg.depth);
        float* row = out + i * width;
        if (cfg.log_signature) {
            LogSigVector ls = log_signature(sig, *basis);
            for (int c = 0; c < width; ++c) row[c] = static_cast<float>(ls.coords[c]);
        } else {
            // Levels 1..N concatenated in level order; level 0 dropped.
            int c = 0;
            for (int n = 1; n <= cfg.depth; ++n)
                for (double v : sig.level(n)) row[c++] = static_cast<float>(v);
        }
    }
}

}  // namespace

SignatureFeature featurize(const ImageTensor& img, const FeaturizeConfig& cfg) {
    cfg.validate();
    if (img.height != cfg.height || img.width != cfg.width)
        throw std::invalid_argument("featurize: image does not match configured resolution");

    SignatureFeature feat;
    feat.rows = cfg.rows();
    feat.width = static_cast<int>(cfg.feature_width());
    feat.data.assign(static_cast<size_t>(feat.rows) * feat.width, 0.0f);

    std::optional<LyndonBasis> basis;
    if (cfg.log_signature) basis.emplace(ImageTensor::channels, cfg.depth);

    auto horizontal = image_to_streams(img, StreamDirection::horizontal);
    stream_features(horizontal, cfg, basis ? &*basis : nullptr, feat.data.data(), feat.width);
    if (cfg.two_direction) {
        auto vertical = image_to_streams(img, StreamDirection::vertical);
        stream_features(vertical, cfg, basis ? &*basis : nullptr,
                        feat.data.data() + static_cast<size_t>(img.height) * feat.width, feat.width);
    }
    return feat;
}

std::vector<int64_t> FeatureSet::class_counts() const {
    std::vector<int64_t> counts(class_names.size(), 0);
    for (int32_t l : labels) counts[l]++;
    return counts;
}

namespace {

bool has_image_extension(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

struct DatasetListing {
    std::vector<std::string> class_names;
    std::vector<std::string> files;  // sorted within class, classes in order
    std::vector<int32_t> labels;
};

DatasetListing list_dataset(const std::string& root) {
    if (!fs::is_directory(root)) throw std::runtime_error("dataset root is not a directory: " + root);
    DatasetListing out;
    std::vector<std::string> class_dirs;
    for (const auto& entry : fs::directory_iterator(root))
        if (entry.is_directory()) class_dirs.push_back(entry.path().filename().string());
    std::sort(class_dirs.begin(), class_dirs.end());
    if (class_dirs.empty()) throw std::runtime_error("dataset root has no class subdirectories: " + root);

    for (size_t k = 0; k < class_dirs.size(); ++k) {
        std::vector<std::string> files;
        for (const auto& entry : fs::directory_iterator(fs::path(root) / class_dirs[k]))
            if (entry.is_regular_file() && has_image_extension(entry.path())) files.push_back(entry.path().string());
        std::sort(files.begin(), files.end());
        if (files.empty())
            throw std::runtime_error("class directory has no images: " + (fs::path(root) / class_dirs[k]).string());
        for (auto& f : files) {
            out.files.push_back(std::move(f));
            out.labels.push_back(static_cast<int32_t>(k));
        }
    }
    out.class_names = std::move(class_dirs);
    return out;
}

template <typename T>
void append_bytes(std::string& buf, const T& v) {
    buf.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace

uint64_t feature_cache_key(const FeaturizeConfig& cfg, const std::optional<AugmentSpec>& aug,
                           const std::vector<std::string>& files) {
    std::string buf = "IMSGFT01";
    append_bytes(buf, cfg.height);
    append_bytes(buf, cfg.width);
    append_bytes(buf, cfg.depth);
    append_bytes(buf, cfg.log_signature);
    append_bytes(buf, cfg.two_direction);
    append_bytes(buf, cfg.flatten);
    if (aug) {
        append_bytes(buf, aug->gaussian_noise);
        append_bytes(buf, aug->noise_sigma);
        append_bytes(buf, aug->brightness);
        append_bytes(buf, aug->brightness_lo);
        append_bytes(buf, aug->brightness_hi);
        append_bytes(buf, aug->flip_horizontal);
        append_bytes(buf, aug->flip_vertical);
        append_bytes(buf, aug->rotate);
        append_bytes(buf, aug->rotate_max_deg);
        append_bytes(buf, aug->color_invert);
        append_bytes(buf, aug->prob);
        append_bytes(buf, aug->seed);
    }
    for (const auto& f : files) {
        buf += f;
        buf += '\0';
    }
    return fnv1a64(buf);
}

FeatureSet featurize_dataset(const std::string& root, const FeaturizeConfig& cfg,
                             const std::optional<AugmentSpec>& aug, const std::string& cache_dir, int threads) {
    cfg.validate();
    const std::optional<AugmentSpec> effective_aug =
        (aug.has_value() && aug->any_enabled()) ? aug : std::nullopt;
    const bool augmenting = effective_aug.has_value();
    DatasetListing listing = list_dataset(root);

    fs::path cache_path;
    if (!cache_dir.empty()) {
        char name[32];
        std::snprintf(name, sizeof(name), "%016llx.imsgft",
                      static_cast<unsigned long long>(feature_cache_key(cfg, effective_aug, listing.files)));
        cache_path = fs::path(cache_dir) / name;
        if (fs::exists(cache_path)) {
            FeatureSet cached = read_feature_cache(cache_path.string());
            cached.from_cache = true;
            return cached;
        }
    }

    FeatureSet set;
    set.rows = cfg.rows();
    set.width = static_cast<int>(cfg.feature_width());
    set.depth = cfg.depth;
    set.flags = (cfg.log_signature ? kFeatureFlagLogSig : 0) | (cfg.two_direction ? kFeatureFlagTwoDirection : 0) |
                (augmenting ? kFeatureFlagAugmented : 0);
    set.class_names = listing.class_names;

    const size_t stride = static_cast<size_t>(set.rows) * set.width;
    const int copies = augmenting ? 2 : 1;  // original plus one augmented variant
    const size_t n_files = listing.files.size();
    set.data.assign(n_files * copies * stride, 0.0f);
    set.labels.assign(n_files * copies, 0);
    std::vector<char> ok(n_files, 0);

    std::atomic<size_t> next{0};
    std::atomic<int> skipped{0};
    auto worker = [&]() {
        for (size_t i = next.fetch_add(1); i < n_files; i = next.fetch_add(1)) {
            ImageTensor img;
            try {
                img = load_image(listing.files[i], cfg.height, cfg.width);
            } catch (const std::exception& e) {
                std::cerr << "warning: skipping " << listing.files[i] << ": " << e.what() << "\n";
                skipped.fetch_add(1);
                continue;
            }
            SignatureFeature f = featurize(img, cfg);
            std::memcpy(set.data.data() + i * copies * stride, f.data.data(), stride * sizeof(float));
            if (augmenting) {
                Rng draw(effective_aug->seed ^ fnv1a64(listing.files[i]), "augment");
                SignatureFeature fa = featurize(augment(img, *effective_aug, draw), cfg);
                std::memcpy(set.data.data() + (i * copies + 1) * stride, fa.data.data(), stride * sizeof(float));
            }
            for (int c = 0; c < copies; ++c) set.labels[i * copies + c] = listing.labels[i];
            ok[i] = 1;
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    set.skipped = skipped.load();

    if (set.skipped > 0) {
        // Compact out the rows of skipped images, preserving order.
        std::vector<float> data;
        std::vector<int32_t> labels;
        data.reserve(set.data.size());
        for (size_t i = 0; i < n_files; ++i) {
            if (!ok[i]) continue;
            data.insert(data.end(), set.data.begin() + i * copies * stride,
                        set.data.begin() + (i + 1) * copies * stride);
            for (int c = 0; c < copies; ++c) labels.push_back(set.labels[i * copies + c]);
        }
        set.data = std::move(data);
        set.labels = std::move(labels);
    }
    set.count = static_cast<int>(set.labels.size());

    if (!cache_path.empty()) {
        fs::create_directories(cache_path.parent_path());
        write_feature_cache(cache_path.string(), set);
    }
    return set;
}

namespace {

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::istream& is, T& v) {
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
}

}  // namespace

void write_feature_cache(const std::string& path, const FeatureSet& set) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open cache file for writing: " + path);
    os.write("IMSGFT01", 8);
    write_pod<uint32_t>(os, 1);  // version
    write_pod<uint32_t>(os, static_cast<uint32_t>(set.rows));
    write_pod<uint32_t>(os, static_cast<uint32_t>(set.width));
    write_pod<uint32_t>(os, static_cast<uint32_t>(set.count));
    write_pod<uint32_t>(os, static_cast<uint32_t>(set.depth));
    write_pod<uint32_t>(os, set.flags);
    os.write(reinterpret_cast<const char*>(set.data.data()), set.data.size() * sizeof(float));
    os.write(reinterpret_cast<const char*>(set.labels.data()), set.labels.size() * sizeof(int32_t));
    write_pod<uint32_t>(os, static_cast<uint32_t>(set.class_names.size()));
    for (const auto& name : set.class_names) {
        write_pod<uint32_t>(os, static_cast<uint32_t>(name.size()));
        os.write(name.data(), name.size());
    }
    if (!os) throw std::runtime_error("failed writing cache file: " + path);
}

FeatureSet read_feature_cache(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open cache file: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, "IMSGFT01", 8) != 0)
        throw std::runtime_error("not a feature cache file: " + path);
    uint32_t version, rows, width, count, depth, flags;
    read_pod(is, version);
    read_pod(is, rows);
    read_pod(is, width);
    read_pod(is, count);
    read_pod(is, depth);
    read_pod(is, flags);
    if (version != 1) throw std::runtime_error("unsupported cache version in " + path);

    FeatureSet set;
    set.rows = static_cast<int>(rows);
    set.width = static_cast<int>(width);
    set.count = static_cast<int>(count);
    set.depth = static_cast<int>(depth);
    set.flags = flags;
    set.data.resize(static_cast<size_t>(count) * rows * width);
    is.read(reinterpret_cast<char*>(set.data.data()), set.data.size() * sizeof(float));
    set.labels.resize(count);
    is.read(reinterpret_cast<char*>(set.labels.data()), set.labels.size() * sizeof(int32_t));
    uint32_t n_classes;
    read_pod(is, n_classes);
    for (uint32_t i = 0; i < n_classes && is; ++i) {
        uint32_t len;
        read_pod(is, len);
        std::string name(len, '\0');
        is.read(name.data(), len);
        set.class_names.push_back(std::move(name));
    }
    if (!is) throw std::runtime_error("truncated cache file: " + path);
    return set;
}

}  // namespace imagesig
