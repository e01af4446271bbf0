#ifndef IMAGESIG_FEATURIZE_HPP
#define IMAGESIG_FEATURIZE_HPP

#include "imagesig/image.hpp"
#include "imagesig/lyndon.hpp"
#include "imagesig/sig.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace imagesig {

struct FeaturizeConfig {
    int height = 64;
    int width = 64;
    int depth = 4;
    bool log_signature = false;
    bool two_direction = false;
    bool flatten = true;  // models consume the flattened R*Q' layout

    void validate() const;
    // Per-stream feature width Q': tensor_dim in signature mode, the Lyndon
    // basis size in log mode.
    int64_t feature_width() const;
    // Feature rows R: H for one direction, 2H for two directions.
    int rows() const { return two_direction ? 2 * height : height; }
};

// Per-image feature matrix: rows x width, row-major, 32-bit floats
// (signature arithmetic is done in 64-bit and narrowed on export).
struct SignatureFeature {
    int rows = 0;
    int width = 0;
    std::vector<float> data;

    float at(int r, int c) const { return data[static_cast<size_t>(r) * width + c]; }
};

SignatureFeature featurize(const ImageTensor& img, const FeaturizeConfig& cfg);

// Featurized directory dataset: count samples of rows x width features plus
// integer labels and sorted class names.
struct FeatureSet {
    int rows = 0;
    int width = 0;
    int count = 0;
    int depth = 0;
    uint32_t flags = 0;
    std::vector<float> data;  // count * rows * width
    std::vector<int32_t> labels;
    std::vector<std::string> class_names;
    int skipped = 0;        // unreadable images skipped with a warning
    bool from_cache = false;

    std::span<const float> sample(int i) const {
        const size_t stride = static_cast<size_t>(rows) * width;
        return {data.data() + i * stride, stride};
    }
    std::vector<int64_t> class_counts() const;
};

// Cache file flags.
constexpr uint32_t kFeatureFlagLogSig = 1u << 0;
constexpr uint32_t kFeatureFlagTwoDirection = 1u << 1;
constexpr uint32_t kFeatureFlagAugmented = 1u << 2;

// Featurize every image under root (one subdirectory per class, class index
// = sorted class-name order; *.png/*.jpg/*.jpeg). Deterministic: sorted path
// order, per-image seeded augmentation draws. When an AugmentSpec is given,
// each image additionally contributes one augmented copy. If cache_dir is
// non-empty the result is cached keyed by a digest of the config, augment
// spec and file list; a rerun loads the cache byte-identically.
FeatureSet featurize_dataset(const std::string& root, const FeaturizeConfig& cfg,
                             const std::optional<AugmentSpec>& aug = std::nullopt,
                             const std::string& cache_dir = "", int threads = 1);

// Binary feature-cache format. Layout: magic "IMSGFT01"; little-endian
// header {version, rows, width, count, depth, flags} as u32; count*rows*width
// f32 features; count i32 labels; class-name table (u32 count, then u32
// length + UTF-8 bytes per name).
void write_feature_cache(const std::string& path, const FeatureSet& set);
FeatureSet read_feature_cache(const std::string& path);

// Digest used for cache file naming.
uint64_t feature_cache_key(const FeaturizeConfig& cfg, const std::optional<AugmentSpec>& aug,
                           const std::vector<std::string>& files);

}  // namespace imagesig

#endif  // IMAGESIG_FEATURIZE_HPP
