#ifndef IMAGESIG_IMAGE_HPP
#define IMAGESIG_IMAGE_HPP

#include "imagesig/rng.hpp"
#include "imagesig/sig.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace imagesig {

enum class StreamDirection { horizontal, vertical };

// Decoded RGB image, HWC layout, values in [0, 1].
struct ImageTensor {
    int height = 0;
    int width = 0;
    static constexpr int channels = 3;
    std::vector<float> data;  // height * width * 3

    float& at(int r, int c, int ch) { return data[(static_cast<size_t>(r) * width + c) * channels + ch]; }
    float at(int r, int c, int ch) const { return data[(static_cast<size_t>(r) * width + c) * channels + ch]; }

    static ImageTensor filled(int height, int width, float value = 0.0f);
};

// Decode a PNG/JPEG file, convert to 3-channel RGB, bilinearly resize to
// (height, width) and scale to [0, 1]. Throws std::runtime_error naming the
// file on decode failure.
ImageTensor load_image(const std::string& path, int height, int width);

// Encode an ImageTensor as PNG (8-bit RGB).
void save_png(const std::string& path, const ImageTensor& img);

// Horizontal: H streams of length W (row i is stream i); vertical: W
// streams of length H (column j is stream j). Channels are the path depth.
std::vector<PathStream> image_to_streams(const ImageTensor& img, StreamDirection direction);

// Label-preserving perturbations applied in image space before signing.
// Each enabled transform fires independently with probability `prob`.
struct AugmentSpec {
    bool gaussian_noise = false;
    double noise_sigma = 0.02;
    bool brightness = false;
    double brightness_lo = 0.7;
    double brightness_hi = 1.3;
    bool flip_horizontal = false;
    bool flip_vertical = false;
    bool rotate = false;
    double rotate_max_deg = 15.0;  // angle drawn uniformly in [-max, +max]
    bool color_invert = false;
    double prob = 0.5;
    uint64_t seed = 0;

    bool any_enabled() const {
        return gaussian_noise || brightness || flip_horizontal || flip_vertical || rotate || color_invert;
    }
    void validate() const;  // sigma >= 0, brightness range positive, |angle| <= 45
};

// Individual transforms; augment() composes them from seeded draws.
ImageTensor flip_h(const ImageTensor& img);
ImageTensor flip_v(const ImageTensor& img);
ImageTensor invert_colors(const ImageTensor& img);
ImageTensor adjust_brightness(const ImageTensor& img, double factor);
ImageTensor add_gaussian_noise(const ImageTensor& img, double sigma, Rng& rng);
// Rotation about the image center, nearest-neighbor sampling with border
// filled by edge replication.
ImageTensor rotate_image(const ImageTensor& img, double degrees);

ImageTensor augment(const ImageTensor& img, const AugmentSpec& spec, Rng& rng);

}  // namespace imagesig

#endif  // IMAGESIG_IMAGE_HPP
