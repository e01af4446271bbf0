#include "imagesig/image.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace imagesig {

namespace {

float clamp01(double v) { return static_cast<float>(std::min(1.0, std::max(0.0, v))); }

}  // namespace

ImageTensor ImageTensor::filled(int height, int width, float value) {
    ImageTensor img;
    img.height = height;
    img.width = width;
    img.data.assign(static_cast<size_t>(height) * width * channels, value);
    return img;
}

ImageTensor load_image(const std::string& path, int height, int width) {
    if (height < 1 || width < 1) throw std::invalid_argument("load_image: target resolution must be positive");
    cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);  // grayscale inputs are replicated to 3 channels
    if (bgr.empty()) throw std::runtime_error("failed to decode image: " + path);

    cv::Mat resized;
    cv::resize(bgr, resized, cv::Size(width, height), 0.0, 0.0, cv::INTER_LINEAR);

    ImageTensor img;
    img.height = height;
    img.width = width;
    img.data.resize(static_cast<size_t>(height) * width * ImageTensor::channels);
    constexpr float scale = 1.0f / 255.0f;
    for (int r = 0; r < height; ++r) {
        const cv::Vec3b* row = resized.ptr<cv::Vec3b>(r);
        for (int c = 0; c < width; ++c) {
            img.at(r, c, 0) = row[c][2] * scale;  // BGR -> RGB
            img.at(r, c, 1) = row[c][1] * scale;
            img.at(r, c, 2) = row[c][0] * scale;
        }
    }
    return img;
}

void save_png(const std::string& path, const ImageTensor& img) {
    cv::Mat bgr(img.height, img.width, CV_8UC3);
    for (int r = 0; r < img.height; ++r) {
        cv::Vec3b* row = bgr.ptr<cv::Vec3b>(r);
        for (int c = 0; c < img.width; ++c) {
            row[c][0] = static_cast<uint8_t>(std::lround(clamp01(img.at(r, c, 2)) * 255.0));
            row[c][1] = static_cast<uint8_t>(std::lround(clamp01(img.at(r, c, 1)) * 255.0));
            row[c][2] = static_cast<uint8_t>(std::lround(clamp01(img.at(r, c, 0)) * 255.0));
        }
    }
    if (!cv::imwrite(path, bgr)) throw std::runtime_error("failed to write image: " + path);
}

std::vector<PathStream> image_to_streams(const ImageTensor& img, StreamDirection direction) {
    std::vector<PathStream> streams;
    constexpr int C = ImageTensor::channels;
    if (direction == StreamDirection::horizontal) {
        streams.reserve(img.height);
        for (int r = 0; r < img.height; ++r) {
            PathStream s(C, img.width);
            for (int c = 0; c < img.width; ++c) {
                auto p = s.point(c);
                for (int ch = 0; ch < C; ++ch) p[ch] = img.at(r, c, ch);
            }
            streams.push_back(std::move(s));
        }
    } else {
        streams.reserve(img.width);
        for (int c = 0; c < img.width; ++c) {
            PathStream s(C, img.height);
            for (int r = 0; r < img.height; ++r) {
                auto p = s.point(r);
                for (int ch = 0; ch < C; ++ch) p[ch] = img.at(r, c, ch);
            }
            streams.push_back(std::move(s));
        }
    }
    return streams;
}

void AugmentSpec::validate() const {
    if (noise_sigma < 0.0) throw std::invalid_argument("AugmentSpec: noise sigma must be >= 0");
    if (brightness_lo <= 0.0 || brightness_hi < brightness_lo)
        throw std::invalid_argument("AugmentSpec: brightness range must be positive and ordered");
    if (rotate_max_deg < 0.0 || rotate_max_deg > 45.0)
        throw std::invalid_argument("AugmentSpec: rotation range must be within [0, 45] degrees");
    if (prob < 0.0 || prob > 1.0) throw std::invalid_argument("AugmentSpec: probability must be in [0, 1]");
}

ImageTensor flip_h(const ImageTensor& img) {
    ImageTensor out = img;
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c)
            for (int ch = 0; ch < ImageTensor::channels; ++ch)
                out.at(r, c, ch) = img.at(r, img.width - 1 - c, ch);
    return out;
}

ImageTensor flip_v(const ImageTensor& img) {
    ImageTensor out = img;
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c)
            for (int ch = 0; ch < ImageTensor::channels; ++ch)
                out.at(r, c, ch) = img.at(img.height - 1 - r, c, ch);
    return out;
}

ImageTensor invert_colors(const ImageTensor& img) {
    ImageTensor out = img;
    for (float& v : out.data) v = 1.0f - v;
    return out;
}

ImageTensor adjust_brightness(const ImageTensor& img, double factor) {
    ImageTensor out = img;
    for (float& v : out.data) v = clamp01(v * factor);
    return out;
}

ImageTensor add_gaussian_noise(const ImageTensor& img, double sigma, Rng& rng) {
    ImageTensor out = img;
    for (float& v : out.data) v = clamp01(v + sigma * rng.normal());
    return out;
}

ImageTensor rotate_image(const ImageTensor& img, double degrees) {
    const double rad = degrees * std::numbers::pi / 180.0;
    const double cs = std::cos(rad), sn = std::sin(rad);
    const double cx = (img.width - 1) / 2.0, cy = (img.height - 1) / 2.0;
    ImageTensor out = img;
    for (int r = 0; r < img.height; ++r) {
        for (int c = 0; c < img.width; ++c) {
            // Inverse mapping; nearest neighbor, coordinates clamped so the
            // border is filled by edge replication.
            const double dx = c - cx, dy = r - cy;
            const double sx = cs * dx + sn * dy + cx;
            const double sy = -sn * dx + cs * dy + cy;
            int si = std::clamp(static_cast<int>(std::lround(sy)), 0, img.height - 1);
            int sj = std::clamp(static_cast<int>(std::lround(sx)), 0, img.width - 1);
            for (int ch = 0; ch < ImageTensor::channels; ++ch) out.at(r, c, ch) = img.at(si, sj, ch);
        }
    }
    return out;
}

ImageTensor augment(const ImageTensor& img, const AugmentSpec& spec, Rng& rng) {
    spec.validate();
    ImageTensor out = img;
    if (spec.flip_horizontal && rng.uniform() < spec.prob) out = flip_h(out);
    if (spec.flip_vertical && rng.uniform() < spec.prob) out = flip_v(out);
    if (spec.rotate && rng.uniform() < spec.prob)
        out = rotate_image(out, rng.uniform(-spec.rotate_max_deg, spec.rotate_max_deg));
    if (spec.brightness && rng.uniform() < spec.prob)
        out = adjust_brightness(out, rng.uniform(spec.brightness_lo, spec.brightness_hi));
    if (spec.gaussian_noise && rng.uniform() < spec.prob) out = add_gaussian_noise(out, spec.noise_sigma, rng);
    if (spec.color_invert && rng.uniform() < spec.prob) out = invert_colors(out);
    return out;
}

}  // namespace imagesig
