#ifndef IMAGESIG_SIG_HPP
#define IMAGESIG_SIG_HPP

#include <cstdint>
#include <span>
#include <vector>

namespace imagesig {

// Element of the tensor algebra over R^C truncated at a given depth.
// Level n is a dense block of C^n coefficients indexed by the word
// (i1..in), i in 1..C, laid out lexicographically row-major:
//   index = sum_k (i_k - 1) * C^(n-k).
// Level 0 is the single scalar; it equals 1 for every group-like element
// produced by the signature operations.
class TensorSeries {
public:
    TensorSeries(int channels, int depth);

    static TensorSeries identity(int channels, int depth);

    int channels() const { return channels_; }
    int depth() const { return depth_; }

    std::span<double> level(int n) { return {data_.data() + offsets_[n], block_size(n)}; }
    std::span<const double> level(int n) const { return {data_.data() + offsets_[n], block_size(n)}; }
    size_t block_size(int n) const { return offsets_[n + 1] - offsets_[n]; }

    // All levels, contiguous in increasing level order (level 0 first).
    std::span<double> coeffs() { return data_; }
    std::span<const double> coeffs() const { return data_; }

    TensorSeries& operator+=(const TensorSeries& other);
    TensorSeries& operator*=(double s);

private:
    int channels_;
    int depth_;
    std::vector<size_t> offsets_;  // offsets_[n] = start of level n; size depth+2
    std::vector<double> data_;
};

// Ordered sequence of C-dimensional points; one image row or column.
// Point i occupies points()[i*C .. i*C+C).
class PathStream {
public:
    PathStream(int channels, int length) : channels_(channels), pts_(static_cast<size_t>(channels) * length) {}
    PathStream(int channels, std::vector<double> pts);

    int channels() const { return channels_; }
    int length() const { return static_cast<int>(pts_.size()) / channels_; }

    std::span<double> point(int i) { return {pts_.data() + static_cast<size_t>(i) * channels_, static_cast<size_t>(channels_)}; }
    std::span<const double> point(int i) const { return {pts_.data() + static_cast<size_t>(i) * channels_, static_cast<size_t>(channels_)}; }

    std::vector<double>& points() { return pts_; }
    const std::vector<double>& points() const { return pts_; }

private:
    int channels_;
    std::vector<double> pts_;
};

// Per-stream feature width of the signature transform: Q = sum_{n=1..N} C^n.
int64_t tensor_dim(int channels, int depth);

// Per-level dimensions of the free Lie algebra on `channels` letters
// (Moebius/Witt formula); their sum is the log-signature length.
std::vector<int64_t> witt_dims(int channels, int depth);

// Signature of a single linear segment: level n = increment^(x)n / n!.
TensorSeries segment_signature(std::span<const double> increment, int depth);

// Truncated tensor-algebra product; by Chen's identity this is the
// signature of the concatenation when a and b are path signatures.
TensorSeries chen_product(const TensorSeries& a, const TensorSeries& b);

// In-place right-multiplication by segment_signature(increment).
void concat_segment(TensorSeries& sig, std::span<const double> increment);

// Signature of a piecewise-linear stream: Chen product of its segment
// signatures, left to right. A length-1 stream gives the identity series.
TensorSeries path_signature(const PathStream& stream, int depth);

// Coefficient-wise mean of the member signatures.
TensorSeries expected_signature(std::span<const PathStream> streams, int depth);

// Direct numerical evaluation of the iterated integrals on a fine grid
// (piecewise-linear interpolation, trapezoid rule), independent of
// chen_product. Test oracle; error is O(1/grid^2).
TensorSeries signature_oracle(const PathStream& stream, int depth, int grid);

}  // namespace imagesig

#endif  // IMAGESIG_SIG_HPP
