#include "imagesig/sig.hpp"

#include <cmath>
#include <stdexcept>

namespace imagesig {

namespace {

size_t ipow(int base, int exp) {
    size_t r = 1;
    for (int i = 0; i < exp; ++i) r *= static_cast<size_t>(base);
    return r;
}

}  // namespace

TensorSeries::TensorSeries(int channels, int depth) : channels_(channels), depth_(depth) {
    if (channels < 1 || depth < 1) throw std::invalid_argument("TensorSeries: channels and depth must be >= 1");
    offsets_.resize(depth + 2);
    offsets_[0] = 0;
    for (int n = 0; n <= depth; ++n) offsets_[n + 1] = offsets_[n] + ipow(channels, n);
    data_.assign(offsets_.back(), 0.0);
}

TensorSeries TensorSeries::identity(int channels, int depth) {
    TensorSeries s(channels, depth);
    s.data_[0] = 1.0;
    return s;
}

TensorSeries& TensorSeries::operator+=(const TensorSeries& other) {
    if (other.channels_ != channels_ || other.depth_ != depth_)
        throw std::invalid_argument("TensorSeries::operator+=: dimension mismatch");
    for (size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

TensorSeries& TensorSeries::operator*=(double s) {
    for (double& x : data_) x *= s;
    return *this;
}

PathStream::PathStream(int channels, std::vector<double> pts) : channels_(channels), pts_(std::move(pts)) {
    if (channels < 1 || pts_.empty() || pts_.size() % channels != 0)
        throw std::invalid_argument("PathStream: point data must be a non-empty multiple of channels");
}

int64_t tensor_dim(int channels, int depth) {
    int64_t total = 0, power = 1;
    for (int n = 1; n <= depth; ++n) {
        power *= channels;
        total += power;
    }
    return total;
}

std::vector<int64_t> witt_dims(int channels, int depth) {
    auto mobius = [](int m) {
        int mu = 1;
        for (int p = 2; p * p <= m; ++p) {
            if (m % p == 0) {
                m /= p;
                if (m % p == 0) return 0;  // squared factor
                mu = -mu;
            }
        }
        if (m > 1) mu = -mu;
        return mu;
    };
    std::vector<int64_t> dims(depth);
    for (int n = 1; n <= depth; ++n) {
        int64_t acc = 0;
        for (int d = 1; d <= n; ++d) {
            if (n % d != 0) continue;
            int mu = mobius(d);
            if (mu == 0) continue;
            int64_t power = 1;
            for (int i = 0; i < n / d; ++i) power *= channels;
            acc += mu * power;
        }
        dims[n - 1] = acc / n;
    }
    return dims;
}

TensorSeries segment_signature(std::span<const double> increment, int depth) {
    const int C = static_cast<int>(increment.size());
    TensorSeries s = TensorSeries::identity(C, depth);
    for (int n = 1; n <= depth; ++n) {
        auto prev = s.level(n - 1);
        auto cur = s.level(n);
        const double inv_n = 1.0 / n;
        for (size_t i = 0; i < prev.size(); ++i) {
            const double base = prev[i] * inv_n;
            for (int c = 0; c < C; ++c) cur[i * C + c] = base * increment[c];
        }
    }
    return s;
}

TensorSeries chen_product(const TensorSeries& a, const TensorSeries& b) {
    if (a.channels() != b.channels() || a.depth() != b.depth())
        throw std::invalid_argument("chen_product: mismatched channels or depth");
    const int N = a.depth();
    TensorSeries out(a.channels(), N);
    for (int n = 0; n <= N; ++n) {
        auto dst = out.level(n);
        for (int k = 0; k <= n; ++k) {
            auto lhs = a.level(k);
            auto rhs = b.level(n - k);
            for (size_t i = 0; i < lhs.size(); ++i) {
                const double ai = lhs[i];
                if (ai == 0.0) continue;
                double* d = dst.data() + i * rhs.size();
                for (size_t j = 0; j < rhs.size(); ++j) d[j] += ai * rhs[j];
            }
        }
    }
    return out;
}

void concat_segment(TensorSeries& sig, std::span<const double> increment) {
    const int C = sig.channels();
    const int N = sig.depth();
    if (static_cast<int>(increment.size()) != C)
        throw std::invalid_argument("concat_segment: increment dimension mismatch");

    // powers[m] = increment^(x)m / m!
    TensorSeries pow = segment_signature(increment, N);

    // New level n depends on old levels k < n, so update top-down and the
    // k = n term (times the unit) is already in place.
    for (int n = N; n >= 1; --n) {
        auto dst = sig.level(n);
        for (int k = 0; k < n; ++k) {
            auto lhs = sig.level(k);
            auto rhs = pow.level(n - k);
            for (size_t i = 0; i < lhs.size(); ++i) {
                const double ai = lhs[i];
                if (ai == 0.0) continue;
                double* d = dst.data() + i * rhs.size();
                for (size_t j = 0; j < rhs.size(); ++j) d[j] += ai * rhs[j];
            }
        }
    }
}

TensorSeries path_signature(const PathStream& stream, int depth) {
    const int C = stream.channels();
    TensorSeries sig = TensorSeries::identity(C, depth);
    std::vector<double> inc(C);
    for (int i = 0; i + 1 < stream.length(); ++i) {
        auto p = stream.point(i);
        auto q = stream.point(i + 1);
        for (int c = 0; c < C; ++c) inc[c] = q[c] - p[c];
        concat_segment(sig, inc);
    }
    return sig;
}

TensorSeries expected_signature(std::span<const PathStream> streams, int depth) {
    if (streams.empty()) throw std::invalid_argument("expected_signature: empty collection");
    const int C = streams.front().channels();
    TensorSeries mean(C, depth);
    for (const PathStream& s : streams) {
        if (s.channels() != C) throw std::invalid_argument("expected_signature: mixed channel counts");
        mean += path_signature(s, depth);
    }
    mean *= 1.0 / static_cast<double>(streams.size());
    return mean;
}

TensorSeries signature_oracle(const PathStream& stream, int depth, int grid) {
    const int C = stream.channels();
    const int L = stream.length();
    if (grid < 1) throw std::invalid_argument("signature_oracle: grid must be >= 1");
    if (L == 1) return TensorSeries::identity(C, depth);

    // Sample the piecewise-linear path so that every kink lands on a grid
    // node: per-segment substeps chosen to reach at least `grid` intervals.
    const int segments = L - 1;
    const int sub = std::max(1, (grid + segments - 1) / segments);
    const int M = segments * sub;  // intervals; M+1 nodes
    std::vector<double> gamma(static_cast<size_t>(M + 1) * C);
    for (int s = 0; s < segments; ++s) {
        auto p = stream.point(s);
        auto q = stream.point(s + 1);
        for (int j = 0; j <= sub; ++j) {
            const double t = static_cast<double>(j) / sub;
            double* g = gamma.data() + (static_cast<size_t>(s) * sub + j) * C;
            for (int c = 0; c < C; ++c) g[c] = p[c] + t * (q[c] - p[c]);
        }
    }

    // f_w(t) for all words w of the current level, evaluated on all nodes.
    // f_() = 1; f_{w.i}(t) = integral of f_w d(gamma^i), trapezoid rule.
    TensorSeries out = TensorSeries::identity(C, depth);
    std::vector<double> prev(static_cast<size_t>(M + 1), 1.0);  // level 0
    std::vector<double> cur;
    for (int n = 1; n <= depth; ++n) {
        const size_t prev_words = prev.size() / (M + 1);
        const size_t cur_words = prev_words * C;
        cur.assign(cur_words * (M + 1), 0.0);
        for (size_t w = 0; w < prev_words; ++w) {
            const double* f = prev.data() + w * (M + 1);
            for (int c = 0; c < C; ++c) {
                double* g = cur.data() + (w * C + c) * (M + 1);
                double acc = 0.0;
                g[0] = 0.0;
                for (int m = 0; m < M; ++m) {
                    const double dgamma = gamma[static_cast<size_t>(m + 1) * C + c] - gamma[static_cast<size_t>(m) * C + c];
                    acc += 0.5 * (f[m] + f[m + 1]) * dgamma;
                    g[m + 1] = acc;
                }
            }
        }
        auto dst = out.level(n);
        for (size_t w = 0; w < cur_words; ++w) dst[w] = cur[w * (M + 1) + M];
        prev.swap(cur);
    }
    return out;
}

}  // namespace imagesig
