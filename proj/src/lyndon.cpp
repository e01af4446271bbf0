#include "imagesig/lyndon.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace imagesig {

namespace {

size_t ipow(int base, int exp) {
    size_t r = 1;
    for (int i = 0; i < exp; ++i) r *= static_cast<size_t>(base);
    return r;
}

size_t word_index(const std::vector<int>& w, int channels) {
    size_t idx = 0;
    for (int letter : w) idx = idx * channels + static_cast<size_t>(letter);
    return idx;
}

// Duval's algorithm: all Lyndon words over {0..C-1} of length <= depth,
// emitted in lexicographic order.
std::vector<std::vector<int>> duval(int channels, int depth) {
    std::vector<std::vector<int>> out;
    std::vector<int> w{-1};
    while (!w.empty()) {
        ++w.back();
        out.push_back(w);
        while (static_cast<int>(w.size()) < depth) w.push_back(w[w.size() % out.back().size()]);
        // The padding above repeats the last emitted Lyndon word w' to full
        // length; trim trailing maximal letters to find the next candidate.
        while (!w.empty() && w.back() == channels - 1) w.pop_back();
    }
    return out;
}

// Dense tensor expansion of the standard (right-normed) bracketing of a
// Lyndon word: split at the longest proper Lyndon suffix v, recurse on the
// halves, and take the commutator of their concatenation products.
std::vector<double> expand_bracketing(const std::vector<int>& word, int channels,
                                      std::map<std::vector<int>, std::vector<double>>& memo) {
    auto it = memo.find(word);
    if (it != memo.end()) return it->second;

    std::vector<double> result;
    if (word.size() == 1) {
        result.assign(static_cast<size_t>(channels), 0.0);
        result[word[0]] = 1.0;
    } else {
        // Longest proper suffix that is itself a Lyndon word. A suffix of a
        // Lyndon word is Lyndon iff it is strictly smaller than all of its
        // own rotations; testing candidates from the longest down.
        auto is_lyndon = [](const std::vector<int>& w) {
            const size_t n = w.size();
            for (size_t r = 1; r < n; ++r) {
                for (size_t k = 0; k < n; ++k) {
                    int a = w[k];
                    int b = w[(r + k) % n];
                    if (a != b) {
                        if (a > b) return false;
                        break;
                    }
                    if (k + 1 == n) return false;  // rotation equal to w
                }
            }
            return true;
        };
        size_t split = 1;
        for (size_t s = 1; s < word.size(); ++s) {
            std::vector<int> suffix(word.begin() + s, word.end());
            if (is_lyndon(suffix)) {
                split = s;
                break;
            }
        }
        std::vector<int> u(word.begin(), word.begin() + split);
        std::vector<int> v(word.begin() + split, word.end());
        const auto eu = expand_bracketing(u, channels, memo);
        const auto ev = expand_bracketing(v, channels, memo);
        result.assign(ipow(channels, static_cast<int>(word.size())), 0.0);
        const size_t lv = ipow(channels, static_cast<int>(v.size()));
        const size_t lu = ipow(channels, static_cast<int>(u.size()));
        for (size_t i = 0; i < eu.size(); ++i) {
            if (eu[i] == 0.0) continue;
            for (size_t j = 0; j < ev.size(); ++j) {
                if (ev[j] == 0.0) continue;
                result[i * lv + j] += eu[i] * ev[j];  // u.v
                result[j * lu + i] -= eu[i] * ev[j];  // v.u
            }
        }
    }
    memo[word] = result;
    return result;
}

}  // namespace

LyndonBasis::LyndonBasis(int channels, int depth) : channels_(channels), depth_(depth), total_(0) {
    if (channels < 1 || depth < 1) throw std::invalid_argument("LyndonBasis: channels and depth must be >= 1");
    words_.resize(depth + 1);
    std::map<std::vector<int>, std::vector<double>> memo;
    for (auto& w : duval(channels, depth)) {
        Word entry;
        entry.tensor_index = word_index(w, channels);
        entry.expansion = expand_bracketing(w, channels, memo);
        entry.letters = std::move(w);
        words_[entry.letters.size()].push_back(std::move(entry));
    }
    for (int n = 1; n <= depth; ++n) total_ += static_cast<int64_t>(words_[n].size());
}

LogSigVector log_signature(const TensorSeries& s, const LyndonBasis& basis) {
    if (s.channels() != basis.channels() || s.depth() != basis.depth())
        throw std::invalid_argument("log_signature: basis does not match series");
    if (std::abs(s.level(0)[0] - 1.0) > 1e-9)
        throw std::invalid_argument("log_signature: series is not group-like (level 0 != 1)");

    const int N = s.depth();
    const int C = s.channels();

    // hat = s - 1; log s = sum_{k=1..N} (-1)^(k-1)/k * hat^(x)k.
    TensorSeries hat = s;
    hat.level(0)[0] = 0.0;
    TensorSeries log_s(C, N);
    TensorSeries power = hat;
    log_s += power;
    for (int k = 2; k <= N; ++k) {
        power = chen_product(power, hat);
        const double coef = ((k % 2 == 0) ? -1.0 : 1.0) / k;
        auto acc = log_s.coeffs();
        auto src = power.coeffs();
        for (size_t i = 0; i < acc.size(); ++i) acc[i] += coef * src[i];
    }

    LogSigVector out;
    out.channels = C;
    out.depth = N;
    out.coords.reserve(static_cast<size_t>(basis.size()));
    for (int n = 1; n <= N; ++n) {
        auto lvl = log_s.level(n);
        const auto& words = basis.words(n);
        std::vector<double> coords(words.size());
        for (size_t j = 0; j < words.size(); ++j) {
            double c = lvl[words[j].tensor_index];
            for (size_t i = 0; i < j; ++i) c -= coords[i] * words[i].expansion[words[j].tensor_index];
            coords[j] = c;
        }
        out.coords.insert(out.coords.end(), coords.begin(), coords.end());
    }
    return out;
}

TensorSeries exp_tensor(const LogSigVector& l, const LyndonBasis& basis) {
    if (l.channels != basis.channels() || l.depth != basis.depth())
        throw std::invalid_argument("exp_tensor: basis does not match vector");
    if (static_cast<int64_t>(l.coords.size()) != basis.size())
        throw std::invalid_argument("exp_tensor: coordinate length does not match basis");

    const int N = l.depth;
    const int C = l.channels;

    // Embed the Lie element into the full tensor space.
    TensorSeries lie(C, N);
    size_t pos = 0;
    for (int n = 1; n <= N; ++n) {
        auto lvl = lie.level(n);
        for (const auto& w : basis.words(n)) {
            const double c = l.coords[pos++];
            if (c != 0.0) {
                for (size_t i = 0; i < w.expansion.size(); ++i) lvl[i] += c * w.expansion[i];
            }
        }
    }

    // exp(L) = sum_{k=0..N} L^(x)k / k!; L has no level-0 part so the series
    // truncates at N.
    TensorSeries out = TensorSeries::identity(C, N);
    TensorSeries power = lie;
    double factorial = 1.0;
    out += power;
    for (int k = 2; k <= N; ++k) {
        power = chen_product(power, lie);
        factorial *= k;
        auto acc = out.coeffs();
        auto src = power.coeffs();
        const double inv = 1.0 / factorial;
        for (size_t i = 0; i < acc.size(); ++i) acc[i] += inv * src[i];
    }
    return out;
}

}  // namespace imagesig
