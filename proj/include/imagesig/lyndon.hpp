#ifndef IMAGESIG_LYNDON_HPP
#define IMAGESIG_LYNDON_HPP

#include "imagesig/sig.hpp"

#include <cstdint>
#include <vector>

namespace imagesig {

// Lyndon-word coordinate system for log signatures. Words are generated
// with Duval's algorithm over the alphabet {1..C} (stored 0-based), grouped
// by length and lexicographically ordered within each length. Each word
// carries the dense tensor-space expansion of its standard bracketing,
// which is what turns the tensor logarithm into basis coordinates.
class LyndonBasis {
public:
    LyndonBasis(int channels, int depth);

    int channels() const { return channels_; }
    int depth() const { return depth_; }

    // Total number of basis elements: sum of witt_dims(channels, depth).
    int64_t size() const { return total_; }

    struct Word {
        std::vector<int> letters;       // 0-based letters, length = level
        size_t tensor_index;            // index of the word inside its level block
        std::vector<double> expansion;  // standard bracketing expanded over C^level words
    };

    // Words of a given level, lexicographically ascending. Levels are 1-based.
    const std::vector<Word>& words(int level) const { return words_[level]; }

private:
    int channels_;
    int depth_;
    int64_t total_;
    std::vector<std::vector<Word>> words_;  // index 0 unused
};

// Log signature in LyndonBasis coordinate order (level 1 block first,
// lexicographic within each level).
struct LogSigVector {
    int channels = 0;
    int depth = 0;
    std::vector<double> coords;
};

// Tensor logarithm of a group-like series, projected onto the Lyndon basis.
// The log is the power series sum_{n>=1} (-1)^(n-1)/n * (S - 1)^(x)n; it
// lies in the free Lie algebra, so writing it as a combination of expanded
// Lyndon bracketings is a unitriangular linear system (the expansion of a
// bracketed Lyndon word hits the word itself with coefficient 1 and
// otherwise only lexicographically greater anagrams). Coordinates are read
// off by forward substitution in lexicographic word order, per level.
// Throws if s.level(0) != 1.
LogSigVector log_signature(const TensorSeries& s, const LyndonBasis& basis);

// Truncated tensor exponential of the Lie element described by l; inverse
// of log_signature on group-like input.
TensorSeries exp_tensor(const LogSigVector& l, const LyndonBasis& basis);

}  // namespace imagesig

#endif  // IMAGESIG_LYNDON_HPP
