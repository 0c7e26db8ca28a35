#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace kgagent {

inline constexpr std::size_t kDefaultEmbeddingDim = 64;

/// Perceptual feature vector of one observation. Never empty, never all-zero.
/// Stored raw; cosine() normalizes on the fly.
class Embedding {
public:
    explicit Embedding(std::vector<double> values) : values_(std::move(values)) {
        if (values_.empty()) throw ContractViolation("embedding must have at least one component");
        norm_ = 0.0;
        for (double v : values_) {
            if (!std::isfinite(v)) throw ContractViolation("embedding component is not finite");
            norm_ += v * v;
        }
        norm_ = std::sqrt(norm_);
        if (norm_ == 0.0) throw ContractViolation("embedding must not be the zero vector");
    }

    std::size_t dimension() const { return values_.size(); }
    std::span<const double> values() const { return values_; }
    double norm() const { return norm_; }

    friend bool operator==(const Embedding& a, const Embedding& b) { return a.values_ == b.values_; }

private:
    std::vector<double> values_;
    double norm_ = 0.0;
};

/// dot(a,b) / (|a| |b|), clamped to [-1, 1] against rounding.
inline double cosine(const Embedding& a, const Embedding& b) {
    if (a.dimension() != b.dimension()) {
        throw ContractViolation("cosine: dimension mismatch (" + std::to_string(a.dimension()) + " vs " +
                                std::to_string(b.dimension()) + ")");
    }
    const auto x = a.values();
    const auto y = b.values();
    double dot = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) dot += x[i] * y[i];
    const double c = dot / (a.norm() * b.norm());
    return c > 1.0 ? 1.0 : (c < -1.0 ? -1.0 : c);
}

/// Merge / similarity-edge thresholds. merge > simi, both in (0, 1].
class SimilarityThresholds {
public:
    SimilarityThresholds() = default;
    SimilarityThresholds(double merge, double simi) : merge_(merge), simi_(simi) {
        if (!(merge > 0.0 && merge <= 1.0)) throw ContractViolation("theta_merge must lie in (0, 1]");
        if (!(simi > 0.0 && simi < 1.0)) throw ContractViolation("theta_simi must lie in (0, 1)");
        if (!(merge > simi)) throw ContractViolation("theta_merge must be strictly greater than theta_simi");
    }

    double merge() const { return merge_; }
    double simi() const { return simi_; }

    friend bool operator==(const SimilarityThresholds&, const SimilarityThresholds&) = default;

private:
    double merge_ = 0.95;
    double simi_ = 0.88;
};

enum class SimilarityClass { Merge, SimilarEdge, Unrelated };

/// Total partition of [-1, 1]:
///   sim > merge           -> Merge
///   merge >= sim > simi   -> SimilarEdge
///   otherwise             -> Unrelated
inline SimilarityClass classify(double sim, const SimilarityThresholds& t) {
    if (!(sim >= -1.0 && sim <= 1.0)) throw ContractViolation("classify: similarity outside [-1, 1]");
    if (sim > t.merge()) return SimilarityClass::Merge;
    if (sim > t.simi()) return SimilarityClass::SimilarEdge;
    return SimilarityClass::Unrelated;
}

inline const char* to_string(SimilarityClass c) {
    switch (c) {
    case SimilarityClass::Merge: return "merge";
    case SimilarityClass::SimilarEdge: return "similar";
    case SimilarityClass::Unrelated: return "unrelated";
    }
    return "?";
}

} // namespace kgagent
