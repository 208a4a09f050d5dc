#pragma once

// Anomaly-sensitive channel selection: per-channel variance over the pooled
// support tokens, top-K cut, and the gather that projects tokens onto the
// selected channels.

#include "lake/error.hpp"
#include "lake/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace lake {

struct VarianceProfile {
    Vector<double> sigma2;  // population variance per channel
    Index sample_count = 0; // M * N pooled tokens

    Index dim() const noexcept { return sigma2.size(); }
};

struct SensitiveSubspace {
    std::vector<Index> indices;  // ascending, distinct, in [0, D)
    VarianceProfile source_profile;

    Index size() const noexcept { return static_cast<Index>(indices.size()); }
};

/// Population variance of each channel pooled over every token of every support image.
/// Two passes (mean, then squared deviation), accumulated in double.
VarianceProfile channel_variance(std::span<const FeatureTensor> support);

/// Indices of the K largest variances; ties go to the lower channel index. Output ascending.
SensitiveSubspace select_topk(const VarianceProfile& profile, Index k);

/// Gathers `indices` columns of `tokens` in index order.
template <typename Derived>
RowMatrix<typename Derived::Scalar> gather_columns(const Eigen::MatrixBase<Derived>& tokens,
                                                   std::span<const Index> indices) {
    RowMatrix<typename Derived::Scalar> out(tokens.rows(), static_cast<Index>(indices.size()));
    for (std::size_t j = 0; j < indices.size(); ++j) {
        const Index c = indices[j];
        if (c < 0 || c >= tokens.cols()) {
            throw ShapeError("channel index " + std::to_string(c) + " out of range for width " +
                             std::to_string(tokens.cols()));
        }
        out.col(static_cast<Index>(j)) = tokens.col(c);
    }
    return out;
}

/// z_i = h_i restricted to the subspace, one row per token.
TokenMatrix project(const FeatureTensor& tensor, const SensitiveSubspace& subspace);

/// Channel subset drawn uniformly at random, for the random-selection baseline.
/// Deterministic in `seed` across platforms.
SensitiveSubspace random_subspace(const VarianceProfile& profile, Index k, std::uint64_t seed);

enum class PcaStatus { Ok, NotAxisDominant, NoConvergence };

struct PcaReference {
    PcaStatus status = PcaStatus::NoConvergence;
    std::vector<Index> indices;       // per top eigenvector, its dominant coordinate (descending eigenvalue)
    Vector<double> eigenvalues;       // top-K, descending
    std::vector<double> dominance;    // largest |coordinate| of each top eigenvector
};

/// Truncated-PCA reference: eigendecomposition of the pooled covariance. Test oracle only.
PcaReference pca_reference(std::span<const FeatureTensor> support, Index k, double dominance_threshold = 0.9);

}  // namespace lake
