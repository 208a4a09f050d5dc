#pragma once

// Memory of projected normal support tokens and exhaustive cosine
// nearest-neighbour search against it.

#include "lake/subspace.hpp"
#include "lake/types.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace lake {

/// Norms below this are treated as zero; the affected cosine is defined as 0.
inline constexpr double kZeroNormEpsilon = 1e-12;

struct GallerySource {
    std::string category;
    std::vector<std::string> support_ids;
};

/// Immutable (M*N) x K matrix of projected support tokens with cached row norms.
class Gallery {
public:
    Gallery(TokenMatrix entries, SensitiveSubspace subspace, GallerySource source = {});

    const TokenMatrix& entries() const noexcept { return entries_; }
    const Vector<double>& row_norms() const noexcept { return row_norms_; }
    const SensitiveSubspace& subspace() const noexcept { return subspace_; }
    const GallerySource& source() const noexcept { return source_; }

    Index rows() const noexcept { return entries_.rows(); }
    Index dim() const noexcept { return entries_.cols(); }

    /// In-memory footprint of entries, norms and channel indices.
    std::size_t byte_size() const noexcept;

private:
    TokenMatrix entries_;
    Vector<double> row_norms_;
    SensitiveSubspace subspace_;
    GallerySource source_;
};

struct DeviationMap {
    Vector<double> d;            // per-token deviation in [0, 1]
    Grid grid;
    std::vector<Index> nearest;  // gallery row realising each minimum
    std::size_t degenerate_pairs = 0;  // (token, row) pairs hit by the zero-norm guard

    Index size() const noexcept { return d.size(); }
};

/// Stacks project(x, subspace) for every support image, in order.
Gallery build_gallery(std::span<const FeatureTensor> support, const SensitiveSubspace& subspace,
                      GallerySource source = {});

/// d_i = min_g (1 - cos(z_i, g)) / 2 over every gallery row (exact search).
DeviationMap token_deviations(const FeatureTensor& test, const Gallery& gallery);

/// Same search for tokens already projected onto the gallery's subspace.
DeviationMap projected_deviations(const TokenMatrix& projected, Grid grid, const Gallery& gallery);

/// S_vis = max_i d_i.
double visual_score(const DeviationMap& dev);

/// Writes gallery_entries.npy (float32, rows x K) and gallery_indices.npy (int64, K) into `dir`.
void save_gallery(const Gallery& gallery, const std::filesystem::path& dir);

/// Reads a pair written by save_gallery. The variance profile is not part of the pair.
Gallery load_gallery(const std::filesystem::path& dir);

}  // namespace lake
