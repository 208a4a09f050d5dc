#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>

namespace lake {

using Index = Eigen::Index;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Token-by-channel embedding storage, as read from disk.
using TokenMatrix = RowMatrix<float>;

/// Spatial layout of a token sequence (h_p rows by w_p cols, row-major token order).
struct Grid {
    Index rows = 0;
    Index cols = 0;

    constexpr Index size() const noexcept { return rows * cols; }
    friend constexpr bool operator==(const Grid&, const Grid&) = default;
};

/// Pixel dimensions of an image.
struct ImageSize {
    Index height = 0;
    Index width = 0;

    friend constexpr bool operator==(const ImageSize&, const ImageSize&) = default;
};

/// Patch-token embeddings of one image at one encoder layer.
struct FeatureTensor {
    TokenMatrix tokens;  // N x D
    Grid grid;
    int layer_id = 0;

    Index token_count() const noexcept { return tokens.rows(); }
    Index dim() const noexcept { return tokens.cols(); }
};

}  // namespace lake
