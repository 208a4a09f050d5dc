#pragma once

// Per-image pipeline: visual deviation against the gallery, text probing,
// score fusion and pixel-map rendering.

#include "lake/crossmodal.hpp"
#include "lake/gallery.hpp"
#include "lake/manifest.hpp"
#include "lake/subspace.hpp"
#include "lake/types.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace lake {

struct PipelineConfig {
    Index k = 100;
    double alpha = 0.3;
    double temperature = 1.0;
    bool normalize = true;
};

void validate(const PipelineConfig& config, Index dim);

struct StageTimings {
    double load_ms = 0.0;
    double visual_ms = 0.0;
    double text_ms = 0.0;
    double fuse_ms = 0.0;
    double upsample_ms = 0.0;
    double total_ms = 0.0;
};

struct AnomalyResult {
    std::string image_id;
    int label = 0;
    double s_vis = 0.0;
    double s_text = 0.0;
    double s = 0.0;
    DeviationMap deviation;
    RowMatrix<float> pixel_map;  // H x W, upsampled visual deviation
    StageTimings timing;
};

/// S = (1 - alpha) * S_vis + alpha * S_text.
double fuse(double s_vis, double s_text, double alpha);

/// Bilinear resize with half-pixel centres: output pixel (r, c) samples source
/// location ((r + 0.5) * h / H - 0.5, (c + 0.5) * w / W - 0.5), clamped to the grid.
template <typename Derived>
RowMatrix<typename Derived::Scalar> upsample_bilinear(const Eigen::MatrixBase<Derived>& source, ImageSize out) {
    using Scalar = typename Derived::Scalar;
    if (out.height < 1 || out.width < 1) throw ParameterError("output size must be positive");
    if (source.rows() < 1 || source.cols() < 1) throw DegenerateInputError("cannot upsample an empty grid");

    struct Tap {
        Index lo, hi;
        Scalar w;
    };
    auto taps = [](Index in, Index n) {
        std::vector<Tap> t(static_cast<std::size_t>(n));
        const Scalar ratio = static_cast<Scalar>(in) / static_cast<Scalar>(n);
        for (Index o = 0; o < n; ++o) {
            Scalar x = (static_cast<Scalar>(o) + Scalar(0.5)) * ratio - Scalar(0.5);
            x = std::clamp(x, Scalar(0), static_cast<Scalar>(in - 1));
            const Index lo = static_cast<Index>(std::floor(x));
            const Index hi = std::min(lo + 1, in - 1);
            t[static_cast<std::size_t>(o)] = {lo, hi, x - static_cast<Scalar>(lo)};
        }
        return t;
    };
    // a + w (b - a), kept inside [min(a, b), max(a, b)] so rounding cannot overshoot.
    auto lerp = [](Scalar a, Scalar b, Scalar w) {
        const Scalar v = a + w * (b - a);
        return std::clamp(v, std::min(a, b), std::max(a, b));
    };

    const auto ry = taps(source.rows(), out.height);
    const auto rx = taps(source.cols(), out.width);
    RowMatrix<Scalar> result(out.height, out.width);
    for (Index r = 0; r < out.height; ++r) {
        const Tap& ty = ry[static_cast<std::size_t>(r)];
        for (Index c = 0; c < out.width; ++c) {
            const Tap& tx = rx[static_cast<std::size_t>(c)];
            const Scalar top = lerp(source(ty.lo, tx.lo), source(ty.lo, tx.hi), tx.w);
            const Scalar bottom = lerp(source(ty.hi, tx.lo), source(ty.hi, tx.hi), tx.w);
            result(r, c) = lerp(top, bottom, ty.w);
        }
    }
    return result;
}

/// Deviation map reshaped to its grid, upsampled and stored as float32.
RowMatrix<float> upsample_bilinear(const DeviationMap& dev, ImageSize out);

/// Shared, read-only state for scoring a dataset: one gallery, one probe.
struct Pipeline {
    PipelineConfig config;
    Gallery gallery;
    TextProbe probe;
    ImageSize image_size;
    Grid grid;
    Index dim = 0;
    Index text_dim = 0;
    int layer = 0;
    int layer_lp = 0;
};

std::vector<FeatureTensor> load_support(const DatasetManifest& manifest);
TextProbe load_probe(const DatasetManifest& manifest, const PipelineConfig& config);

/// Builds the gallery from `support` (a subset of the manifest's support set, in order) and `subspace`.
Pipeline make_pipeline(const DatasetManifest& manifest, std::span<const FeatureTensor> support,
                       std::span<const std::string> support_ids, const SensitiveSubspace& subspace,
                       const PipelineConfig& config);

/// Full default pipeline: all support images, top-K variance subspace.
Pipeline make_pipeline(const DatasetManifest& manifest, const PipelineConfig& config);

/// Scores in-memory tensors against the pipeline.
AnomalyResult score_tensors(const std::string& id, int label, const FeatureTensor& features,
                            const FeatureTensor& features_lp, const Pipeline& pipeline);

/// Loads one manifest test entry and scores it. Errors carry the failing stage name.
AnomalyResult score_image(const TestEntry& entry, const Pipeline& pipeline);

}  // namespace lake
