#pragma once

// Seeded planted-defect benchmark. A few "signal" channels carry a low-rank
// normal manifold with large variance; the remaining channels carry small,
// image-dependent nuisance noise. Defective images replace a block of tokens
// with off-manifold signal values and nudge their deep-layer tokens towards
// the anomalous text embedding.

#include "lake/manifest.hpp"
#include "lake/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace lake {

struct SyntheticConfig {
    Grid grid{12, 12};
    ImageSize image_size{48, 48};
    Index dim = 1024;
    Index signal_channels = 100;
    Index manifold_rank = 3;
    Index text_dim = 64;
    int support_images = 64;
    int normal_tests = 20;
    int anomalous_tests = 20;
    Index defect_rows = 2;  // defect block size in tokens
    Index defect_cols = 2;
    double signal_scale = 1.0;     // std of manifold coordinates
    double signal_noise = 0.05;    // isotropic noise on signal channels
    double defect_strength = 1.0;  // std of off-manifold defect values
    double nuisance_noise = 0.25;  // std of non-signal channel noise
    double nuisance_spread = 0.5;  // per-image relative jitter of nuisance noise
    double text_shift = 0.15;      // pull of defect tokens towards t_anom
    std::uint64_t seed = 0;
};

struct SyntheticTest {
    std::string id;
    int label = 0;
    FeatureTensor features;
    FeatureTensor features_lp;
    RowMatrix<std::uint8_t> mask;  // H x W
    Index defect_row = -1;          // top-left token of the defect block, -1 when normal
    Index defect_col = -1;
};

struct SyntheticDataset {
    SyntheticConfig config;
    std::vector<Index> signal_indices;  // ascending
    std::vector<FeatureTensor> support;
    std::vector<std::string> support_ids;
    std::vector<SyntheticTest> tests;
    Vector<float> t_norm;
    Vector<float> t_anom;
};

SyntheticDataset generate_synthetic(const SyntheticConfig& config);

/// Writes every tensor and mask plus manifest.json into `dir`; returns the manifest path.
std::filesystem::path write_synthetic(const SyntheticDataset& dataset, const std::filesystem::path& dir);

}  // namespace lake
