#include "lake/error.hpp"
#include "lake/metrics.hpp"
#include "lake/scoring.hpp"
#include "lake/synthetic.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace lake;

TEST(Fuse, BoundaryIdentities) {
    SeededRng rng(1);
    for (int i = 0; i < 100; ++i) {
        const double v = rng.uniform(), t = rng.uniform();
        EXPECT_EQ(fuse(v, t, 0.0), v);
        EXPECT_EQ(fuse(v, t, 1.0), t);
    }
}

TEST(Fuse, DefaultWeight) { EXPECT_NEAR(fuse(0.8, 0.4, 0.3), 0.68, 1e-15); }

TEST(Fuse, MonotoneInEachScore) {
    for (double alpha : {0.0, 0.3, 0.7, 1.0}) {
        for (double a = 0.0; a < 0.95; a += 0.1) {
            EXPECT_GE(fuse(a + 0.05, 0.5, alpha), fuse(a, 0.5, alpha));
            EXPECT_GE(fuse(0.5, a + 0.05, alpha), fuse(0.5, a, alpha));
        }
    }
}

TEST(Fuse, RangeChecks) {
    EXPECT_THROW(fuse(0.5, 0.5, -0.1), ParameterError);
    EXPECT_THROW(fuse(0.5, 0.5, 1.1), ParameterError);
    EXPECT_THROW(fuse(1.5, 0.5, 0.3), ParameterError);
    EXPECT_THROW(validate(PipelineConfig{0, 0.3, 1.0, true}, 10), ParameterError);
    EXPECT_THROW(validate(PipelineConfig{11, 0.3, 1.0, true}, 10), ParameterError);
    EXPECT_THROW(validate(PipelineConfig{5, 0.3, -1.0, true}, 10), ParameterError);
    EXPECT_NO_THROW(validate(PipelineConfig{10, 0.3, 1.0, true}, 10));
}

TEST(Upsample, HalfPixelHandExample) {
    RowMatrix<double> m(2, 2);
    m << 0, 1, 0, 1;
    const auto up = upsample_bilinear(m, ImageSize{2, 4});
    for (Index r = 0; r < 2; ++r) {
        EXPECT_DOUBLE_EQ(up(r, 0), 0.0);
        EXPECT_DOUBLE_EQ(up(r, 1), 0.25);
        EXPECT_DOUBLE_EQ(up(r, 2), 0.75);
        EXPECT_DOUBLE_EQ(up(r, 3), 1.0);
    }
}

TEST(Upsample, SameSizeIsIdentity) {
    SeededRng rng(2);
    const auto m = lake::testing::random_matrix(rng, 7, 5);
    EXPECT_EQ(upsample_bilinear(m, ImageSize{7, 5}), m);
}

TEST(Upsample, ConstantStaysConstant) {
    const RowMatrix<float> m = RowMatrix<float>::Constant(24, 24, 0.3f);
    const auto up = upsample_bilinear(m, ImageSize{336, 336});
    EXPECT_TRUE((up.array() == 0.3f).all());
}

TEST(Upsample, NeverOvershoots) {
    SeededRng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        RowMatrix<float> m(6, 6);
        for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(rng.uniform());
        const auto up = upsample_bilinear(m, ImageSize{static_cast<Index>(7 + rng.below(60)), static_cast<Index>(7 + rng.below(60))});
        EXPECT_GE(up.minCoeff(), m.minCoeff());
        EXPECT_LE(up.maxCoeff(), m.maxCoeff());
    }
}

TEST(Upsample, DeviationMapOverload) {
    DeviationMap d;
    d.grid = Grid{2, 2};
    d.d = Vector<double>(4);
    d.d << 0, 1, 0, 1;
    const auto up = upsample_bilinear(d, ImageSize{2, 4});
    EXPECT_FLOAT_EQ(up(1, 1), 0.25f);
    d.grid = Grid{3, 3};
    EXPECT_THROW(upsample_bilinear(d, ImageSize{2, 4}), ShapeError);
}

namespace {

Pipeline synthetic_pipeline(const SyntheticDataset& ds, double alpha) {
    const auto profile = channel_variance(ds.support);
    TextProbe probe;
    probe.t_norm = ds.t_norm;
    probe.t_anom = ds.t_anom;
    return Pipeline{PipelineConfig{100, alpha, 1.0, true},
                    build_gallery(ds.support, select_topk(profile, 100)),
                    probe,
                    ds.config.image_size,
                    ds.config.grid,
                    ds.config.dim,
                    ds.config.text_dim,
                    12,
                    24};
}

SyntheticConfig small_config() {
    SyntheticConfig c;
    c.dim = 256;
    c.signal_channels = 40;
    c.support_images = 8;
    c.normal_tests = 4;
    c.anomalous_tests = 6;
    c.seed = 5;
    return c;
}

}  // namespace

TEST(ScoreImage, SupportAgainstOwnGalleryScoresZero) {
    const auto ds = generate_synthetic(small_config());
    const auto p = synthetic_pipeline(ds, 0.0);
    for (std::size_t i = 0; i < ds.support.size(); ++i) {
        const auto r = score_tensors("s", 0, ds.support[i], ds.tests[0].features_lp, p);
        EXPECT_EQ(r.s_vis, 0.0);
        EXPECT_EQ(r.s, 0.0);
        EXPECT_TRUE((r.pixel_map.array() == 0.0f).all());
    }
}

TEST(ScoreImage, FusedScoreMatchesComponents) {
    const auto ds = generate_synthetic(small_config());
    const auto p = synthetic_pipeline(ds, 0.3);
    for (const auto& t : ds.tests) {
        const auto r = score_tensors(t.id, t.label, t.features, t.features_lp, p);
        EXPECT_EQ(r.s, fuse(r.s_vis, r.s_text, 0.3));
        EXPECT_EQ(r.s, 0.7 * r.s_vis + 0.3 * r.s_text);
        EXPECT_EQ(r.pixel_map.rows(), ds.config.image_size.height);
        EXPECT_EQ(r.pixel_map.cols(), ds.config.image_size.width);
        EXPECT_LE(r.pixel_map.maxCoeff(), static_cast<float>(r.s_vis));
    }
}

TEST(ScoreImage, PlantedDefectPeaksInsideFootprint) {
    const auto ds = generate_synthetic(small_config());
    const auto p = synthetic_pipeline(ds, 0.3);
    const Index cell_h = ds.config.image_size.height / ds.config.grid.rows;
    const Index cell_w = ds.config.image_size.width / ds.config.grid.cols;
    int checked = 0;
    for (const auto& t : ds.tests) {
        if (t.label != 1) continue;
        const auto r = score_tensors(t.id, t.label, t.features, t.features_lp, p);
        Index row = 0, col = 0;
        r.pixel_map.maxCoeff(&row, &col);
        // Footprint of the planted tokens under the half-pixel mapping: the
        // cells themselves plus the half-cell ramp around them.
        const Index top = t.defect_row * cell_h - cell_h / 2;
        const Index left = t.defect_col * cell_w - cell_w / 2;
        const Index bottom = (t.defect_row + ds.config.defect_rows) * cell_h + cell_h / 2;
        const Index right = (t.defect_col + ds.config.defect_cols) * cell_w + cell_w / 2;
        EXPECT_GE(row, top);
        EXPECT_LT(row, bottom);
        EXPECT_GE(col, left);
        EXPECT_LT(col, right);
        ++checked;
    }
    EXPECT_EQ(checked, 6);
}

TEST(ScoreImage, RankingInvariantUnderMonotoneTransform) {
    const auto ds = generate_synthetic(small_config());
    const auto p = synthetic_pipeline(ds, 0.3);
    std::vector<double> s, transformed;
    std::vector<int> labels;
    for (const auto& t : ds.tests) {
        const auto r = score_tensors(t.id, t.label, t.features, t.features_lp, p);
        s.push_back(r.s);
        transformed.push_back(std::exp(5.0 * r.s) - 3.0);
        labels.push_back(t.label);
    }
    std::vector<std::uint8_t> l(labels.begin(), labels.end());
    EXPECT_EQ(auroc(LabeledScores(s, l)), auroc(LabeledScores(transformed, l)));
}

TEST(ScoreImage, StageNameInErrors) {
    const auto ds = generate_synthetic(small_config());
    const auto p = synthetic_pipeline(ds, 0.3);
    FeatureTensor bad_lp{TokenMatrix::Ones(ds.config.grid.size(), 3), ds.config.grid, 24};
    try {
        score_tensors("img", 0, ds.tests[0].features, bad_lp, p);
        FAIL() << "expected an error";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("text probe"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("img"), std::string::npos);
    }
}
