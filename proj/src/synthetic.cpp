#include "lake/synthetic.hpp"

#include "lake/crossmodal.hpp"
#include "lake/error.hpp"
#include "lake/npy.hpp"
#include "lake/random.hpp"

#include <algorithm>
#include <cstdio>

namespace lake {

namespace {

Vector<double> random_unit(SeededRng& rng, Index n) {
    Vector<double> v(n);
    for (Index i = 0; i < n; ++i) v[i] = rng.normal();
    return v / v.norm();
}

std::string numbered(const char* prefix, int i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s_%03d", prefix, i);
    return buf;
}

struct Generator {
    const SyntheticConfig& cfg;
    SeededRng rng;
    std::vector<Index> signal;
    std::vector<Index> nuisance;
    RowMatrix<double> loadings;       // signal x rank, unit rows
    Vector<double> nuisance_offset;   // per nuisance channel
    Vector<double> t_norm, t_anom, content;

    explicit Generator(const SyntheticConfig& c) : cfg(c), rng(derive_seed(c.seed, SeedStream::Synthetic)) {
        const auto perm = rng.permutation<Index>(static_cast<std::size_t>(cfg.dim));
        signal.assign(perm.begin(), perm.begin() + cfg.signal_channels);
        nuisance.assign(perm.begin() + cfg.signal_channels, perm.end());
        std::sort(signal.begin(), signal.end());
        std::sort(nuisance.begin(), nuisance.end());

        loadings.resize(cfg.signal_channels, cfg.manifold_rank);
        for (Index r = 0; r < cfg.signal_channels; ++r) loadings.row(r) = random_unit(rng, cfg.manifold_rank).transpose();
        nuisance_offset.resize(static_cast<Index>(nuisance.size()));
        for (Index i = 0; i < nuisance_offset.size(); ++i) nuisance_offset[i] = rng.uniform(0.5, 1.5);

        t_norm = random_unit(rng, cfg.text_dim);
        t_anom = random_unit(rng, cfg.text_dim);
        content = random_unit(rng, cfg.text_dim);
    }

    // Layer-l tokens. Tokens flagged in `defect` leave the signal manifold.
    FeatureTensor visual(const std::vector<bool>& defect) {
        const Index n = cfg.grid.size();
        const double nuisance_sd = cfg.nuisance_noise * (1.0 + cfg.nuisance_spread * rng.uniform(-1.0, 1.0));
        const double coord_sd = cfg.signal_scale;
        FeatureTensor t;
        t.grid = cfg.grid;
        t.layer_id = 12;
        t.tokens.resize(n, cfg.dim);
        Vector<double> u(cfg.manifold_rank);
        for (Index i = 0; i < n; ++i) {
            const bool bad = defect[static_cast<std::size_t>(i)];
            for (Index j = 0; j < cfg.manifold_rank; ++j) u[j] = rng.normal(0.0, coord_sd);
            for (Index s = 0; s < cfg.signal_channels; ++s) {
                const double value = bad ? rng.normal(0.0, cfg.defect_strength)
                                         : loadings.row(s).dot(u) + rng.normal(0.0, cfg.signal_noise);
                t.tokens(i, signal[static_cast<std::size_t>(s)]) = static_cast<float>(value);
            }
            for (std::size_t c = 0; c < nuisance.size(); ++c) {
                const double value = nuisance_offset[static_cast<Index>(c)] + rng.normal(0.0, nuisance_sd);
                t.tokens(i, nuisance[c]) = static_cast<float>(value);
            }
        }
        return t;
    }

    // Layer-l' tokens in the joint space.
    FeatureTensor deep(const std::vector<bool>& defect) {
        const Index n = cfg.grid.size();
        FeatureTensor t;
        t.grid = cfg.grid;
        t.layer_id = 24;
        t.tokens.resize(n, cfg.text_dim);
        const double noise_sd = 0.5 / std::sqrt(static_cast<double>(cfg.text_dim));
        for (Index i = 0; i < n; ++i) {
            Vector<double> p = content + 0.3 * t_norm;
            if (defect[static_cast<std::size_t>(i)]) p += cfg.text_shift * t_anom;
            for (Index j = 0; j < cfg.text_dim; ++j) p[j] += rng.normal(0.0, noise_sd);
            t.tokens.row(i) = p.cast<float>().transpose();
        }
        return t;
    }
};

}  // namespace

SyntheticDataset generate_synthetic(const SyntheticConfig& cfg) {
    if (cfg.signal_channels < 1 || cfg.signal_channels > cfg.dim) throw ParameterError("signal channel count out of range");
    if (cfg.manifold_rank < 1) throw ParameterError("manifold rank must be positive");
    if (cfg.support_images < 1) throw ParameterError("at least one support image is required");
    if (cfg.defect_rows < 1 || cfg.defect_rows > cfg.grid.rows || cfg.defect_cols < 1 || cfg.defect_cols > cfg.grid.cols) {
        throw ParameterError("defect block does not fit the grid");
    }

    Generator gen(cfg);
    SyntheticDataset ds;
    ds.config = cfg;
    ds.signal_indices = gen.signal;
    ds.t_norm = gen.t_norm.cast<float>();
    ds.t_anom = gen.t_anom.cast<float>();

    const std::vector<bool> clean(static_cast<std::size_t>(cfg.grid.size()), false);
    for (int i = 0; i < cfg.support_images; ++i) {
        ds.support.push_back(gen.visual(clean));
        ds.support_ids.push_back(numbered("support", i));
    }

    std::vector<int> labels(static_cast<std::size_t>(cfg.normal_tests), 0);
    labels.resize(labels.size() + static_cast<std::size_t>(cfg.anomalous_tests), 1);
    const auto order = gen.rng.permutation(labels.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        SyntheticTest test;
        test.id = numbered("test", static_cast<int>(i));
        test.label = labels[order[i]];
        test.mask = RowMatrix<std::uint8_t>::Zero(cfg.image_size.height, cfg.image_size.width);
        std::vector<bool> defect = clean;
        if (test.label == 1) {
            test.defect_row = static_cast<Index>(gen.rng.below(static_cast<std::uint64_t>(cfg.grid.rows - cfg.defect_rows + 1)));
            test.defect_col = static_cast<Index>(gen.rng.below(static_cast<std::uint64_t>(cfg.grid.cols - cfg.defect_cols + 1)));
            for (Index r = 0; r < cfg.defect_rows; ++r) {
                for (Index c = 0; c < cfg.defect_cols; ++c) {
                    defect[static_cast<std::size_t>((test.defect_row + r) * cfg.grid.cols + test.defect_col + c)] = true;
                }
            }
            // A pixel belongs to the token whose cell contains its centre.
            for (Index y = 0; y < cfg.image_size.height; ++y) {
                const auto tr = static_cast<Index>((static_cast<double>(y) + 0.5) * static_cast<double>(cfg.grid.rows) /
                                                   static_cast<double>(cfg.image_size.height));
                for (Index x = 0; x < cfg.image_size.width; ++x) {
                    const auto tc = static_cast<Index>((static_cast<double>(x) + 0.5) * static_cast<double>(cfg.grid.cols) /
                                                       static_cast<double>(cfg.image_size.width));
                    if (defect[static_cast<std::size_t>(tr * cfg.grid.cols + tc)]) test.mask(y, x) = 1;
                }
            }
        }
        test.features = gen.visual(defect);
        test.features_lp = gen.deep(defect);
        ds.tests.push_back(std::move(test));
    }
    return ds;
}

std::filesystem::path write_synthetic(const SyntheticDataset& ds, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "support");
    fs::create_directories(dir / "test");
    fs::create_directories(dir / "masks");
    fs::create_directories(dir / "text");

    DatasetManifest m;
    m.root = dir;
    m.category = "synthetic";
    m.image_size = ds.config.image_size;
    m.grid = ds.config.grid;
    m.dim = ds.config.dim;
    m.text_dim = ds.config.text_dim;
    m.layer = 12;
    m.layer_lp = 24;
    for (std::size_t i = 0; i < ds.support.size(); ++i) {
        const fs::path p = dir / "support" / (ds.support_ids[i] + ".npy");
        npy::write_matrix(p, ds.support[i].tokens);
        m.support.push_back({ds.support_ids[i], p});
    }
    for (const auto& t : ds.tests) {
        TestEntry e;
        e.id = t.id;
        e.label = t.label;
        e.features = dir / "test" / (t.id + "_l.npy");
        e.features_lp = dir / "test" / (t.id + "_lp.npy");
        npy::write_matrix(e.features, t.features.tokens);
        npy::write_matrix(e.features_lp, t.features_lp.tokens);
        if (t.label == 1) {
            e.mask = dir / "masks" / (t.id + ".npy");
            npy::write_mask(*e.mask, t.mask);
        }
        m.test.push_back(std::move(e));
    }
    m.text.t_norm = dir / "text" / "t_norm.npy";
    m.text.t_anom = dir / "text" / "t_anom.npy";
    npy::write_vector(m.text.t_norm, ds.t_norm);
    npy::write_vector(m.text.t_anom, ds.t_anom);
    m.text.template_normal = "a photo of a normal synthetic.";
    m.text.template_anomalous = "a photo of an anomalous synthetic.";
    const fs::path manifest_path = dir / "manifest.json";
    save_manifest(m, manifest_path);
    return manifest_path;
}

}  // namespace lake
