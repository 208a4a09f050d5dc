#include "lake/scoring.hpp"

#include "lake/error.hpp"
#include "lake/npy.hpp"

#include <chrono>

namespace lake {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
    return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

// Runs `fn`, prefixing any engine error with the stage name. The validation /
// runtime split survives so the CLI can still pick its exit code.
template <typename Fn>
auto stage(const char* name, const std::string& id, Fn&& fn) {
    try {
        return fn();
    } catch (const ValidationError& e) {
        throw ValidationError(std::string(name) + " [" + id + "]: " + e.what());
    } catch (const Error& e) {
        throw Error(std::string(name) + " [" + id + "]: " + e.what());
    }
}

bool in_unit_interval(double v) { return v >= 0.0 && v <= 1.0; }

}  // namespace

void validate(const PipelineConfig& config, Index dim) {
    if (config.k < 1 || config.k > dim) {
        throw ParameterError("K must lie in [1, " + std::to_string(dim) + "], got " + std::to_string(config.k));
    }
    if (!in_unit_interval(config.alpha)) throw ParameterError("alpha must lie in [0, 1]");
    if (!(config.temperature > 0.0) || !std::isfinite(config.temperature)) {
        throw ParameterError("temperature must be positive and finite");
    }
}

double fuse(double s_vis, double s_text, double alpha) {
    if (!in_unit_interval(alpha)) throw ParameterError("alpha must lie in [0, 1], got " + std::to_string(alpha));
    if (!in_unit_interval(s_vis) || !in_unit_interval(s_text)) throw ParameterError("scores must lie in [0, 1]");
    return (1.0 - alpha) * s_vis + alpha * s_text;
}

RowMatrix<float> upsample_bilinear(const DeviationMap& dev, ImageSize out) {
    if (dev.size() != dev.grid.size()) throw ShapeError("deviation map length does not match its grid");
    const Eigen::Map<const RowMatrix<double>> field(dev.d.data(), dev.grid.rows, dev.grid.cols);
    return upsample_bilinear(field, out).cast<float>();
}

std::vector<FeatureTensor> load_support(const DatasetManifest& manifest) {
    std::vector<FeatureTensor> support;
    support.reserve(manifest.support.size());
    for (const auto& entry : manifest.support) {
        support.push_back(npy::read_feature_tensor(entry.features, manifest.grid, manifest.dim, manifest.layer));
    }
    return support;
}

TextProbe load_probe(const DatasetManifest& manifest, const PipelineConfig& config) {
    TextProbe probe;
    probe.t_norm = npy::read_vector(manifest.text.t_norm, manifest.text_dim);
    probe.t_anom = npy::read_vector(manifest.text.t_anom, manifest.text_dim);
    probe.category = manifest.category;
    probe.template_normal = manifest.text.template_normal;
    probe.template_anomalous = manifest.text.template_anomalous;
    probe.temperature = config.temperature;
    probe.normalize = config.normalize;
    validate(probe);
    return probe;
}

Pipeline make_pipeline(const DatasetManifest& manifest, std::span<const FeatureTensor> support,
                       std::span<const std::string> support_ids, const SensitiveSubspace& subspace,
                       const PipelineConfig& config) {
    validate(config, manifest.dim);
    GallerySource source{manifest.category, {support_ids.begin(), support_ids.end()}};
    return Pipeline{config,
                    build_gallery(support, subspace, std::move(source)),
                    load_probe(manifest, config),
                    manifest.image_size,
                    manifest.grid,
                    manifest.dim,
                    manifest.text_dim,
                    manifest.layer,
                    manifest.layer_lp};
}

Pipeline make_pipeline(const DatasetManifest& manifest, const PipelineConfig& config) {
    validate(config, manifest.dim);
    const auto support = load_support(manifest);
    std::vector<std::string> ids;
    for (const auto& s : manifest.support) ids.push_back(s.id);
    const SensitiveSubspace subspace = select_topk(channel_variance(support), config.k);
    return make_pipeline(manifest, support, ids, subspace, config);
}

AnomalyResult score_tensors(const std::string& id, int label, const FeatureTensor& features,
                            const FeatureTensor& features_lp, const Pipeline& pipeline) {
    const auto start = Clock::now();
    AnomalyResult result;
    result.image_id = id;
    result.label = label;

    auto t = Clock::now();
    result.deviation = stage("visual deviation", id, [&] { return token_deviations(features, pipeline.gallery); });
    result.s_vis = stage("visual score", id, [&] { return visual_score(result.deviation); });
    result.timing.visual_ms = elapsed_ms(t);

    t = Clock::now();
    const TokenProbabilityMap probs =
        stage("text probe", id, [&] { return token_text_probabilities(features_lp, pipeline.probe); });
    result.s_text = stage("semantic score", id, [&] { return semantic_score(probs); });
    result.timing.text_ms = elapsed_ms(t);

    t = Clock::now();
    result.s = stage("fusion", id, [&] { return fuse(result.s_vis, result.s_text, pipeline.config.alpha); });
    result.timing.fuse_ms = elapsed_ms(t);

    t = Clock::now();
    result.pixel_map = stage("upsampling", id, [&] { return upsample_bilinear(result.deviation, pipeline.image_size); });
    result.timing.upsample_ms = elapsed_ms(t);
    result.timing.total_ms = elapsed_ms(start);
    return result;
}

AnomalyResult score_image(const TestEntry& entry, const Pipeline& pipeline) {
    const auto start = Clock::now();
    const FeatureTensor features = stage("load features", entry.id, [&] {
        return npy::read_feature_tensor(entry.features, pipeline.grid, pipeline.dim, pipeline.layer);
    });
    const FeatureTensor features_lp = stage("load features_lp", entry.id, [&] {
        return npy::read_feature_tensor(entry.features_lp, pipeline.grid, pipeline.text_dim, pipeline.layer_lp);
    });
    const double load_ms = elapsed_ms(start);
    AnomalyResult result = score_tensors(entry.id, entry.label, features, features_lp, pipeline);
    result.timing.load_ms = load_ms;
    result.timing.total_ms += load_ms;
    return result;
}

}  // namespace lake
