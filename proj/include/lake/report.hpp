#pragma once

// Dataset-level evaluation: image metrics over fused scores, pixel metrics
// over pooled pixel maps, serialised as JSON and CSV.

#include "lake/manifest.hpp"
#include "lake/metrics.hpp"
#include "lake/scoring.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lake {

struct ImageMetrics {
    double auroc = 0.0;
    double ap = 0.0;
    double f1_max = 0.0;
};

struct PixelMetrics {
    double auroc = 0.0;
    double ap = 0.0;
    double f1_max = 0.0;
    double pro = 0.0;
};

enum class PixelMode { Auto, Required, Off };

struct EvaluateOptions {
    double fpr_limit = 0.3;
    Connectivity connectivity = Connectivity::Eight;
    PixelMode pixel = PixelMode::Auto;
};

struct CategoryReport {
    std::string category;
    std::size_t test_count = 0;
    std::size_t anomalous_count = 0;
    ImageMetrics image;
    std::optional<PixelMetrics> pixel;  // absent when masks are unavailable
};

struct EvaluationReport {
    std::vector<CategoryReport> categories;
    ImageMetrics image_mean;
    std::optional<PixelMetrics> pixel_mean;
    nlohmann::ordered_json metadata;  // K, alpha, M, seeds, timings ...
};

ImageMetrics image_metrics(std::span<const double> fused_scores, std::span<const int> labels);

/// Evaluates one category's scored test set. `results` must cover every test entry of `manifest`.
CategoryReport evaluate(std::span<const AnomalyResult> results, const DatasetManifest& manifest,
                        const EvaluateOptions& options = {});

/// Means over categories.
EvaluationReport aggregate(std::vector<CategoryReport> categories, nlohmann::ordered_json metadata = {});

nlohmann::ordered_json to_json(const EvaluationReport& report);
std::string to_csv(const EvaluationReport& report);

}  // namespace lake
