#pragma once

// Ranking metrics for image- and pixel-level evaluation.

#include "lake/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace lake {

struct LabeledScores {
    std::vector<double> scores;
    std::vector<std::uint8_t> labels;  // 1 = anomalous

    LabeledScores() = default;
    LabeledScores(std::vector<double> s, std::vector<std::uint8_t> l);

    std::size_t size() const noexcept { return scores.size(); }
    std::size_t positives() const noexcept;
};

/// Rank-based (Mann-Whitney) AUROC, ties receive average ranks.
double auroc(const LabeledScores& data);

/// Step-integrated average precision sum_n (R_n - R_{n-1}) P_n over distinct thresholds.
double average_precision(const LabeledScores& data);

/// Max F1 over thresholds at each distinct score (score >= threshold is positive).
double f1_max(const LabeledScores& data);

enum class Connectivity { Four = 4, Eight = 8 };

struct ComponentLabels {
    RowMatrix<std::int32_t> labels;  // -1 background, else 0..count-1
    std::int32_t count = 0;
};

/// Connected components of the foreground (non-zero) pixels of a binary mask.
ComponentLabels label_components(const RowMatrix<std::uint8_t>& mask, Connectivity connectivity = Connectivity::Eight);

/// Per-region overlap integrated over FPR in [0, fpr_limit] and normalised by fpr_limit.
double pro(std::span<const RowMatrix<float>> maps, std::span<const RowMatrix<std::uint8_t>> masks,
           double fpr_limit = 0.3, Connectivity connectivity = Connectivity::Eight);

/// Area under a piecewise-linear curve starting at (0, 0), truncated at `x_limit`.
double truncated_trapezoid(std::span<const double> x, std::span<const double> y, double x_limit);

}  // namespace lake
