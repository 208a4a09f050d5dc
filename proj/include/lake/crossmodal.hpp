#pragma once

// Cross-modal probe: softmax over each deep-layer token's similarity to a
// normal and an anomalous text embedding.

#include "lake/types.hpp"

#include <cmath>
#include <string>

namespace lake {

inline constexpr const char* kNormalTemplate = "a photo of a normal [class].";
inline constexpr const char* kAnomalousTemplate = "a photo of an anomalous [class].";

struct TextProbe {
    Vector<float> t_norm;
    Vector<float> t_anom;
    std::string category;
    std::string template_normal = kNormalTemplate;
    std::string template_anomalous = kAnomalousTemplate;
    double temperature = 1.0;
    bool normalize = true;  // false: raw dot products

    Index dim() const noexcept { return t_norm.size(); }
};

/// Checks vector shapes, finiteness and temperature; throws on violation.
void validate(const TextProbe& probe);

struct TokenProbabilityMap {
    Vector<double> p_anom;  // per token, in [0, 1]
    Grid grid;
    std::size_t zero_norm_tokens = 0;  // tokens whose similarities were forced to 0 under normalisation

    Index size() const noexcept { return p_anom.size(); }
};

/// Numerically stable two-class softmax; returns the probability of the second logit.
inline double second_class_probability(double first, double second) noexcept {
    const double diff = first - second;
    if (diff >= 0.0) {
        const double e = std::exp(-diff);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(diff));
}

TokenProbabilityMap token_text_probabilities(const FeatureTensor& test_lp, const TextProbe& probe);

/// S_text = max_i p_anom[i].
double semantic_score(const TokenProbabilityMap& probs);

}  // namespace lake
