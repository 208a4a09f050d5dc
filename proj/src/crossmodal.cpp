#include "lake/crossmodal.hpp"

#include "lake/error.hpp"
#include "lake/gallery.hpp"

#include <cmath>

namespace lake {

void validate(const TextProbe& probe) {
    if (probe.t_norm.size() < 1 || probe.t_norm.size() != probe.t_anom.size()) {
        throw ShapeError("text embeddings must be non-empty and of equal length (got " +
                         std::to_string(probe.t_norm.size()) + " and " + std::to_string(probe.t_anom.size()) + ")");
    }
    if (!probe.t_norm.allFinite() || !probe.t_anom.allFinite()) throw ValidationError("text embeddings contain NaN or Inf");
    if (!(probe.temperature > 0.0) || !std::isfinite(probe.temperature)) {
        throw ParameterError("temperature must be positive and finite");
    }
}

TokenProbabilityMap token_text_probabilities(const FeatureTensor& test_lp, const TextProbe& probe) {
    validate(probe);
    if (test_lp.dim() != probe.dim()) {
        throw ShapeError("layer-l' tokens have width " + std::to_string(test_lp.dim()) + ", text embeddings " +
                         std::to_string(probe.dim()));
    }
    const Index tokens = test_lp.token_count();
    Eigen::Matrix<double, Eigen::Dynamic, 2> text(probe.dim(), 2);
    text.col(0) = probe.t_norm.cast<double>();
    text.col(1) = probe.t_anom.cast<double>();

    TokenProbabilityMap out;
    out.grid = test_lp.grid;
    out.p_anom.resize(tokens);

    const RowMatrix<double> patches = test_lp.tokens.cast<double>();
    Vector<double> patch_inv = Vector<double>::Ones(tokens);
    if (probe.normalize) {
        for (Index c = 0; c < 2; ++c) {
            const double n = text.col(c).norm();
            text.col(c) *= n < kZeroNormEpsilon ? 0.0 : 1.0 / n;
        }
        const Vector<double> norms = patches.rowwise().norm();
        for (Index i = 0; i < tokens; ++i) {
            if (norms[i] < kZeroNormEpsilon) {
                patch_inv[i] = 0.0;
                ++out.zero_norm_tokens;
            } else {
                patch_inv[i] = 1.0 / norms[i];
            }
        }
    }
    const Eigen::Matrix<double, Eigen::Dynamic, 2> sims = patches * text;
    const double scale = 1.0 / probe.temperature;
    for (Index i = 0; i < tokens; ++i) {
        const double s_norm = sims(i, 0) * patch_inv[i] * scale;
        const double s_anom = sims(i, 1) * patch_inv[i] * scale;
        if (!std::isfinite(s_norm) || !std::isfinite(s_anom)) {
            throw NumericError("non-finite text similarity at token " + std::to_string(i));
        }
        out.p_anom[i] = second_class_probability(s_norm, s_anom);
    }
    return out;
}

double semantic_score(const TokenProbabilityMap& probs) {
    if (probs.size() == 0) throw DegenerateInputError("probability map is empty");
    return probs.p_anom.maxCoeff();
}

}  // namespace lake
