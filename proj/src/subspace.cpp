#include "lake/subspace.hpp"

#include "lake/random.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <numeric>

namespace lake {

namespace {

Index checked_dim(std::span<const FeatureTensor> support) {
    if (support.empty()) throw DegenerateInputError("support set is empty");
    const Index dim = support.front().dim();
    Index tokens = 0;
    for (const auto& t : support) {
        if (t.dim() != dim) {
            throw ShapeError("support tensors disagree on channel count: " + std::to_string(t.dim()) + " vs " +
                             std::to_string(dim));
        }
        tokens += t.token_count();
    }
    if (dim < 1) throw ShapeError("support tensors have no channels");
    if (tokens < 2) throw DegenerateInputError("variance needs at least two pooled tokens, got " + std::to_string(tokens));
    return dim;
}

}  // namespace

VarianceProfile channel_variance(std::span<const FeatureTensor> support) {
    const Index dim = checked_dim(support);

    Index count = 0;
    Vector<double> mean = Vector<double>::Zero(dim);
    for (const auto& t : support) {
        mean += t.tokens.cast<double>().colwise().sum().transpose();
        count += t.token_count();
    }
    mean /= static_cast<double>(count);

    Vector<double> sum_sq = Vector<double>::Zero(dim);
    for (const auto& t : support) {
        sum_sq += (t.tokens.cast<double>().rowwise() - mean.transpose()).array().square().colwise().sum().matrix().transpose();
    }

    VarianceProfile profile;
    profile.sigma2 = sum_sq / static_cast<double>(count);
    profile.sample_count = count;
    return profile;
}

SensitiveSubspace select_topk(const VarianceProfile& profile, Index k) {
    const Index dim = profile.dim();
    if (k < 1 || k > dim) {
        throw ParameterError("K must lie in [1, " + std::to_string(dim) + "], got " + std::to_string(k));
    }
    std::vector<Index> order(static_cast<std::size_t>(dim));
    std::iota(order.begin(), order.end(), Index{0});
    const auto& s = profile.sigma2;
    std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](Index a, Index b) {
        return s[a] > s[b] || (s[a] == s[b] && a < b);
    });
    order.resize(static_cast<std::size_t>(k));
    std::sort(order.begin(), order.end());
    return {std::move(order), profile};
}

TokenMatrix project(const FeatureTensor& tensor, const SensitiveSubspace& subspace) {
    return gather_columns(tensor.tokens, subspace.indices);
}

SensitiveSubspace random_subspace(const VarianceProfile& profile, Index k, std::uint64_t seed) {
    const Index dim = profile.dim();
    if (k < 1 || k > dim) {
        throw ParameterError("K must lie in [1, " + std::to_string(dim) + "], got " + std::to_string(k));
    }
    SeededRng rng(derive_seed(seed, SeedStream::RandomChannels));
    auto perm = rng.permutation<Index>(static_cast<std::size_t>(dim));
    perm.resize(static_cast<std::size_t>(k));
    std::sort(perm.begin(), perm.end());
    return {std::move(perm), profile};
}

PcaReference pca_reference(std::span<const FeatureTensor> support, Index k, double dominance_threshold) {
    const Index dim = checked_dim(support);
    if (k < 1 || k > dim) {
        throw ParameterError("K must lie in [1, " + std::to_string(dim) + "], got " + std::to_string(k));
    }
    Index rows = 0;
    for (const auto& t : support) rows += t.token_count();
    Eigen::MatrixXd pooled(rows, dim);
    Index at = 0;
    for (const auto& t : support) {
        pooled.middleRows(at, t.token_count()) = t.tokens.cast<double>();
        at += t.token_count();
    }
    const Eigen::RowVectorXd mean = pooled.colwise().mean();
    pooled.rowwise() -= mean;
    const Eigen::MatrixXd covariance = (pooled.transpose() * pooled) / static_cast<double>(rows);

    PcaReference ref;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(covariance);
    if (solver.info() != Eigen::Success) {
        ref.status = PcaStatus::NoConvergence;
        return ref;
    }
    // Eigen returns eigenvalues in ascending order.
    ref.status = PcaStatus::Ok;
    ref.eigenvalues.resize(k);
    for (Index j = 0; j < k; ++j) {
        const Index col = dim - 1 - j;
        ref.eigenvalues[j] = solver.eigenvalues()[col];
        Index arg = 0;
        const double peak = solver.eigenvectors().col(col).cwiseAbs().maxCoeff(&arg);
        ref.indices.push_back(arg);
        ref.dominance.push_back(peak);
        if (peak < dominance_threshold) ref.status = PcaStatus::NotAxisDominant;
    }
    return ref;
}

}  // namespace lake
