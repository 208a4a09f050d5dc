#include "lake/gallery.hpp"

#include "lake/error.hpp"
#include "lake/npy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lake {

namespace {

// Gallery rows converted and multiplied per step; keeps the score block in L2.
constexpr Index kBlockRows = 2048;

Vector<double> inverse_norms(const Vector<double>& norms) {
    return norms.unaryExpr([](double n) { return n < kZeroNormEpsilon ? 0.0 : 1.0 / n; });
}

template <typename Row>
Vector<double> unit(const Row& row) {
    Vector<double> v = row.template cast<double>().transpose();
    double sq = 0.0;
    for (Index j = 0; j < v.size(); ++j) sq += v[j] * v[j];
    return v / std::sqrt(sq);
}

}  // namespace

Gallery::Gallery(TokenMatrix entries, SensitiveSubspace subspace, GallerySource source)
    : entries_(std::move(entries)), subspace_(std::move(subspace)), source_(std::move(source)) {
    if (entries_.rows() < 1) throw DegenerateInputError("gallery has no rows");
    if (entries_.cols() != subspace_.size()) {
        throw ShapeError("gallery width " + std::to_string(entries_.cols()) + " does not match subspace size " +
                         std::to_string(subspace_.size()));
    }
    row_norms_ = entries_.cast<double>().rowwise().norm();
}

std::size_t Gallery::byte_size() const noexcept {
    return static_cast<std::size_t>(entries_.size()) * sizeof(float) +
           static_cast<std::size_t>(row_norms_.size()) * sizeof(double) +
           subspace_.indices.size() * sizeof(Index);
}

Gallery build_gallery(std::span<const FeatureTensor> support, const SensitiveSubspace& subspace,
                      GallerySource source) {
    if (support.empty()) throw DegenerateInputError("cannot build a gallery from an empty support set");
    const Grid grid = support.front().grid;
    Index rows = 0;
    for (const auto& t : support) {
        if (t.grid != grid) throw ShapeError("support tensors disagree on grid shape");
        if (t.dim() != support.front().dim()) throw ShapeError("support tensors disagree on channel count");
        rows += t.token_count();
    }
    TokenMatrix entries(rows, subspace.size());
    Index at = 0;
    for (const auto& t : support) {
        entries.middleRows(at, t.token_count()) = project(t, subspace);
        at += t.token_count();
    }
    return Gallery(std::move(entries), subspace, std::move(source));
}

DeviationMap projected_deviations(const TokenMatrix& projected, Grid grid, const Gallery& gallery) {
    if (projected.cols() != gallery.dim()) {
        throw ShapeError("projected tokens have width " + std::to_string(projected.cols()) + ", gallery has " +
                         std::to_string(gallery.dim()));
    }
    const Index tokens = projected.rows();
    const Index rows = gallery.rows();

    const RowMatrix<double> queries = projected.cast<double>();
    const Vector<double> query_inv = inverse_norms(queries.rowwise().norm());
    const Vector<double> row_inv = inverse_norms(gallery.row_norms());
    // Column i holds unit query i; zero-norm queries become zero columns (cosine 0).
    const Eigen::MatrixXd unit_queries = (queries.array().colwise() * query_inv.array()).matrix().transpose();

    Vector<double> best = Vector<double>::Constant(tokens, -std::numeric_limits<double>::infinity());
    std::vector<Index> best_row(static_cast<std::size_t>(tokens), 0);

    RowMatrix<double> block;
    Eigen::MatrixXd cosines;
    for (Index start = 0; start < rows; start += kBlockRows) {
        const Index count = std::min(kBlockRows, rows - start);
        block = gallery.entries().middleRows(start, count).cast<double>();
        block.array().colwise() *= row_inv.segment(start, count).array();
        cosines.noalias() = block * unit_queries;  // count x tokens
        for (Index i = 0; i < tokens; ++i) {
            const double* col = cosines.col(i).data();
            double b = best[i];
            Index arg = best_row[static_cast<std::size_t>(i)];
            for (Index r = 0; r < count; ++r) {
                if (col[r] > b) {
                    b = col[r];
                    arg = start + r;
                }
            }
            best[i] = b;
            best_row[static_cast<std::size_t>(i)] = arg;
        }
    }

    DeviationMap dev;
    dev.grid = grid;
    dev.d.resize(tokens);
    std::size_t zero_queries = 0;
    for (Index i = 0; i < tokens; ++i) zero_queries += query_inv[i] == 0.0;
    const std::size_t zero_rows = static_cast<std::size_t>((row_inv.array() == 0.0).count());
    dev.degenerate_pairs = zero_queries * static_cast<std::size_t>(rows) +
                           zero_rows * static_cast<std::size_t>(tokens) - zero_queries * zero_rows;

    // Re-evaluate the winning pair as |u - v|^2 / 4 on unit vectors, both
    // normalised by the same routine: identical inputs give exactly zero,
    // which the dot-product form cannot guarantee.
    for (Index i = 0; i < tokens; ++i) {
        const Index r = best_row[static_cast<std::size_t>(i)];
        if (query_inv[i] == 0.0 || row_inv[r] == 0.0) {
            dev.d[i] = 0.5;
            continue;
        }
        const Vector<double> u = unit(projected.row(i));
        const Vector<double> v = unit(gallery.entries().row(r));
        dev.d[i] = std::clamp((u - v).squaredNorm() / 4.0, 0.0, 1.0);
    }
    dev.nearest = std::move(best_row);
    return dev;
}

DeviationMap token_deviations(const FeatureTensor& test, const Gallery& gallery) {
    return projected_deviations(project(test, gallery.subspace()), test.grid, gallery);
}

double visual_score(const DeviationMap& dev) {
    if (dev.size() == 0) throw DegenerateInputError("deviation map is empty");
    return dev.d.maxCoeff();
}

void save_gallery(const Gallery& gallery, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    npy::write_matrix(dir / "gallery_entries.npy", gallery.entries());
    npy::write_indices(dir / "gallery_indices.npy", gallery.subspace().indices);
}

Gallery load_gallery(const std::filesystem::path& dir) {
    TokenMatrix entries = npy::read_matrix(dir / "gallery_entries.npy");
    const auto raw = npy::read_indices(dir / "gallery_indices.npy");
    SensitiveSubspace subspace;
    for (auto v : raw) {
        if (v < 0) throw ValidationError("gallery_indices.npy: negative channel index");
        if (!subspace.indices.empty() && v <= subspace.indices.back()) {
            throw ValidationError("gallery_indices.npy: indices must be strictly ascending");
        }
        subspace.indices.push_back(static_cast<Index>(v));
    }
    if (!entries.allFinite()) throw ValidationError("gallery_entries.npy: contains NaN or Inf");
    return Gallery(std::move(entries), std::move(subspace));
}

}  // namespace lake
