#include "lake/metrics.hpp"

#include "lake/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lake {

namespace {

// Cumulative true/false positive counts at each distinct threshold, highest first.
struct SweepPoint {
    std::size_t tp = 0;
    std::size_t fp = 0;
};

std::vector<std::size_t> descending_order(const std::vector<double>& scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return order;
}

std::vector<SweepPoint> threshold_sweep(const LabeledScores& data) {
    const auto order = descending_order(data.scores);
    std::vector<SweepPoint> sweep;
    SweepPoint running;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (data.labels[order[i]]) {
            ++running.tp;
        } else {
            ++running.fp;
        }
        const bool group_end = i + 1 == order.size() || data.scores[order[i + 1]] != data.scores[order[i]];
        if (group_end) sweep.push_back(running);
    }
    return sweep;
}

void require_positives(const LabeledScores& data, const char* metric) {
    if (data.positives() == 0) throw UndefinedMetricError(std::string(metric) + " is undefined without positive samples");
}

// Union-find over pixel indices for two-pass component labelling.
struct DisjointSet {
    std::vector<std::int32_t> parent;
    std::int32_t find(std::int32_t x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    }
    void unite(std::int32_t a, std::int32_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
    }
};

}  // namespace

LabeledScores::LabeledScores(std::vector<double> s, std::vector<std::uint8_t> l)
    : scores(std::move(s)), labels(std::move(l)) {
    if (scores.size() != labels.size()) throw ShapeError("scores and labels differ in length");
    for (auto v : labels) {
        if (v > 1) throw ValidationError("labels must be 0 or 1");
    }
    for (double v : scores) {
        if (std::isnan(v)) throw ValidationError("scores contain NaN");
    }
}

std::size_t LabeledScores::positives() const noexcept {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
}

double auroc(const LabeledScores& data) {
    const std::size_t pos = data.positives();
    const std::size_t neg = data.size() - pos;
    if (pos == 0 || neg == 0) throw UndefinedMetricError("AUROC needs both positive and negative samples");

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return data.scores[a] < data.scores[b]; });
    double positive_rank_sum = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && data.scores[order[j]] == data.scores[order[i]]) ++j;
        // ranks i+1 .. j share their mean
        const double rank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t t = i; t < j; ++t) {
            if (data.labels[order[t]]) positive_rank_sum += rank;
        }
        i = j;
    }
    const double p = static_cast<double>(pos);
    const double u = positive_rank_sum - p * (p + 1.0) / 2.0;
    return u / (p * static_cast<double>(neg));
}

double average_precision(const LabeledScores& data) {
    require_positives(data, "average precision");
    const double total = static_cast<double>(data.positives());
    double ap = 0.0;
    double previous_recall = 0.0;
    for (const auto& pt : threshold_sweep(data)) {
        const double recall = static_cast<double>(pt.tp) / total;
        const double precision = static_cast<double>(pt.tp) / static_cast<double>(pt.tp + pt.fp);
        ap += (recall - previous_recall) * precision;
        previous_recall = recall;
    }
    return ap;
}

double f1_max(const LabeledScores& data) {
    require_positives(data, "F1-max");
    const double total = static_cast<double>(data.positives());
    double best = 0.0;
    for (const auto& pt : threshold_sweep(data)) {
        const double precision = static_cast<double>(pt.tp) / static_cast<double>(pt.tp + pt.fp);
        const double recall = static_cast<double>(pt.tp) / total;
        const double f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
        best = std::max(best, f1);
    }
    return best;
}

ComponentLabels label_components(const RowMatrix<std::uint8_t>& mask, Connectivity connectivity) {
    const Index rows = mask.rows();
    const Index cols = mask.cols();
    ComponentLabels out;
    out.labels = RowMatrix<std::int32_t>::Constant(rows, cols, -1);
    DisjointSet sets;
    auto provisional = [&](Index r, Index c) { return out.labels(r, c); };

    for (Index r = 0; r < rows; ++r) {
        for (Index c = 0; c < cols; ++c) {
            if (!mask(r, c)) continue;
            std::int32_t neighbours[4];
            int n = 0;
            if (c > 0 && mask(r, c - 1)) neighbours[n++] = provisional(r, c - 1);
            if (r > 0 && mask(r - 1, c)) neighbours[n++] = provisional(r - 1, c);
            if (connectivity == Connectivity::Eight && r > 0) {
                if (c > 0 && mask(r - 1, c - 1)) neighbours[n++] = provisional(r - 1, c - 1);
                if (c + 1 < cols && mask(r - 1, c + 1)) neighbours[n++] = provisional(r - 1, c + 1);
            }
            if (n == 0) {
                const auto id = static_cast<std::int32_t>(sets.parent.size());
                sets.parent.push_back(id);
                out.labels(r, c) = id;
            } else {
                std::int32_t lowest = neighbours[0];
                for (int k = 1; k < n; ++k) lowest = std::min(lowest, neighbours[k]);
                for (int k = 0; k < n; ++k) sets.unite(lowest, neighbours[k]);
                out.labels(r, c) = lowest;
            }
        }
    }
    // Compact roots to 0..count-1 in raster order of first appearance.
    std::vector<std::int32_t> compact(sets.parent.size(), -1);
    for (Index r = 0; r < rows; ++r) {
        for (Index c = 0; c < cols; ++c) {
            auto& l = out.labels(r, c);
            if (l < 0) continue;
            const auto root = static_cast<std::size_t>(sets.find(l));
            if (compact[root] < 0) compact[root] = out.count++;
            l = compact[root];
        }
    }
    return out;
}

double truncated_trapezoid(std::span<const double> x, std::span<const double> y, double x_limit) {
    if (x.size() != y.size()) throw ShapeError("curve coordinates differ in length");
    double area = 0.0;
    double x0 = 0.0;
    double y0 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double x1 = x[i];
        const double y1 = y[i];
        if (x1 <= x_limit) {
            area += (x1 - x0) * (y0 + y1) / 2.0;
        } else {
            if (x0 < x_limit) {
                const double y_at = y0 + (y1 - y0) * (x_limit - x0) / (x1 - x0);
                area += (x_limit - x0) * (y0 + y_at) / 2.0;
            }
            return area;
        }
        x0 = x1;
        y0 = y1;
    }
    return area;
}

double pro(std::span<const RowMatrix<float>> maps, std::span<const RowMatrix<std::uint8_t>> masks, double fpr_limit,
           Connectivity connectivity) {
    if (maps.size() != masks.size()) throw ShapeError("PRO needs one mask per map");
    if (!(fpr_limit > 0.0 && fpr_limit <= 1.0)) throw ParameterError("PRO FPR limit must lie in (0, 1]");

    struct Pixel {
        float score;
        std::int32_t region;  // -1 = normal pixel
    };
    std::vector<Pixel> pixels;
    std::vector<double> region_size;
    std::size_t normal_count = 0;
    for (std::size_t m = 0; m < maps.size(); ++m) {
        if (maps[m].rows() != masks[m].rows() || maps[m].cols() != masks[m].cols()) {
            throw ShapeError("map " + std::to_string(m) + " and its mask differ in shape");
        }
        const ComponentLabels comp = label_components(masks[m], connectivity);
        const auto base = static_cast<std::int32_t>(region_size.size());
        region_size.resize(region_size.size() + static_cast<std::size_t>(comp.count), 0.0);
        for (Index i = 0; i < comp.labels.size(); ++i) {
            const std::int32_t l = comp.labels.data()[i];
            const float s = maps[m].data()[i];
            if (std::isnan(s)) throw ValidationError("pixel map contains NaN");
            if (l < 0) {
                pixels.push_back({s, -1});
                ++normal_count;
            } else {
                pixels.push_back({s, base + l});
                region_size[static_cast<std::size_t>(base + l)] += 1.0;
            }
        }
    }
    if (region_size.empty()) throw UndefinedMetricError("PRO is undefined without anomalous pixels");
    if (normal_count == 0) throw UndefinedMetricError("PRO is undefined without normal pixels");

    std::stable_sort(pixels.begin(), pixels.end(), [](const Pixel& a, const Pixel& b) { return a.score > b.score; });

    const double regions = static_cast<double>(region_size.size());
    std::vector<double> fprs;
    std::vector<double> overlaps;
    std::size_t false_positives = 0;
    double overlap_sum = 0.0;
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        const Pixel& px = pixels[i];
        if (px.region < 0) {
            ++false_positives;
        } else {
            overlap_sum += 1.0 / region_size[static_cast<std::size_t>(px.region)];
        }
        if (i + 1 == pixels.size() || pixels[i + 1].score != px.score) {
            fprs.push_back(static_cast<double>(false_positives) / static_cast<double>(normal_count));
            overlaps.push_back(std::min(1.0, overlap_sum / regions));
        }
    }
    const double area = truncated_trapezoid(fprs, overlaps, fpr_limit);
    return std::clamp(area / fpr_limit, 0.0, 1.0);
}

}  // namespace lake
