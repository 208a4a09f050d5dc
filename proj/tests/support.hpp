#pragma once

// Test helpers and brute-force oracles. The oracles are written directly from
// the metric definitions and share no code with the library.

#include "lake/random.hpp"
#include "lake/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <queue>
#include <set>
#include <string>
#include <vector>

namespace lake::testing {

/// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("lake_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline RowMatrix<float> random_matrix(SeededRng& rng, Index rows, Index cols, double sd = 1.0) {
    RowMatrix<float> m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(rng.normal(0.0, sd));
    return m;
}

inline FeatureTensor random_tensor(SeededRng& rng, Grid grid, Index dim, double sd = 1.0) {
    return {random_matrix(rng, grid.size(), dim, sd), grid, 12};
}

// --- variance --------------------------------------------------------------

inline std::vector<double> variance_oracle(const std::vector<FeatureTensor>& support) {
    const Index dim = support.front().dim();
    std::vector<double> out(static_cast<std::size_t>(dim));
    for (Index c = 0; c < dim; ++c) {
        double sum = 0.0;
        double n = 0.0;
        for (const auto& t : support) {
            for (Index i = 0; i < t.token_count(); ++i) {
                sum += t.tokens(i, c);
                n += 1.0;
            }
        }
        const double mean = sum / n;
        double sq = 0.0;
        for (const auto& t : support) {
            for (Index i = 0; i < t.token_count(); ++i) {
                const double dev = t.tokens(i, c) - mean;
                sq += dev * dev;
            }
        }
        out[static_cast<std::size_t>(c)] = sq / n;
    }
    return out;
}

// --- nearest neighbour -----------------------------------------------------

/// min over rows of (1 - cos) / 2, one value per query row.
inline std::vector<double> nn_oracle(const RowMatrix<float>& queries, const RowMatrix<float>& gallery) {
    std::vector<double> out;
    for (Index i = 0; i < queries.rows(); ++i) {
        double best = 1.0;
        for (Index r = 0; r < gallery.rows(); ++r) {
            double dot = 0.0, qq = 0.0, gg = 0.0;
            for (Index c = 0; c < queries.cols(); ++c) {
                const double q = queries(i, c);
                const double g = gallery(r, c);
                dot += q * g;
                qq += q * q;
                gg += g * g;
            }
            const double cosine = (qq < 1e-24 || gg < 1e-24) ? 0.0 : dot / (std::sqrt(qq) * std::sqrt(gg));
            best = std::min(best, (1.0 - cosine) / 2.0);
        }
        out.push_back(best);
    }
    return out;
}

// --- ranking metrics -------------------------------------------------------

inline std::vector<double> distinct_descending(std::vector<double> v) {
    std::sort(v.begin(), v.end(), std::greater<>());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

inline double auroc_oracle(const std::vector<double>& s, const std::vector<std::uint8_t>& l) {
    double wins = 0.0, pos = 0.0, neg = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) (l[i] ? pos : neg) += 1.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!l[i]) continue;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (l[j]) continue;
            if (s[i] > s[j]) wins += 1.0;
            if (s[i] == s[j]) wins += 0.5;
        }
    }
    return wins / (pos * neg);
}

struct PrPoint {
    double precision, recall;
};

/// Precision and recall of "score >= t" at every distinct score t, highest t first.
inline std::vector<PrPoint> pr_oracle(const std::vector<double>& s, const std::vector<std::uint8_t>& l) {
    double total = 0.0;
    for (auto v : l) total += v;
    std::vector<PrPoint> pts;
    for (double t : distinct_descending(s)) {
        double tp = 0.0, predicted = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] >= t) {
                predicted += 1.0;
                tp += l[i];
            }
        }
        pts.push_back({tp / predicted, tp / total});
    }
    return pts;
}

inline double ap_oracle(const std::vector<double>& s, const std::vector<std::uint8_t>& l) {
    double ap = 0.0, prev = 0.0;
    for (const auto& p : pr_oracle(s, l)) {
        ap += (p.recall - prev) * p.precision;
        prev = p.recall;
    }
    return ap;
}

inline double f1_oracle(const std::vector<double>& s, const std::vector<std::uint8_t>& l) {
    double best = 0.0;
    for (const auto& p : pr_oracle(s, l)) {
        if (p.precision + p.recall > 0.0) best = std::max(best, 2.0 * p.precision * p.recall / (p.precision + p.recall));
    }
    return best;
}

// --- PRO -------------------------------------------------------------------

/// Region ids by breadth-first flood fill; -1 for background.
inline RowMatrix<int> flood_regions(const RowMatrix<std::uint8_t>& mask, bool eight, int& count) {
    RowMatrix<int> id = RowMatrix<int>::Constant(mask.rows(), mask.cols(), -1);
    count = 0;
    for (Index r0 = 0; r0 < mask.rows(); ++r0) {
        for (Index c0 = 0; c0 < mask.cols(); ++c0) {
            if (!mask(r0, c0) || id(r0, c0) >= 0) continue;
            std::queue<std::pair<Index, Index>> q;
            q.push({r0, c0});
            id(r0, c0) = count;
            while (!q.empty()) {
                auto [r, c] = q.front();
                q.pop();
                for (int dr = -1; dr <= 1; ++dr) {
                    for (int dc = -1; dc <= 1; ++dc) {
                        if (dr == 0 && dc == 0) continue;
                        if (!eight && dr != 0 && dc != 0) continue;
                        const Index rr = r + dr, cc = c + dc;
                        if (rr < 0 || cc < 0 || rr >= mask.rows() || cc >= mask.cols()) continue;
                        if (!mask(rr, cc) || id(rr, cc) >= 0) continue;
                        id(rr, cc) = count;
                        q.push({rr, cc});
                    }
                }
            }
            ++count;
        }
    }
    return id;
}

/// Per-threshold brute force: FPR and mean region overlap at every distinct
/// pixel score, linear interpolation at the limit, area / limit.
inline double pro_oracle(const std::vector<RowMatrix<float>>& maps, const std::vector<RowMatrix<std::uint8_t>>& masks,
                         double limit, bool eight = true) {
    std::vector<double> all;
    std::vector<RowMatrix<int>> regions;
    std::vector<int> counts;
    for (std::size_t m = 0; m < maps.size(); ++m) {
        int n = 0;
        regions.push_back(flood_regions(masks[m], eight, n));
        counts.push_back(n);
        for (Index i = 0; i < maps[m].size(); ++i) all.push_back(maps[m].data()[i]);
    }
    std::vector<double> xs{0.0}, ys{0.0};
    for (double t : distinct_descending(all)) {
        double fp = 0.0, normals = 0.0, overlap = 0.0, nregions = 0.0;
        for (std::size_t m = 0; m < maps.size(); ++m) {
            std::vector<double> hit(static_cast<std::size_t>(counts[m]), 0.0), size(hit.size(), 0.0);
            for (Index i = 0; i < maps[m].size(); ++i) {
                const int r = regions[m].data()[i];
                const bool on = maps[m].data()[i] >= t;
                if (r < 0) {
                    normals += 1.0;
                    fp += on;
                } else {
                    size[static_cast<std::size_t>(r)] += 1.0;
                    hit[static_cast<std::size_t>(r)] += on;
                }
            }
            for (std::size_t r = 0; r < hit.size(); ++r) overlap += hit[r] / size[r];
            nregions += static_cast<double>(hit.size());
        }
        xs.push_back(fp / normals);
        ys.push_back(overlap / nregions);
    }
    double area = 0.0;
    for (std::size_t i = 1; i < xs.size(); ++i) {
        const double x0 = xs[i - 1], x1 = xs[i];
        if (x0 >= limit) break;
        if (x1 <= limit) {
            area += (x1 - x0) * (ys[i - 1] + ys[i]) / 2.0;
        } else {
            const double y = ys[i - 1] + (ys[i] - ys[i - 1]) * (limit - x0) / (x1 - x0);
            area += (limit - x0) * (ys[i - 1] + y) / 2.0;
            break;
        }
    }
    return area / limit;
}

// --- text probe ------------------------------------------------------------

inline double softmax_oracle(const Vector<float>& p, const Vector<float>& tn, const Vector<float>& ta, double temperature,
                             bool normalize) {
    double sn = 0.0, sa = 0.0, pp = 0.0, nn = 0.0, aa = 0.0;
    for (Index j = 0; j < p.size(); ++j) {
        sn += double(p[j]) * tn[j];
        sa += double(p[j]) * ta[j];
        pp += double(p[j]) * p[j];
        nn += double(tn[j]) * tn[j];
        aa += double(ta[j]) * ta[j];
    }
    if (normalize) {
        sn /= std::sqrt(pp) * std::sqrt(nn);
        sa /= std::sqrt(pp) * std::sqrt(aa);
    }
    const double en = std::exp(sn / temperature), ea = std::exp(sa / temperature);
    return ea / (en + ea);
}

}  // namespace lake::testing
