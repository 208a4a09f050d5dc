#include "lake/report.hpp"

#include "lake/error.hpp"
#include "lake/npy.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace lake {

namespace {

using nlohmann::ordered_json;

ordered_json to_json(const ImageMetrics& m) { return {{"auroc", m.auroc}, {"ap", m.ap}, {"f1_max", m.f1_max}}; }

ordered_json to_json(const PixelMetrics& m) {
    return {{"auroc", m.auroc}, {"ap", m.ap}, {"f1_max", m.f1_max}, {"pro", m.pro}};
}

}  // namespace

ImageMetrics image_metrics(std::span<const double> fused_scores, std::span<const int> labels) {
    std::vector<std::uint8_t> l(labels.begin(), labels.end());
    const LabeledScores data({fused_scores.begin(), fused_scores.end()}, std::move(l));
    return {auroc(data), average_precision(data), f1_max(data)};
}

CategoryReport evaluate(std::span<const AnomalyResult> results, const DatasetManifest& manifest,
                        const EvaluateOptions& options) {
    std::map<std::string, const AnomalyResult*> by_id;
    for (const auto& r : results) by_id[r.image_id] = &r;

    CategoryReport report;
    report.category = manifest.category;
    std::vector<double> scores;
    std::vector<int> labels;
    bool masks_available = true;
    for (const auto& entry : manifest.test) {
        const auto it = by_id.find(entry.id);
        if (it == by_id.end()) throw ValidationError("no result for test image '" + entry.id + "'");
        scores.push_back(it->second->s);
        labels.push_back(entry.label);
        if (entry.label == 1 && !entry.mask) masks_available = false;
    }
    report.test_count = labels.size();
    report.anomalous_count = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    report.image = image_metrics(scores, labels);

    if (options.pixel == PixelMode::Off) return report;
    if (!masks_available) {
        if (options.pixel == PixelMode::Required) {
            throw ParameterError("pixel metrics requested but some anomalous test images have no mask");
        }
        return report;
    }

    std::vector<RowMatrix<float>> maps;
    std::vector<RowMatrix<std::uint8_t>> masks;
    std::vector<double> pixel_scores;
    std::vector<std::uint8_t> pixel_labels;
    const ImageSize size = manifest.image_size;
    for (const auto& entry : manifest.test) {
        const AnomalyResult& r = *by_id.at(entry.id);
        if (r.pixel_map.rows() != size.height || r.pixel_map.cols() != size.width) {
            throw ShapeError("pixel map of '" + entry.id + "' does not match the image size");
        }
        RowMatrix<std::uint8_t> mask = entry.mask ? npy::read_mask(*entry.mask, size.height, size.width)
                                                  : RowMatrix<std::uint8_t>::Zero(size.height, size.width);
        for (Index i = 0; i < mask.size(); ++i) {
            pixel_scores.push_back(r.pixel_map.data()[i]);
            pixel_labels.push_back(mask.data()[i]);
        }
        maps.push_back(r.pixel_map);
        masks.push_back(std::move(mask));
    }
    const LabeledScores pooled(std::move(pixel_scores), std::move(pixel_labels));
    PixelMetrics pm;
    pm.auroc = auroc(pooled);
    pm.ap = average_precision(pooled);
    pm.f1_max = f1_max(pooled);
    pm.pro = pro(maps, masks, options.fpr_limit, options.connectivity);
    report.pixel = pm;
    return report;
}

EvaluationReport aggregate(std::vector<CategoryReport> categories, nlohmann::ordered_json metadata) {
    if (categories.empty()) throw DegenerateInputError("nothing to aggregate");
    EvaluationReport report;
    report.metadata = std::move(metadata);
    const double n = static_cast<double>(categories.size());
    bool all_pixel = true;
    PixelMetrics pixel_sum;
    for (const auto& c : categories) {
        report.image_mean.auroc += c.image.auroc / n;
        report.image_mean.ap += c.image.ap / n;
        report.image_mean.f1_max += c.image.f1_max / n;
        if (c.pixel) {
            pixel_sum.auroc += c.pixel->auroc / n;
            pixel_sum.ap += c.pixel->ap / n;
            pixel_sum.f1_max += c.pixel->f1_max / n;
            pixel_sum.pro += c.pixel->pro / n;
        } else {
            all_pixel = false;
        }
    }
    if (all_pixel) report.pixel_mean = pixel_sum;
    report.categories = std::move(categories);
    return report;
}

ordered_json to_json(const EvaluationReport& report) {
    ordered_json doc;
    doc["metadata"] = report.metadata;
    doc["categories"] = ordered_json::array();
    for (const auto& c : report.categories) {
        ordered_json entry;
        entry["category"] = c.category;
        entry["test_count"] = c.test_count;
        entry["anomalous_count"] = c.anomalous_count;
        entry["image"] = to_json(c.image);
        entry["pixel"] = c.pixel ? to_json(*c.pixel) : ordered_json(nullptr);
        doc["categories"].push_back(std::move(entry));
    }
    doc["aggregate"] = {{"image", to_json(report.image_mean)},
                        {"pixel", report.pixel_mean ? to_json(*report.pixel_mean) : ordered_json(nullptr)}};
    return doc;
}

std::string to_csv(const EvaluationReport& report) {
    std::ostringstream out;
    out.precision(17);
    out << "category,test_count,anomalous_count,image_auroc,image_ap,image_f1_max,pixel_auroc,pixel_ap,pixel_f1_max,"
           "pixel_pro\n";
    for (const auto& c : report.categories) {
        out << c.category << ',' << c.test_count << ',' << c.anomalous_count << ',' << c.image.auroc << ','
            << c.image.ap << ',' << c.image.f1_max;
        if (c.pixel) {
            out << ',' << c.pixel->auroc << ',' << c.pixel->ap << ',' << c.pixel->f1_max << ',' << c.pixel->pro;
        } else {
            out << ",,,,";
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace lake
