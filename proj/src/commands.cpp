#include "lake/commands.hpp"

#include "lake/error.hpp"
#include "lake/npy.hpp"
#include "lake/random.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

namespace lake {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
    return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

void write_json(const fs::path& path, const ordered_json& doc) { write_text(path, doc.dump(2) + "\n"); }

ordered_json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    try {
        return ordered_json::parse(in);
    } catch (const ordered_json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

std::size_t parse_size(const std::string& text, const char* what) {
    std::size_t pos = 0;
    long long v = 0;
    try {
        v = std::stoll(text, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != text.size() || v < 1) throw ParameterError(std::string(what) + " grid value '" + text + "' is not a positive integer");
    return static_cast<std::size_t>(v);
}

double parse_double(const std::string& text, const char* what) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != text.size()) throw ParameterError(std::string(what) + " grid value '" + text + "' is not a number");
    return v;
}

}  // namespace

std::string to_string(NeuronSelection selection) { return selection == NeuronSelection::TopK ? "topk" : "random"; }

NeuronSelection parse_selection(const std::string& text) {
    if (text == "topk") return NeuronSelection::TopK;
    if (text == "random") return NeuronSelection::Random;
    throw ParameterError("neuron selection must be 'topk' or 'random', got '" + text + "'");
}

std::string to_string(AblationAxis axis) {
    switch (axis) {
        case AblationAxis::Shots: return "shots";
        case AblationAxis::K: return "k";
        case AblationAxis::Alpha: return "alpha";
        case AblationAxis::NeuronSelection: return "neuron-selection";
    }
    return "?";
}

AblationAxis parse_axis(const std::string& text) {
    if (text == "shots") return AblationAxis::Shots;
    if (text == "k") return AblationAxis::K;
    if (text == "alpha") return AblationAxis::Alpha;
    if (text == "neuron-selection") return AblationAxis::NeuronSelection;
    throw ParameterError("ablation axis must be one of shots, k, alpha, neuron-selection; got '" + text + "'");
}

std::vector<std::size_t> select_support(std::size_t available, std::optional<std::size_t> shots, std::uint64_t seed) {
    std::vector<std::size_t> chosen;
    if (!shots) {
        chosen.resize(available);
        for (std::size_t i = 0; i < available; ++i) chosen[i] = i;
        return chosen;
    }
    if (*shots < 1 || *shots > available) {
        throw ParameterError("shot count " + std::to_string(*shots) + " outside [1, " + std::to_string(available) + "]");
    }
    SeededRng rng(derive_seed(seed, SeedStream::SupportSubsample));
    chosen = rng.permutation(available);
    chosen.resize(*shots);
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

ordered_json config_echo(const RunConfig& config, const DatasetManifest& manifest) {
    ordered_json echo;
    echo["k"] = config.pipeline.k;
    echo["alpha"] = config.pipeline.alpha;
    echo["temperature"] = config.pipeline.temperature;
    echo["normalize"] = config.pipeline.normalize;
    echo["selection"] = to_string(config.selection);
    echo["seed"] = config.seed;
    echo["shots"] = config.shots ? *config.shots : manifest.support.size();
    echo["layers"] = {manifest.layer, manifest.layer_lp};
    return echo;
}

std::vector<AnomalyResult> score_all(const std::vector<TestEntry>& tests, const Pipeline& pipeline, int workers) {
    std::vector<AnomalyResult> results(tests.size());
    std::vector<std::exception_ptr> errors(tests.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < tests.size(); i = next++) {
            try {
                results[i] = score_image(tests[i], pipeline);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const auto threads = static_cast<std::size_t>(std::max(1, workers));
    if (threads == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < std::min(threads, tests.size()); ++t) pool.emplace_back(work);
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return results;
}

ScoredRun run_pipeline(const DatasetManifest& manifest, std::span<const FeatureTensor> all_support,
                       const RunConfig& config) {
    validate(config.pipeline, manifest.dim);
    const auto start = Clock::now();
    const auto chosen = select_support(all_support.size(), config.shots, config.seed);
    std::vector<FeatureTensor> support;
    std::vector<std::string> ids;
    for (auto i : chosen) {
        support.push_back(all_support[i]);
        ids.push_back(manifest.support[i].id);
    }
    const VarianceProfile profile = channel_variance(support);
    const SensitiveSubspace subspace = config.selection == NeuronSelection::TopK
                                           ? select_topk(profile, config.pipeline.k)
                                           : random_subspace(profile, config.pipeline.k, config.seed);
    ScoredRun run{{}, make_pipeline(manifest, support, ids, subspace, config.pipeline), 0.0, 0.0};
    run.gallery_ms = elapsed_ms(start);

    const auto scoring = Clock::now();
    run.results = score_all(manifest.test, run.pipeline, config.workers);
    run.scoring_ms = elapsed_ms(scoring);
    return run;
}

void cmd_profile(const fs::path& manifest_path, const RunConfig& config, const fs::path& out) {
    const DatasetManifest manifest = load_manifest(manifest_path);
    validate(config.pipeline, manifest.dim);
    const auto all_support = load_support(manifest);
    const auto chosen = select_support(all_support.size(), config.shots, config.seed);
    std::vector<FeatureTensor> support;
    for (auto i : chosen) support.push_back(all_support[i]);

    const VarianceProfile profile = channel_variance(support);
    const SensitiveSubspace subspace = config.selection == NeuronSelection::TopK
                                           ? select_topk(profile, config.pipeline.k)
                                           : random_subspace(profile, config.pipeline.k, config.seed);

    fs::create_directories(out);
    npy::write_vector(out / "sigma2.npy", profile.sigma2);
    npy::write_indices(out / "indices.npy", subspace.indices);

    double cut = std::numeric_limits<double>::infinity();
    double max_unselected = -std::numeric_limits<double>::infinity();
    std::vector<bool> selected(static_cast<std::size_t>(profile.dim()), false);
    for (auto i : subspace.indices) {
        selected[static_cast<std::size_t>(i)] = true;
        cut = std::min(cut, profile.sigma2[i]);
    }
    for (Index d = 0; d < profile.dim(); ++d) {
        if (!selected[static_cast<std::size_t>(d)]) max_unselected = std::max(max_unselected, profile.sigma2[d]);
    }

    ordered_json doc;
    doc["config"] = config_echo(config, manifest);
    doc["category"] = manifest.category;
    doc["dim"] = profile.dim();
    doc["sample_count"] = profile.sample_count;
    doc["k"] = subspace.size();
    doc["cut_value"] = cut;
    doc["max_unselected"] = subspace.size() == profile.dim() ? ordered_json(nullptr) : ordered_json(max_unselected);
    doc["min_variance"] = profile.sigma2.minCoeff();
    doc["max_variance"] = profile.sigma2.maxCoeff();
    doc["indices"] = subspace.indices;
    write_json(out / "profile.json", doc);
}

void cmd_score(const fs::path& manifest_path, const RunConfig& config, const fs::path& out,
               const ScoreOutputs& outputs) {
    const DatasetManifest manifest = load_manifest(manifest_path);
    if (manifest.test.empty()) throw ValidationError("manifest has no test entries to score");
    const auto support = load_support(manifest);
    const ScoredRun run = run_pipeline(manifest, support, config);

    fs::create_directories(out / "maps");
    ordered_json doc;
    doc["config"] = config_echo(config, manifest);
    doc["category"] = manifest.category;
    doc["support_ids"] = run.pipeline.gallery.source().support_ids;
    doc["results"] = ordered_json::array();
    ordered_json timings;
    timings["workers"] = config.workers;
    timings["gallery_ms"] = run.gallery_ms;
    timings["scoring_ms"] = run.scoring_ms;
    timings["images"] = ordered_json::array();
    for (const auto& r : run.results) {
        doc["results"].push_back({{"id", r.image_id},
                                  {"label", r.label},
                                  {"s_vis", r.s_vis},
                                  {"s_text", r.s_text},
                                  {"s", r.s},
                                  {"degenerate_pairs", r.deviation.degenerate_pairs}});
        timings["images"].push_back({{"id", r.image_id},
                                     {"load_ms", r.timing.load_ms},
                                     {"visual_ms", r.timing.visual_ms},
                                     {"text_ms", r.timing.text_ms},
                                     {"fuse_ms", r.timing.fuse_ms},
                                     {"upsample_ms", r.timing.upsample_ms},
                                     {"total_ms", r.timing.total_ms}});
        npy::write_matrix(out / "maps" / (r.image_id + ".npy"), r.pixel_map);
    }
    write_json(out / "results.json", doc);
    if (outputs.write_timings) write_json(out / "timings.json", timings);
    if (outputs.export_gallery) save_gallery(run.pipeline.gallery, out / "gallery");
}

std::vector<AnomalyResult> load_results(const fs::path& results_dir, const DatasetManifest& manifest) {
    const ordered_json doc = read_json(results_dir / "results.json");
    if (!doc.contains("results") || !doc["results"].is_array()) {
        throw ValidationError("results.json: missing 'results' array");
    }
    std::vector<AnomalyResult> results;
    for (const auto& entry : doc["results"]) {
        AnomalyResult r;
        try {
            r.image_id = entry.at("id").get<std::string>();
            r.label = entry.at("label").get<int>();
            r.s_vis = entry.at("s_vis").get<double>();
            r.s_text = entry.at("s_text").get<double>();
            r.s = entry.at("s").get<double>();
        } catch (const ordered_json::exception& e) {
            throw ValidationError(std::string("results.json: malformed entry: ") + e.what());
        }
        const fs::path map = results_dir / "maps" / (r.image_id + ".npy");
        if (fs::exists(map)) r.pixel_map = npy::read_matrix(map, manifest.image_size.height, manifest.image_size.width);
        results.push_back(std::move(r));
    }
    return results;
}

EvaluationReport cmd_evaluate(const fs::path& results_dir, const fs::path& manifest_path,
                              const EvaluateOptions& options, const fs::path& out) {
    const DatasetManifest manifest = load_manifest(manifest_path);
    const auto results = load_results(results_dir, manifest);
    const ordered_json scored = read_json(results_dir / "results.json");

    ordered_json metadata;
    metadata["run"] = scored.contains("config") ? scored["config"] : ordered_json(nullptr);
    metadata["fpr_limit"] = options.fpr_limit;
    metadata["connectivity"] = static_cast<int>(options.connectivity);
    const fs::path timings = results_dir / "timings.json";
    if (fs::exists(timings)) {
        const ordered_json t = read_json(timings);
        metadata["timings"] = {{"gallery_ms", t.value("gallery_ms", 0.0)}, {"scoring_ms", t.value("scoring_ms", 0.0)}};
    }
    EvaluationReport report = aggregate({evaluate(results, manifest, options)}, std::move(metadata));

    fs::create_directories(out);
    write_json(out / "report.json", to_json(report));
    write_text(out / "report.csv", to_csv(report));
    return report;
}

std::vector<AblationRow> cmd_ablate(const fs::path& manifest_path, AblationAxis axis,
                                    const std::vector<std::string>& grid, const RunConfig& base,
                                    const EvaluateOptions& options, const fs::path& out) {
    if (grid.empty()) throw ParameterError("ablation grid is empty");
    const DatasetManifest manifest = load_manifest(manifest_path);
    if (manifest.test.empty()) throw ValidationError("manifest has no test entries to score");

    // Parse the whole grid first so a bad value fails before any work.
    std::vector<RunConfig> configs;
    for (const auto& value : grid) {
        RunConfig c = base;
        switch (axis) {
            case AblationAxis::Shots: {
                const std::size_t shots = parse_size(value, "shots");
                if (shots > manifest.support.size()) {
                    throw ParameterError("shot count " + value + " exceeds the " +
                                         std::to_string(manifest.support.size()) + " support images");
                }
                c.shots = shots;
                break;
            }
            case AblationAxis::K: c.pipeline.k = static_cast<Index>(parse_size(value, "k")); break;
            case AblationAxis::Alpha: c.pipeline.alpha = parse_double(value, "alpha"); break;
            case AblationAxis::NeuronSelection: c.selection = parse_selection(value); break;
        }
        validate(c.pipeline, manifest.dim);
        configs.push_back(c);
    }

    const auto support = load_support(manifest);
    std::vector<AblationRow> rows;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const ScoredRun run = run_pipeline(manifest, support, configs[i]);
        rows.push_back({grid[i], configs[i], evaluate(run.results, manifest, options)});
    }

    std::ostringstream csv;
    csv.precision(17);
    csv << "axis,value,shots,k,alpha,selection,seed,image_auroc,image_ap,image_f1_max,pixel_auroc,pixel_ap,"
           "pixel_f1_max,pixel_pro\n";
    for (const auto& row : rows) {
        const auto& c = row.config;
        csv << to_string(axis) << ',' << row.value << ',' << (c.shots ? *c.shots : manifest.support.size()) << ','
            << c.pipeline.k << ',' << c.pipeline.alpha << ',' << to_string(c.selection) << ',' << c.seed << ','
            << row.report.image.auroc << ',' << row.report.image.ap << ',' << row.report.image.f1_max;
        if (row.report.pixel) {
            const auto& p = *row.report.pixel;
            csv << ',' << p.auroc << ',' << p.ap << ',' << p.f1_max << ',' << p.pro;
        } else {
            csv << ",,,,";
        }
        csv << '\n';
    }
    fs::create_directories(out);
    write_text(out / "ablation.csv", csv.str());
    return rows;
}

fs::path cmd_synth(const SyntheticConfig& config, const fs::path& out) {
    return write_synthetic(generate_synthetic(config), out);
}

}  // namespace lake
