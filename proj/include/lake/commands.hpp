#pragma once

// The operations behind the `lake` command-line tool. Each writes fixed
// filenames under its output directory and echoes its configuration into
// every output it produces.

#include "lake/manifest.hpp"
#include "lake/report.hpp"
#include "lake/scoring.hpp"
#include "lake/synthetic.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace lake {

enum class NeuronSelection { TopK, Random };

std::string to_string(NeuronSelection selection);
NeuronSelection parse_selection(const std::string& text);

struct RunConfig {
    PipelineConfig pipeline;
    std::optional<std::size_t> shots;  // support subsample size
    NeuronSelection selection = NeuronSelection::TopK;
    std::uint64_t seed = 0;
    int workers = 1;
};

/// Positions into the manifest's support list used for a run: all of them,
/// or the first `shots` entries of a seeded permutation (returned ascending).
std::vector<std::size_t> select_support(std::size_t available, std::optional<std::size_t> shots, std::uint64_t seed);

/// Deterministic part of a run's configuration (no worker count).
nlohmann::ordered_json config_echo(const RunConfig& config, const DatasetManifest& manifest);

struct ScoredRun {
    std::vector<AnomalyResult> results;  // manifest test order
    Pipeline pipeline;
    double gallery_ms = 0.0;
    double scoring_ms = 0.0;
};

/// Builds subspace and gallery from the selected support images, then scores
/// every test entry with `config.workers` threads. Output order never depends on
/// the worker count.
ScoredRun run_pipeline(const DatasetManifest& manifest, std::span<const FeatureTensor> all_support,
                       const RunConfig& config);

/// Scores `tests` against a shared pipeline using `workers` threads.
std::vector<AnomalyResult> score_all(const std::vector<TestEntry>& tests, const Pipeline& pipeline, int workers);

// --- commands -------------------------------------------------------------

/// profile.json, sigma2.npy (float64), indices.npy (int64).
void cmd_profile(const std::filesystem::path& manifest_path, const RunConfig& config, const std::filesystem::path& out);

struct ScoreOutputs {
    bool export_gallery = false;
    bool write_timings = false;  // wall-clock timings vary run to run, so they are opt-in
};

/// results.json and maps/<id>.npy; optionally timings.json and gallery/.
void cmd_score(const std::filesystem::path& manifest_path, const RunConfig& config, const std::filesystem::path& out,
               const ScoreOutputs& outputs = {});

/// Reads results.json and maps/ from `results_dir`; writes report.json and report.csv to `out`.
EvaluationReport cmd_evaluate(const std::filesystem::path& results_dir, const std::filesystem::path& manifest_path,
                              const EvaluateOptions& options, const std::filesystem::path& out);

enum class AblationAxis { Shots, K, Alpha, NeuronSelection };

AblationAxis parse_axis(const std::string& text);
std::string to_string(AblationAxis axis);

struct AblationRow {
    std::string value;
    RunConfig config;
    CategoryReport report;
};

/// One pipeline run per grid value; writes ablation.csv to `out`.
std::vector<AblationRow> cmd_ablate(const std::filesystem::path& manifest_path, AblationAxis axis,
                                    const std::vector<std::string>& grid, const RunConfig& base,
                                    const EvaluateOptions& options, const std::filesystem::path& out);

/// Generates the planted-defect benchmark under `out`; returns the manifest path.
std::filesystem::path cmd_synth(const SyntheticConfig& config, const std::filesystem::path& out);

/// Reads results.json + maps/ back into AnomalyResults (scores, labels, pixel maps).
std::vector<AnomalyResult> load_results(const std::filesystem::path& results_dir, const DatasetManifest& manifest);

}  // namespace lake
