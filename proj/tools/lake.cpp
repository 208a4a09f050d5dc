// lake: training-free anomaly detection over precomputed patch embeddings.
//
//   lake profile  --manifest M --out DIR [--k 100] [--shots S --seed N]
//   lake score    --manifest M --out DIR [--k 100 --alpha 0.3 --temperature 1 --raw-dot --workers W --timings]
//   lake evaluate --manifest M --results DIR --out DIR [--fpr-limit 0.3]
//   lake ablate   --manifest M --out DIR --axis shots|k|alpha|neuron-selection --grid v1,v2,...
//   lake synth    --out DIR [--seed N]
//
// Exit codes: 0 success, 1 validation error, 2 runtime failure.

#include "lake/commands.hpp"
#include "lake/error.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

struct Flags {
    std::string manifest;
    std::string out;
    std::string results;
    lake::Index k = 100;
    double alpha = 0.3;
    double temperature = 1.0;
    bool raw_dot = false;
    int workers = 1;
    std::uint64_t seed = 0;
    std::size_t shots = 0;  // 0 = all support images
    std::string selection = "topk";
    double fpr_limit = 0.3;
    int connectivity = 8;
    std::string pixel_metrics = "auto";
    bool export_gallery = false;
    bool timings = false;
    std::string axis;
    std::vector<std::string> grid;
};

void add_run_flags(CLI::App* cmd, Flags& f) {
    cmd->add_option("--manifest", f.manifest, "Dataset manifest JSON")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", f.out, "Output directory")->required();
    cmd->add_option("--k", f.k, "Sensitive subspace size")->capture_default_str();
    cmd->add_option("--alpha", f.alpha, "Fusion weight of the semantic score")->capture_default_str();
    cmd->add_option("--temperature", f.temperature, "Softmax temperature of the text probe")->capture_default_str();
    cmd->add_flag("--raw-dot", f.raw_dot, "Use raw dot products instead of cosine similarities in the text probe");
    cmd->add_option("--workers", f.workers, "Images scored concurrently")->capture_default_str();
    cmd->add_option("--seed", f.seed, "Seed for support subsampling and random selection")->capture_default_str();
    cmd->add_option("--shots", f.shots, "Use a seeded subsample of this many support images");
    cmd->add_option("--selection", f.selection, "Channel selection: topk or random")->capture_default_str();
}

void add_eval_flags(CLI::App* cmd, Flags& f) {
    cmd->add_option("--fpr-limit", f.fpr_limit, "Upper FPR bound of the PRO integral")->capture_default_str();
    cmd->add_option("--connectivity", f.connectivity, "Region connectivity for PRO (4 or 8)")->capture_default_str();
    cmd->add_option("--pixel-metrics", f.pixel_metrics, "auto, required or off")->capture_default_str();
}

lake::RunConfig run_config(const Flags& f) {
    lake::RunConfig c;
    c.pipeline.k = f.k;
    c.pipeline.alpha = f.alpha;
    c.pipeline.temperature = f.temperature;
    c.pipeline.normalize = !f.raw_dot;
    c.workers = f.workers;
    c.seed = f.seed;
    if (f.shots > 0) c.shots = f.shots;
    c.selection = lake::parse_selection(f.selection);
    return c;
}

lake::EvaluateOptions eval_options(const Flags& f) {
    lake::EvaluateOptions o;
    o.fpr_limit = f.fpr_limit;
    if (f.connectivity == 4) {
        o.connectivity = lake::Connectivity::Four;
    } else if (f.connectivity == 8) {
        o.connectivity = lake::Connectivity::Eight;
    } else {
        throw lake::ParameterError("--connectivity must be 4 or 8");
    }
    if (f.pixel_metrics == "auto") {
        o.pixel = lake::PixelMode::Auto;
    } else if (f.pixel_metrics == "required") {
        o.pixel = lake::PixelMode::Required;
    } else if (f.pixel_metrics == "off") {
        o.pixel = lake::PixelMode::Off;
    } else {
        throw lake::ParameterError("--pixel-metrics must be auto, required or off");
    }
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Training-free anomaly detection over precomputed patch embeddings"};
    app.require_subcommand(1);
    Flags f;

    auto* profile = app.add_subcommand("profile", "Channel variance profile and sensitive subspace");
    add_run_flags(profile, f);

    auto* score = app.add_subcommand("score", "Score every test image of a manifest");
    add_run_flags(score, f);
    score->add_flag("--export-gallery", f.export_gallery, "Also write the gallery as an NPY pair");
    score->add_flag("--timings", f.timings, "Also write per-stage wall-clock timings to timings.json");

    auto* evaluate = app.add_subcommand("evaluate", "Image and pixel metrics for a scored run");
    evaluate->add_option("--manifest", f.manifest, "Dataset manifest JSON")->required()->check(CLI::ExistingFile);
    evaluate->add_option("--results", f.results, "Directory written by `lake score`")->required()->check(CLI::ExistingDirectory);
    evaluate->add_option("--out", f.out, "Output directory (defaults to --results)");
    add_eval_flags(evaluate, f);

    auto* ablate = app.add_subcommand("ablate", "Rerun the pipeline over a grid of one parameter");
    add_run_flags(ablate, f);
    add_eval_flags(ablate, f);
    ablate->add_option("--axis", f.axis, "shots, k, alpha or neuron-selection")->required();
    ablate->add_option("--grid", f.grid, "Comma-separated grid values")->required()->delimiter(',');

    lake::SyntheticConfig synth_cfg;
    auto* synth = app.add_subcommand("synth", "Write the seeded planted-defect benchmark");
    synth->add_option("--out", f.out, "Output directory")->required();
    synth->add_option("--seed", synth_cfg.seed, "Generator seed")->capture_default_str();
    synth->add_option("--dim", synth_cfg.dim, "Channel count")->capture_default_str();
    synth->add_option("--signal-channels", synth_cfg.signal_channels, "Defect-carrying channels")->capture_default_str();
    synth->add_option("--support", synth_cfg.support_images, "Support images")->capture_default_str();
    synth->add_option("--normal-tests", synth_cfg.normal_tests, "Normal test images")->capture_default_str();
    synth->add_option("--anomalous-tests", synth_cfg.anomalous_tests, "Defective test images")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*profile) {
            lake::cmd_profile(f.manifest, run_config(f), f.out);
        } else if (*score) {
            lake::cmd_score(f.manifest, run_config(f), f.out, {f.export_gallery, f.timings});
        } else if (*evaluate) {
            const auto report = lake::cmd_evaluate(f.results, f.manifest, eval_options(f), f.out.empty() ? f.results : f.out);
            std::cout << lake::to_csv(report);
        } else if (*ablate) {
            lake::cmd_ablate(f.manifest, lake::parse_axis(f.axis), f.grid, run_config(f), eval_options(f), f.out);
        } else if (*synth) {
            std::cout << lake::cmd_synth(synth_cfg, f.out).string() << '\n';
        }
    } catch (const lake::ValidationError& e) {
        std::cerr << "lake: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "lake: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
