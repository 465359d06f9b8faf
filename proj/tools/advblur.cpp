// Copyright 2026 The AdvBlur Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Pipeline driver. Exit codes: 0 success, 1 invalid configuration (the message
// names the key), 2 runtime failure.

#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "advblur/advblur.hpp"

namespace fs = std::filesystem;
using namespace advblur;

namespace {

struct CommonOptions {
    std::string config;
    std::vector<std::string> overrides;
    std::string out;
    bool dry_run = false;
    bool allow_hash_mismatch = false;
    std::string input;
};

/// Exclusive lock on an output root; refuses a second concurrent run.
class OutputLock {
public:
    explicit OutputLock(const fs::path& root) : path_(root / ".advblur.lock") {
        fs::create_directories(root);
        FILE* f = std::fopen(path_.c_str(), "wx");
        if (f == nullptr) {
            throw Error("output root " + root.string() + " is locked by another run (remove " + path_.string() +
                        " if no run is active)");
        }
        std::fprintf(f, "%ld\n", static_cast<long>(::getpid()));
        std::fclose(f);
    }
    ~OutputLock() {
        std::error_code ec;
        fs::remove(path_, ec);
    }
    OutputLock(const OutputLock&) = delete;
    OutputLock& operator=(const OutputLock&) = delete;

private:
    fs::path path_;
};

struct Plan {
    std::vector<std::string> steps;
    void add(std::string s) { steps.push_back(std::move(s)); }
    void input(const fs::path& p) { add("read  " + p.string() + (fs::exists(p) ? "" : "  (missing)")); }
    void output(const fs::path& p) { add("write " + p.string()); }
};

/// Everything a command needs; `run` is only called outside dry-run mode.
struct Command {
    std::string name;
    std::string help;
    std::function<void(const RunConfig&, Plan&)> plan;
    std::function<json(const RunConfig&, const CommonOptions&)> run;
};

void write_json(const fs::path& path, const json& j) {
    fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw Error("cannot write " + path.string());
        out << j.dump(2) << "\n";
    }
    fs::rename(tmp, path);
}

std::string method_tag(const TrainConfig& c) {
    if (!c.blur) return "Baseline (CE)";
    if (c.loss_variant == LossVariant::cce6) return "CCE (6-class)";
    return "AdvBlur";
}

DatasetManifest load_originals(const RunConfig& cfg) {
    const fs::path p = cfg.manifest_path();
    if (!fs::exists(p)) throw ConfigError("data.manifest", "manifest not found: " + p.string() + " (run synth or prepare)");
    DatasetManifest m = load_manifest(p, cfg.label_map());
    if (m.count_label(kBlurLabel) > 0) throw ConfigError("data.manifest", "originals manifest contains label-5 records");
    return m;
}

/// The manifest training reads: forged twins when blur is enabled.
DatasetManifest load_training_manifest(const RunConfig& cfg) {
    if (!cfg.train.blur) return load_originals(cfg);
    const fs::path p = cfg.forged_manifest_path();
    if (!fs::exists(p)) {
        throw ConfigError("data.forged_manifest", "forged manifest not found: " + p.string() + " (run forge-blur)");
    }
    return load_manifest(p, cfg.label_map());
}

Splits make_splits(const RunConfig& cfg, const DatasetManifest& m) {
    try {
        return build_splits(m, cfg.split);
    } catch (const InvalidArgument& e) {
        throw ConfigError("split", e.what());
    }
}

void progress(const std::string& what, const EpochRecord& e) {
    std::fprintf(stderr, "[%s] epoch %d loss %.5f oi %.5f bi %.5f val %.2f%% (%.1fs)\n", what.c_str(), e.epoch,
                 e.train_loss, e.oi_mean, e.bi_mean, e.val_accuracy, e.wall_seconds);
}

std::vector<std::uint64_t> trained_seeds(const RunConfig& cfg) {
    std::vector<std::uint64_t> out;
    for (auto s : cfg.train.seeds)
        if (fs::exists(cfg.checkpoint_path(s))) out.push_back(s);
    if (out.empty()) throw Error("no checkpoint under " + (cfg.output_root / "train").string() + " (run train)");
    return out;
}

ModelBundle load_model(const RunConfig& cfg, const CommonOptions& o, std::uint64_t seed) {
    CheckpointOptions co;
    co.expected_config_hash = config_hash(cfg.train);
    co.allow_hash_mismatch = o.allow_hash_mismatch;
    return load_checkpoint(cfg.checkpoint_path(seed), co);
}

const NamedSet& pick_test_set(const RunConfig& cfg, const Splits& s) {
    if (s.tests.empty()) throw ConfigError("split.tests", "no test set is configured");
    if (cfg.explain.test_set.empty()) return s.tests.front();
    const NamedSet* t = s.test(cfg.explain.test_set);
    if (t == nullptr) throw ConfigError("explain.test_set", "no test set named '" + cfg.explain.test_set + "'");
    return *t;
}

/// Twins whose source is a validation original; used for the uniformity diagnostic.
std::vector<ImageRecord> blurred_val_twins(const DatasetManifest& m, const Splits& s) {
    std::set<std::string> val;
    for (const auto& r : s.val) val.insert(r.image_path.string());
    std::vector<ImageRecord> out;
    for (const auto& r : m.records)
        if (r.is_blurred() && val.contains(r.source_record->string())) out.push_back(r);
    return out;
}

EvalReport render_checked(const EvalReport& report, Layout layout, const fs::path& out, const std::string& title,
                          json& summary) {
    try {
        const RenderedReport r = render_report(report, layout, out, title);
        std::cout << r.text;
        summary["outputs"].push_back(r.csv_path.string());
        summary["outputs"].push_back(r.text_path.string());
    } catch (const InvalidArgument& e) {
        throw ConfigError("report.layout", std::string(e.what()) + " (layout " + to_string(layout) + ")");
    }
    return report;
}

// ---------------------------------------------------------------------------

json run_prepare(const RunConfig& cfg, const CommonOptions&) {
    if (cfg.data.manifest.empty()) throw ConfigError("data.manifest", "prepare needs a source manifest");
    const DatasetManifest m = load_manifest(cfg.data.manifest, cfg.label_map());
    json counts = json::object();
    std::size_t missing = 0;
    for (const auto& r : m.records) {
        auto& c = counts[r.dataset.name];
        const std::string label = std::to_string(r.label);
        c[label] = c.value(label, 0) + 1;
        if (r.camera) c["camera_" + to_string(*r.camera)] = c.value("camera_" + to_string(*r.camera), 0) + 1;
        if (!fs::exists(r.image_path)) ++missing;
    }
    if (missing > 0) throw Error(std::to_string(missing) + " manifest images do not exist");
    return {{"records", m.records.size()}, {"counts", counts}};
}

json run_synth(const RunConfig& cfg, const CommonOptions&) {
    const fs::path images = cfg.output_root / "data" / "synthetic";
    DatasetManifest m = make_synthetic_dataset(cfg.synth.n, cfg.synth.domains, cfg.synth.seed, images, cfg.synth.spec,
                                               cfg.threads);
    save_manifest(m, cfg.manifest_path());
    return {{"records", m.records.size()}, {"outputs", {cfg.manifest_path().string(), images.string()}}};
}

json run_forge(const RunConfig& cfg, const CommonOptions&) {
    if (!cfg.train.blur) throw ConfigError("blur", "forge-blur needs a blur spec (blur is null)");
    const DatasetManifest originals = load_originals(cfg);
    const DatasetManifest forged =
        forge_train_selection(originals, *cfg.train.blur, cfg.blurred_dir(), cfg.split.seed, cfg.threads,
                              [&](const ImageRecord& r) { return cfg.split.train.matches(r); });
    save_manifest(forged, cfg.forged_manifest_path());
    return {{"records", forged.records.size()},
            {"blurred", forged.count_label(kBlurLabel)},
            {"outputs", {cfg.forged_manifest_path().string(), cfg.blurred_dir().string()}}};
}

json run_train(const RunConfig& cfg, const CommonOptions&) {
    const DatasetManifest m = load_training_manifest(cfg);
    const Splits splits = make_splits(cfg, m);
    const ImageSet train_set("train", splits.train, cfg.train.image_size, cfg.threads);
    const ImageSet val_set("val", splits.val, cfg.train.image_size, cfg.threads);
    json runs = json::array();
    for (auto seed : cfg.train.seeds) {
        const fs::path dir = cfg.train_dir(seed);
        json resolved = to_json(cfg);
        resolved["run_seed"] = seed;
        write_json(dir / "resolved_config.json", resolved);
        TrainOptions opts;
        opts.threads = cfg.threads;
        opts.history_path = dir / "history.jsonl";
        opts.on_epoch = [&](const EpochRecord& e) { progress("seed " + std::to_string(seed), e); };
        TrainResult r = train(cfg.train, train_set, val_set, seed, opts);
        save_checkpoint(r.model, cfg.checkpoint_path(seed));
        json run{{"seed", seed},
                 {"best_epoch", r.history.best_epoch},
                 {"best_val_accuracy", r.history.best_val_accuracy},
                 {"epochs", json::array()},
                 {"checkpoint", cfg.checkpoint_path(seed).string()}};
        for (const auto& e : r.history.epochs) run["epochs"].push_back(to_json(e));
        write_json(dir / "summary.json", run);
        runs.push_back(run);
    }
    return {{"train_records", splits.train.size()}, {"val_records", splits.val.size()}, {"runs", runs}};
}

json run_eval(const RunConfig& cfg, const CommonOptions& o) {
    const DatasetManifest m = load_training_manifest(cfg);
    const Splits splits = make_splits(cfg, m);
    if (splits.tests.empty()) throw ConfigError("split.tests", "no test set is configured");
    std::vector<ImageSet> sets;
    for (const auto& t : splits.tests) sets.emplace_back(t.name, t.records, cfg.train.image_size, cfg.threads);
    const auto twins = blurred_val_twins(m, splits);
    std::optional<ImageSet> blurred;
    if (!twins.empty()) blurred.emplace("blurred_val", twins, cfg.train.image_size, cfg.threads);

    json summary{{"outputs", json::array()}, {"per_seed", json::array()}};
    std::vector<EvalReport> reports;
    for (auto seed : trained_seeds(cfg)) {
        ModelBundle model = load_model(cfg, o, seed);
        EvalReport r;
        r.provenance = {model.metadata().config_hash, {seed}};
        json s{{"seed", seed}};
        for (const auto& set : sets) {
            const DomainAccuracy a = evaluate(model, set);
            r.rows.push_back({method_tag(cfg.train), a.domain, a.accuracy, std::nullopt, a.n});
            s["accuracy"][a.domain] = a.accuracy;
        }
        if (blurred) {
            const UniformityDiagnostic u = uniformity_diagnostic(model, *blurred);
            s["uniformity"] = {{"mean_max_softmax", u.mean_max_softmax}, {"mean_bi_loss", u.mean_bi_loss}, {"n", u.n}};
        }
        summary["per_seed"].push_back(s);
        reports.push_back(std::move(r));
    }
    const EvalReport report = reports.size() > 1 ? aggregate_seeds(reports) : reports.front();
    render_checked(report, cfg.layout, cfg.output_root / "eval" / "report", "Accuracy (%) per test domain", summary);
    summary["average"] = report.average();
    return summary;
}

json run_gradcam(const RunConfig& cfg, const CommonOptions& o) {
    const DatasetManifest m = load_training_manifest(cfg);
    const Splits splits = make_splits(cfg, m);
    const NamedSet& test = pick_test_set(cfg, splits);
    const auto seed = trained_seeds(cfg).front();
    ModelBundle model = load_model(cfg, o, seed);
    const fs::path dir = cfg.output_root / "gradcam";
    json items = json::array();
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(cfg.explain.gradcam_images), test.records.size());
    for (std::size_t i = 0; i < k; ++i) {
        const ImageRecord& r = test.records[i];
        const Image img = load_image(r, cfg.train.image_size);
        const Heatmap h = gradcam(model, img);
        Image map(h.height, h.width, 3);
        for (int y = 0; y < h.height; ++y)
            for (int x = 0; x < h.width; ++x)
                for (int c = 0; c < 3; ++c) map.at(y, x, c) = h.at(y, x);
        const std::string stem = r.image_path.stem().string();
        write_png(map, dir / (stem + "_heatmap.png"));
        write_png(heatmap_overlay(img, h), dir / (stem + "_overlay.png"));
        write_png(mask_high_activation(img, h, cfg.explain.threshold), dir / (stem + "_masked.png"));
        items.push_back({{"image", r.image_path.string()}, {"label", r.label}, {"target_class", h.target_class},
                         {"masked_fraction", static_cast<double>(count_above(h, cfg.explain.threshold)) /
                                                 static_cast<double>(h.values.size())}});
    }
    return {{"seed", seed}, {"test_set", test.name}, {"layer", model.network().cam_layer()}, {"images", items},
            {"outputs", {dir.string()}}};
}

json run_mask_eval(const RunConfig& cfg, const CommonOptions& o) {
    const DatasetManifest m = load_training_manifest(cfg);
    const Splits splits = make_splits(cfg, m);
    if (splits.tests.empty()) throw ConfigError("split.tests", "no test set is configured");
    std::vector<ImageSet> sets;
    for (const auto& t : splits.tests) sets.emplace_back(t.name, t.records, cfg.train.image_size, cfg.threads);
    json summary{{"outputs", json::array()}, {"per_seed", json::array()}, {"threshold", cfg.explain.threshold}};
    std::vector<EvalReport> reports;
    for (auto seed : trained_seeds(cfg)) {
        ModelBundle model = load_model(cfg, o, seed);
        EvalReport r;
        r.provenance = {model.metadata().config_hash, {seed}};
        json s{{"seed", seed}};
        for (const auto& set : sets) {
            const MaskingResult mr = masking_experiment(model, set, cfg.explain.threshold, seed);
            r.rows.push_back({std::string(kNormalAccuracy), set.name(), mr.normal_accuracy, std::nullopt, mr.n});
            r.rows.push_back({std::string(kWithMasking), set.name(), mr.masked_accuracy, std::nullopt, mr.n});
            s[set.name()] = {{"normal", mr.normal_accuracy},
                             {"masked", mr.masked_accuracy},
                             {"random_control", mr.random_accuracy},
                             {"masked_fraction", mr.masked_fraction}};
        }
        summary["per_seed"].push_back(s);
        reports.push_back(std::move(r));
    }
    const EvalReport report = reports.size() > 1 ? aggregate_seeds(reports) : reports.front();
    render_checked(report, Layout::masking_table, cfg.output_root / "mask-eval" / "report",
                   "Accuracy (%) with and without Grad-CAM masking", summary);
    return summary;
}

json run_tsne(const RunConfig& cfg, const CommonOptions& o) {
    const DatasetManifest m = load_training_manifest(cfg);
    const Splits splits = make_splits(cfg, m);
    const NamedSet& test = pick_test_set(cfg, splits);
    std::vector<ImageRecord> records = test.records;
    const auto limit = static_cast<std::size_t>(cfg.explain.tsne_max_points);
    if (records.size() > limit) {
        Rng rng(derive_seed(cfg.explain.tsne.seed, 0x5b5));
        auto idx = sample_indices(records.size(), limit, rng);
        std::vector<ImageRecord> sub;
        for (auto i : idx) sub.push_back(records[i]);
        records = std::move(sub);
    }
    const auto seed = trained_seeds(cfg).front();
    ModelBundle model = load_model(cfg, o, seed);
    const ImageSet set(test.name, records, cfg.train.image_size, cfg.threads);
    if (!(cfg.explain.tsne.perplexity * 3.0 < static_cast<double>(set.size()))) {
        throw ConfigError("explain.tsne.perplexity", "must be below a third of the " + std::to_string(set.size()) +
                                                         " embedded points");
    }
    const EmbeddingPlot e = tsne_embed(model, set, cfg.explain.tsne);
    const fs::path dir = cfg.output_root / "tsne";
    write_embedding_csv(e, dir / "embedding.csv");
    write_embedding_png(e, dir / "embedding.png");
    std::vector<int> groups;
    for (int y : e.labels) groups.push_back(y == 0 ? 0 : 1);
    return {{"seed", seed},
            {"test_set", test.name},
            {"points", e.points.size()},
            {"kl_divergence", e.kl_divergence},
            {"silhouette_grade0_vs_rest", silhouette(e.points, groups)},
            {"outputs", {(dir / "embedding.csv").string(), (dir / "embedding.png").string()}}};
}

json run_ablate(const RunConfig& cfg, const CommonOptions&) {
    AblationSpec spec;
    spec.axis = cfg.ablation.axis;
    spec.variants = cfg.ablation.variants;
    spec.base_config = cfg.train;
    spec.protocols = {{"main", cfg.split}};
    spec.seeds = cfg.ablation.seeds;
    AblationOptions opts;
    opts.threads = cfg.threads;
    opts.on_epoch = [](const std::string& v, std::uint64_t s, const EpochRecord& e) {
        progress(v + " seed " + std::to_string(s), e);
    };
    const AblationResult r = run_ablation(spec, load_originals(cfg), cfg.output_root, opts);
    std::cout << r.table.text;
    json variants = json::object();
    for (const auto& [v, rep] : r.per_variant) variants[v] = rep.average();
    return {{"axis", to_string(spec.axis)},
            {"average_by_variant", variants},
            {"masked_config_hash", r.masked_hashes.begin()->second},
            {"outputs", {r.table.csv_path.string(), r.table.text_path.string()}}};
}

json run_report(const RunConfig& cfg, const CommonOptions& o) {
    const fs::path in = o.input.empty() ? cfg.output_root / "eval" / "report.csv" : fs::path(o.input);
    std::ifstream f(in);
    if (!f) throw Error("cannot read report CSV " + in.string());
    EvalReport report;
    report.rows = parse_report_csv(f);
    json summary{{"outputs", json::array()}, {"input", in.string()}};
    render_checked(report, cfg.layout, cfg.output_root / "report" / to_string(cfg.layout), {}, summary);
    return summary;
}

std::vector<Command> commands() {
    return {
        {"prepare",
         "validate an external manifest and count its records",
         [](const RunConfig& c, Plan& p) {
             p.input(c.data.manifest.empty() ? fs::path("<data.manifest unset>") : fs::path(c.data.manifest));
             p.add("validate records, labels and image paths");
         },
         run_prepare},
        {"synth",
         "render the synthetic fundus benchmark and its manifest",
         [](const RunConfig& c, Plan& p) {
             p.add("render " + std::to_string(c.synth.n) + " images for each of " + std::to_string(c.synth.domains.size()) +
                   " domains at " + std::to_string(c.synth.spec.native_size) + " px");
             p.output(c.output_root / "data" / "synthetic");
             p.output(c.manifest_path());
         },
         run_synth},
        {"forge-blur",
         "write blurred twins (label 5) of the training originals",
         [](const RunConfig& c, Plan& p) {
             p.input(c.manifest_path());
             if (c.train.blur) {
                 p.add("blur training originals: " + to_json(*c.train.blur).dump());
             } else {
                 p.add("blur is null: nothing to forge (this is an error at run time)");
             }
             p.output(c.blurred_dir());
             p.output(c.forged_manifest_path());
         },
         run_forge},
        {"train",
         "train one model per seed and keep the best-validation epoch",
         [](const RunConfig& c, Plan& p) {
             p.input(c.train.blur ? c.forged_manifest_path() : c.manifest_path());
             p.add("train " + to_string(c.train.backbone) + " for " + std::to_string(c.train.epochs) + " epochs, loss " +
                   (c.train.blur ? to_string(c.train.loss_variant) : std::string("ce (no twins)")));
             for (auto s : c.train.seeds) p.output(c.checkpoint_path(s));
         },
         run_train},
        {"eval",
         "accuracy per test set, aggregated over seeds",
         [](const RunConfig& c, Plan& p) {
             for (auto s : c.train.seeds) p.input(c.checkpoint_path(s));
             p.add("evaluate every test set; render " + to_string(c.layout));
             p.output(c.output_root / "eval" / "report.csv");
         },
         run_eval},
        {"gradcam",
         "Grad-CAM heatmaps, overlays and masked images",
         [](const RunConfig& c, Plan& p) {
             p.input(c.checkpoint_path(c.train.seeds.front()));
             p.output(c.output_root / "gradcam");
         },
         run_gradcam},
        {"mask-eval",
         "accuracy before and after masking high-activation regions",
         [](const RunConfig& c, Plan& p) {
             for (auto s : c.train.seeds) p.input(c.checkpoint_path(s));
             p.add("mask Grad-CAM regions above " + format_fixed(c.explain.threshold, 2));
             p.output(c.output_root / "mask-eval" / "report.csv");
         },
         run_mask_eval},
        {"tsne",
         "t-SNE of penultimate features on a test set",
         [](const RunConfig& c, Plan& p) {
             p.input(c.checkpoint_path(c.train.seeds.front()));
             p.output(c.output_root / "tsne" / "embedding.png");
         },
         run_tsne},
        {"ablate",
         "train and evaluate every variant of one ablation axis",
         [](const RunConfig& c, Plan& p) {
             p.input(c.manifest_path());
             for (const auto& v : c.ablation.variants)
                 for (auto s : c.ablation.seeds) p.output(ablation_run_dir(c.output_root, c.ablation.axis, v, s));
         },
         run_ablate},
        {"report",
         "re-render a report CSV in the configured layout",
         [](const RunConfig& c, Plan& p) {
             p.add("render " + to_string(c.layout));
             p.output(c.output_root / "report");
         },
         run_report},
    };
}

int execute(const Command& cmd, const CommonOptions& o) {
    ConfigSources src;
    if (!o.config.empty()) src.config_file = o.config;
    src.overrides = o.overrides;
    if (const char* env = std::getenv("ADVBLUR_OUT")) src.env_output_root = env;
    if (!o.out.empty()) src.cli_output_root = o.out;
    const RunConfig cfg = resolve_run_config(src);

    Plan plan;
    cmd.plan(cfg, plan);
    const fs::path run_dir = cfg.output_root / cmd.name;
    if (o.dry_run) {
        std::cout << "dry run: " << cmd.name << " (config " << config_hash(cfg.train).substr(0, 12) << ")\n";
        std::cout << "  output root " << cfg.output_root.string() << "\n";
        for (const auto& s : plan.steps) std::cout << "  " << s << "\n";
        std::cout << "  write " << (run_dir / "resolved_config.json").string() << "\n";
        std::cout << "  write " << (run_dir / "summary.json").string() << "\n";
        return 0;
    }

    OutputLock lock(cfg.output_root);
    write_json(run_dir / "resolved_config.json", to_json(cfg));
    const auto t0 = std::chrono::steady_clock::now();
    json summary = cmd.run(cfg, o);
    summary["command"] = cmd.name;
    summary["status"] = "ok";
    summary["config_hash"] = config_hash(cfg.train);
    summary["git_revision"] = std::string(kGitRevision);
    summary["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_json(run_dir / "summary.json", summary);
    std::cerr << cmd.name << ": done, summary in " << (run_dir / "summary.json").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Training, evaluation and analysis pipeline for blur-regularized fundus grading"};
    app.require_subcommand(1);
    CommonOptions opts;
    const auto cmds = commands();
    std::map<CLI::App*, const Command*> by_app;
    for (const auto& c : cmds) {
        CLI::App* sub = app.add_subcommand(c.name, c.help);
        sub->add_option("-c,--config", opts.config, "JSON config file");
        sub->add_option("-s,--set", opts.overrides, "override, e.g. --set train.epochs=3")->take_all();
        sub->add_option("-o,--out", opts.out, "output root (overrides ADVBLUR_OUT and the config)");
        sub->add_flag("-n,--dry-run", opts.dry_run, "validate and print the plan without writing anything");
        if (c.name == "eval" || c.name == "gradcam" || c.name == "mask-eval" || c.name == "tsne") {
            sub->add_flag("--allow-hash-mismatch", opts.allow_hash_mismatch,
                          "load checkpoints trained under a different config (prints a warning)");
        }
        if (c.name == "report") sub->add_option("--in", opts.input, "report CSV to render (default <out>/eval/report.csv)");
        by_app[sub] = &c;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }
    const Command* cmd = by_app.at(app.get_subcommands().front());
    try {
        return execute(*cmd, opts);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
