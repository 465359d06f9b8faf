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

// Acceptance gate. Prints one "[PASS]" or "[FAIL]" line per criterion.
//
//   acceptance [--only N[,N...]] [--known-failures N[,N...]] [--work DIR]
//
// Exit status is 0 when every failing criterion is listed in --known-failures.
// The synthetic benchmark data and trained models are cached under the work
// directory and reused when their parameters match.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "advblur/advblur.hpp"

#ifndef ADVBLUR_ACCEPTANCE_WORK_DIR
#define ADVBLUR_ACCEPTANCE_WORK_DIR "acceptance_work"
#endif
#ifndef ADVBLUR_SOURCE_DIR
#define ADVBLUR_SOURCE_DIR "."
#endif

namespace {

namespace fs = std::filesystem;
using namespace advblur;
using json = nlohmann::json;

// Tolerances and bounds.
constexpr double kTolEqualLogits = 1e-12;
constexpr double kTolHandBI = 1e-9;
constexpr double kTolHandOI = 1e-6;
constexpr double kMaxRelGradError = 1e-4;
constexpr double kFiniteDiffEps = 1e-5;
constexpr int kGradVectors = 100;
constexpr int kMedianImages = 50;
constexpr int kForgeN = 200;
constexpr int kBenchmarkN = 2000;
constexpr double kMinInDomainAccuracy = 85.0;
constexpr double kMaxMeanMaxSoftmax = 0.35;
constexpr double kTolRerun = 1e-6;
constexpr int kShiftSeeds = 3;
constexpr double kTolStd = 1e-3;
constexpr double kTolMean = 1e-9;

// Runtime budgets in seconds.
constexpr double kBudget1 = 1, kBudget2 = 10, kBudget3 = 30, kBudget4 = 120, kBudget5 = 600, kBudget6 = 1800,
                 kBudget7 = 300, kBudget8 = 1;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::string fmt(const char* f, double a, double b) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

std::string fmt(const char* f, double a, double b, double c) {
    char buf[160];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

// ---------------------------------------------------------------------------
// Shared synthetic benchmark.

class Benchmark {
public:
    explicit Benchmark(fs::path work) : work_(std::move(work)) {
        cfg_ = RunConfig::defaults();
        cfg_.synth.n = kBenchmarkN;
        cfg_.output_root = work_;
    }

    const RunConfig& config() const { return cfg_; }

    /// Originals of both domains plus median twins of the source domain.
    const DatasetManifest& manifest() {
        if (manifest_) return *manifest_;
        const json stamp{{"synth", {{"n", cfg_.synth.n}, {"seed", cfg_.synth.seed}, {"native", cfg_.synth.spec.native_size}}},
                         {"domains", json::array()},
                         {"blur", config_hash(cfg_.train)},
                         {"split_seed", cfg_.split.seed}};
        json stamped = stamp;
        for (const auto& d : cfg_.synth.domains) stamped["domains"].push_back(to_json(d));
        const fs::path stamp_path = work_ / "data" / "stamp.json";
        const bool cached = fs::exists(stamp_path) && fs::exists(cfg_.forged_manifest_path()) &&
                            json::parse(std::ifstream(stamp_path)) == stamped;
        if (!cached) {
            fs::remove_all(work_ / "data");
            fs::remove_all(work_ / "models");
            std::fprintf(stderr, "acceptance: rendering %d images per domain\n", cfg_.synth.n);
            const DatasetManifest originals = make_synthetic_dataset(cfg_.synth.n, cfg_.synth.domains, cfg_.synth.seed,
                                                                     work_ / "data" / "synthetic", cfg_.synth.spec);
            std::fprintf(stderr, "acceptance: forging blurred twins\n");
            const DatasetManifest forged =
                forge_train_selection(originals, *cfg_.train.blur, cfg_.blurred_dir(), cfg_.split.seed, 0,
                                      [&](const ImageRecord& r) { return cfg_.split.train.matches(r); });
            save_manifest(forged, cfg_.forged_manifest_path());
            std::ofstream(stamp_path) << stamped.dump(2) << "\n";
        }
        manifest_ = load_manifest(cfg_.forged_manifest_path(), cfg_.label_map());
        return *manifest_;
    }

    const Splits& splits() {
        if (!splits_) splits_ = build_splits(manifest(), cfg_.split);
        return *splits_;
    }

    const ImageSet& train_set(bool with_twins) {
        auto& slot = with_twins ? train_twins_ : train_plain_;
        if (!slot) {
            std::vector<ImageRecord> rows;
            for (const auto& r : splits().train)
                if (with_twins || !r.is_blurred()) rows.push_back(r);
            slot.emplace(with_twins ? "train" : "train_plain", rows, cfg_.train.image_size);
        }
        return *slot;
    }

    const ImageSet& val_set() {
        if (!val_) val_.emplace("val", splits().val, cfg_.train.image_size);
        return *val_;
    }

    const ImageSet& test_set(const std::string& name) {
        auto it = tests_.find(name);
        if (it == tests_.end()) {
            const NamedSet* t = splits().test(name);
            if (t == nullptr) throw Error("no test set " + name);
            it = tests_.emplace(name, ImageSet(name, t->records, cfg_.train.image_size)).first;
        }
        return it->second;
    }

    /// Twins of the held-out in-domain test originals; never seen in training.
    const ImageSet& heldout_twins() {
        if (!twins_) {
            std::set<std::string> held;
            for (const auto& r : splits().test("in_domain")->records) held.insert(r.image_path.string());
            std::vector<ImageRecord> rows;
            for (const auto& r : manifest().records)
                if (r.is_blurred() && held.contains(r.source_record->string())) rows.push_back(r);
            twins_.emplace("heldout_twins", rows, cfg_.train.image_size);
        }
        return *twins_;
    }

    TrainConfig train_config(bool advblur) const {
        TrainConfig c = cfg_.train;
        if (!advblur) c.blur.reset();
        return c;
    }

    TrainResult train_fresh(bool advblur, std::uint64_t seed) {
        const TrainConfig c = train_config(advblur);
        TrainOptions opts;
        const std::string tag = advblur ? "advblur" : "ce";
        opts.on_epoch = [&](const EpochRecord& e) {
            std::fprintf(stderr, "acceptance: [%s seed %llu] epoch %d loss %.5f val %.2f%%\n", tag.c_str(),
                         static_cast<unsigned long long>(seed), e.epoch, e.train_loss, e.val_accuracy);
        };
        TrainResult r = train(c, train_set(advblur), val_set(), seed, opts);
        save_checkpoint(r.model, model_path(advblur, seed));
        return r;
    }

    /// Cached model for (method, seed); trains when absent.
    ModelBundle model(bool advblur, std::uint64_t seed) {
        const fs::path p = model_path(advblur, seed);
        if (fs::exists(p)) {
            CheckpointOptions o;
            o.expected_config_hash = config_hash(train_config(advblur));
            return load_checkpoint(p, o);
        }
        return std::move(train_fresh(advblur, seed).model);
    }

private:
    fs::path model_path(bool advblur, std::uint64_t seed) {
        manifest();  // regenerating the data drops cached models
        const std::string key = config_hash(train_config(advblur)).substr(0, 12);
        return work_ / "models" / ((advblur ? "advblur_" : "ce_") + key + "_seed" + std::to_string(seed) + ".ckpt");
    }

    fs::path work_;
    RunConfig cfg_;
    std::optional<DatasetManifest> manifest_;
    std::optional<Splits> splits_;
    std::optional<ImageSet> train_twins_, train_plain_, val_, twins_;
    std::map<std::string, ImageSet> tests_;
};

// ---------------------------------------------------------------------------

Outcome ac1_loss_exactness() {
    const std::vector<double> equal(5, 0.37);
    const double bi_equal = blurred_image_loss<double>(equal);
    // softmax(ln 2, 0, 0, 0, 0) = (1/3, 1/6, 1/6, 1/6, 1/6)
    // (1/5) * ((1/3 - 1/5)^2 + 4 (1/6 - 1/5)^2) = 4/900
    const std::vector<double> hand{std::log(2.0), 0, 0, 0, 0};
    const double bi_hand = blurred_image_loss<double>(hand);
    // softmax (0.5, 0.5) on the label: -ln 0.5
    const std::vector<double> half{1.5, 1.5, -40, -40, -40};
    const double oi_half = original_image_loss<double>(half, 0);
    const bool ok = std::abs(bi_equal) <= kTolEqualLogits && std::abs(bi_hand - 4.0 / 900.0) <= kTolHandBI &&
                    std::abs(oi_half - 0.693147) <= kTolHandOI;
    return {ok, fmt("BI(equal)=%.3g BI(hand)=%.12f OI(half)=%.7f", bi_equal, bi_hand, oi_half)};
}

Outcome ac2_gradients() {
    Rng rng(2024);
    double worst_oi = 0, worst_bi = 0, worst_combined = 0;
    std::vector<double> all;
    std::vector<int> all_labels;
    for (int i = 0; i < kGradVectors; ++i) {
        std::vector<double> z(5);
        for (double& v : z) v = uniform(rng, -6.0, 6.0);
        const int grade = static_cast<int>(uniform_index(rng, 5));
        const int any = static_cast<int>(uniform_index(rng, 6));
        const std::vector<int> g{grade}, a{any};
        worst_oi = std::max(worst_oi, gradient_check(LossKind::OI, z, g, kFiniteDiffEps));
        worst_bi = std::max(worst_bi, gradient_check(LossKind::BI, z, g, kFiniteDiffEps));
        worst_combined = std::max(worst_combined, gradient_check(LossKind::combined, z, a, kFiniteDiffEps));
        all.insert(all.end(), z.begin(), z.end());
        all_labels.push_back(any);
    }
    worst_combined = std::max(worst_combined, gradient_check(LossKind::combined, all, all_labels, kFiniteDiffEps));
    const double worst = std::max({worst_oi, worst_bi, worst_combined});
    return {worst < kMaxRelGradError, fmt("max rel error OI %.2e BI %.2e combined %.2e", worst_oi, worst_bi, worst_combined)};
}

/// Brute force: sort every clamped window.
Image median_by_sorting(const Image& img, int k, Border border) {
    const int r = k / 2;
    auto index = [&](int i, int n) {
        if (border == Border::replicate) return std::clamp(i, 0, n - 1);
        // Edge pixel repeats: "cba|abc|cba".
        while (i < 0 || i >= n) i = i < 0 ? -1 - i : 2 * n - 1 - i;
        return i;
    };
    Image out(img.height, img.width, img.channels);
    std::vector<float> w;
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                w.clear();
                for (int dy = -r; dy <= r; ++dy)
                    for (int dx = -r; dx <= r; ++dx) w.push_back(img.at(index(y + dy, img.height), index(x + dx, img.width), c));
                std::nth_element(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(w.size() / 2), w.end());
                out.at(y, x, c) = w[w.size() / 2];
            }
    return out;
}

Outcome ac3_median_oracle() {
    Rng rng(33);
    int compared = 0, mismatched = 0;
    for (int i = 0; i < kMedianImages; ++i) {
        Image img(16, 16, 3);
        // Half the images are 8-bit quantized, half continuous.
        for (float& v : img.pixels) {
            v = static_cast<float>(uniform01(rng));
            if (i % 2 == 0) v = std::round(v * 255.0f) / 255.0f;
        }
        for (int k : {3, 5, 7})
            for (Border b : {Border::reflect, Border::replicate}) {
                BlurSpec spec;
                spec.method = BlurMethod::median;
                spec.kernel = k;
                spec.border = b;
                const Image got = apply_blur(img, spec);
                ++compared;
                if (got.pixels != median_by_sorting(img, k, b).pixels || got.pixels != median_filter_oracle(img, k, b).pixels) {
                    ++mismatched;
                }
            }
    }
    return {mismatched == 0, std::to_string(compared - mismatched) + "/" + std::to_string(compared) + " bit-exact"};
}

Outcome ac4_forge(const fs::path& work) {
    const fs::path dir = work / "ac4";
    fs::remove_all(dir);
    SyntheticSpec spec;
    const DatasetManifest originals = make_synthetic_dataset(kForgeN, {source_domain()}, 4, dir / "originals", spec);
    BlurSpec blur;  // median 151
    const DatasetManifest forged = forge_adversarial_set(originals, blur, dir / "blurred", 4);
    std::set<std::string> sources;
    for (const auto& r : forged.records)
        if (!r.is_blurred()) sources.insert(r.image_path.string());
    std::size_t twins = 0, resolved = 0;
    for (const auto& r : forged.records) {
        if (!r.is_blurred()) continue;
        ++twins;
        if (sources.contains(r.source_record->string()) && fs::exists(r.image_path)) ++resolved;
    }

    spec.native_size = 512;
    const Image big = render_fundus(3, source_domain(), spec, 11).image;
    const Image blurred = median_filter(big, 151, Border::reflect);
    bool in_range = true;
    for (int c = 0; c < 3; ++c) {
        float lo = 1e9f, hi = -1e9f;
        for (int y = 0; y < big.height; ++y)
            for (int x = 0; x < big.width; ++x) {
                lo = std::min(lo, big.at(y, x, c));
                hi = std::max(hi, big.at(y, x, c));
            }
        for (int y = 0; y < blurred.height; ++y)
            for (int x = 0; x < blurred.width; ++x) in_range &= blurred.at(y, x, c) >= lo && blurred.at(y, x, c) <= hi;
    }
    fs::remove_all(dir);
    const bool ok = forged.records.size() == 2 * kForgeN && twins == kForgeN && resolved == twins && in_range;
    return {ok, std::to_string(forged.records.size()) + " records, " + std::to_string(twins) + " label 5, " +
                    std::to_string(resolved) + " sources resolve, k151 on 512px " + (in_range ? "in range" : "OUT OF RANGE")};
}

Outcome ac5_end_to_end(Benchmark& bench) {
    TrainResult a = bench.train_fresh(true, 0);
    const double acc = evaluate(a.model, bench.test_set("in_domain")).accuracy;
    const UniformityDiagnostic u = uniformity_diagnostic(a.model, bench.heldout_twins());
    const TrainResult b = bench.train_fresh(true, 0);
    double drift = 0.0;
    for (std::size_t e = 0; e < a.history.epochs.size(); ++e) {
        const auto& x = a.history.epochs[e];
        const auto& y = b.history.epochs[e];
        drift = std::max({drift, std::abs(x.train_loss - y.train_loss), std::abs(x.oi_mean - y.oi_mean),
                          std::abs(x.bi_mean - y.bi_mean)});
    }
    const bool same_length = a.history.epochs.size() == b.history.epochs.size();
    const bool ok = acc >= kMinInDomainAccuracy && u.mean_max_softmax <= kMaxMeanMaxSoftmax && same_length && drift <= kTolRerun;
    return {ok, fmt("in-domain %.2f%% (>= 85), blurred mean_max_softmax %.3f (<= 0.35), rerun drift %.1e",
                    acc, u.mean_max_softmax, drift)};
}

Outcome ac6_shift_direction(Benchmark& bench) {
    double adv = 0.0, ce = 0.0;
    std::string per_seed;
    for (int s = 0; s < kShiftSeeds; ++s) {
        ModelBundle m_adv = bench.model(true, static_cast<std::uint64_t>(s));
        ModelBundle m_ce = bench.model(false, static_cast<std::uint64_t>(s));
        const double a = evaluate(m_adv, bench.test_set("synthetic_shift")).accuracy;
        const double c = evaluate(m_ce, bench.test_set("synthetic_shift")).accuracy;
        adv += a / kShiftSeeds;
        ce += c / kShiftSeeds;
        per_seed += fmt(" [%.1f vs %.1f]", a, c);
    }
    return {adv >= ce, fmt("shifted-domain mean AdvBlur %.2f%% vs CE %.2f%% over 3 seeds;", adv, ce) + per_seed};
}

Outcome ac7_masking(Benchmark& bench) {
    ModelBundle m = bench.model(true, 0);
    const MaskingResult r = masking_experiment(m, bench.test_set("in_domain"), kDefaultMaskThreshold, 0);
    const double drop = r.normal_accuracy - r.masked_accuracy;
    const double control = r.normal_accuracy - r.random_accuracy;
    const bool ok = r.masked_accuracy <= r.normal_accuracy && drop >= control;
    return {ok, fmt("unmasked %.2f%% masked %.2f%% random control %.2f%%", r.normal_accuracy, r.masked_accuracy,
                    r.random_accuracy) +
                    fmt(" (masked fraction %.3f)", r.masked_fraction)};
}

Outcome ac8_aggregation() {
    auto one = [](double v, std::uint64_t seed) {
        EvalReport r;
        r.provenance = {"acceptance", {seed}};
        r.rows.push_back({"DA AdvBlur", "D", v, std::nullopt, 1});
        return r;
    };
    const EvalReport agg = aggregate_seeds({one(81.5, 0), one(82.1, 1), one(81.8, 2)});
    const double mean = agg.rows.at(0).accuracy;
    const double sd = agg.rows.at(0).std.value_or(-1.0);

    EvalReport cams;
    cams.rows = {{"DA AdvBlur", "D", 81.8, std::nullopt, 1}, {"DA AdvBlur", "E", 83.3, std::nullopt, 1}};
    const Table t = make_table(cams, Layout::camera_table);
    const std::string avg = format_fixed(t.row_average(0));
    const std::string text = render_text(t);
    const bool ok = std::abs(mean - 81.8) <= kTolMean && std::abs(sd - 0.245) <= kTolStd && avg == "82.6" &&
                    text.find("82.6") != std::string::npos && text.find("Avg") != std::string::npos;
    return {ok, fmt("mean %.4f std %.4f", mean, sd) + ", camera Avg " + avg};
}

Outcome ac9_documented() {
    const fs::path root = ADVBLUR_SOURCE_DIR;
    std::ifstream in(root / "README.md");
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string readme = ss.str();
    const bool ok = fs::exists(root / "configs" / "full_camera.json") && fs::exists(root / "configs" / "full_external.json") &&
                    readme.find("configs/full_camera.json") != std::string::npos &&
                    readme.find("not part of the desk-scale acceptance") != std::string::npos;
    return {ok, "documentation check only; full-scale runs are not executed here"};
}

std::set<int> parse_list(const std::string& s) {
    std::set<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.insert(std::stoi(item));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only, known;
    fs::path work = ADVBLUR_ACCEPTANCE_WORK_DIR;
    if (const char* env = std::getenv("ADVBLUR_ACCEPTANCE_DIR")) work = env;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (i + 1 < argc && a == "--only") {
            only = parse_list(argv[++i]);
        } else if (i + 1 < argc && a == "--known-failures") {
            known = parse_list(argv[++i]);
        } else if (i + 1 < argc && a == "--work") {
            work = argv[++i];
        } else {
            std::fprintf(stderr, "usage: acceptance [--only N,..] [--known-failures N,..] [--work DIR]\n");
            return 2;
        }
    }

    Benchmark bench(work);
    struct Criterion {
        int id;
        const char* name;
        double budget;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "loss exactness", kBudget1, ac1_loss_exactness},
        {2, "gradient agreement", kBudget2, ac2_gradients},
        {3, "median oracle equivalence", kBudget3, ac3_median_oracle},
        {4, "blur-forge integrity", kBudget4, [&] { return ac4_forge(work); }},
        {5, "synthetic end-to-end", kBudget5, [&] { return ac5_end_to_end(bench); }},
        {6, "domain-shift direction", kBudget6, [&] { return ac6_shift_direction(bench); }},
        {7, "Grad-CAM masking direction", kBudget7, [&] { return ac7_masking(bench); }},
        {8, "aggregation arithmetic", kBudget8, ac8_aggregation},
        {9, "full-scale path documented", 0, ac9_documented},
    };

    int unexpected = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && !only.contains(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool over = c.budget > 0 && secs > c.budget;
        if (over) o.detail += fmt(" [over budget: %.1fs > %.0fs]", secs, c.budget);
        const bool pass = o.pass && !over;
        std::printf("[%s] AC%d %s: %s (%.1fs)%s\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs,
                    !pass && known.contains(c.id) ? " [known failure]" : "");
        std::fflush(stdout);
        if (!pass && !known.contains(c.id)) ++unexpected;
    }
    return unexpected == 0 ? 0 : 1;
}
