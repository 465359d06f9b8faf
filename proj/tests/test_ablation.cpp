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

#include <string>

#include <gtest/gtest.h>

#include "advblur/ablation.hpp"
#include "advblur/synthetic.hpp"
#include "test_util.hpp"

namespace {

namespace fs = std::filesystem;
using namespace advblur;
using advblur::testing::TempDir;

TrainConfig tiny_config() {
    TrainConfig c;
    c.backbone = Backbone::small_cnn;
    c.image_size = 32;
    c.epochs = 1;
    c.batch_size = 16;
    c.blur->kernel = 15;
    c.seeds = {0};
    return c;
}

AblationSpec tiny_spec(AblationAxis axis, std::vector<std::string> variants) {
    AblationSpec s;
    s.axis = axis;
    s.variants = std::move(variants);
    s.base_config = tiny_config();
    SplitSpec split;
    split.train = Selector{{"synthetic"}, {}, false};
    split.tests = {{"synthetic_shift", Selector{{"synthetic_shift"}, {}, false}}};
    s.protocols = {{"main", split}};
    return s;
}

TEST(Ablation, VariantConfigChangesOnlyTheAxis) {
    const TrainConfig base = tiny_config();
    const TrainConfig g = variant_config(base, AblationAxis::blur, "gaussian");
    EXPECT_EQ(g.blur->method, BlurMethod::gaussian);
    EXPECT_EQ(config_hash(g, {"blur.method"}), config_hash(base, {"blur.method"}));
    const TrainConfig c6 = variant_config(base, AblationAxis::loss, "cce6");
    EXPECT_EQ(c6.loss_variant, LossVariant::cce6);
    EXPECT_EQ(c6.head_width(), 6);
    EXPECT_EQ(config_hash(c6, {"loss.variant"}), config_hash(base, {"loss.variant"}));
    EXPECT_THROW(variant_config(base, AblationAxis::blur, "cce6"), ConfigError);
    TrainConfig none = base;
    none.blur.reset();
    EXPECT_THROW(variant_config(none, AblationAxis::loss, "custom"), ConfigError);
}

TEST(Ablation, ValidateRejectsMismatchAndDuplicates) {
    EXPECT_NO_THROW(validate(tiny_spec(AblationAxis::blur, default_variants(AblationAxis::blur))));
    EXPECT_NO_THROW(validate(tiny_spec(AblationAxis::loss, default_variants(AblationAxis::loss))));
    EXPECT_THROW(validate(tiny_spec(AblationAxis::loss, {"median"})), ConfigError);
    EXPECT_THROW(validate(tiny_spec(AblationAxis::blur, {"box", "box"})), ConfigError);
    AblationSpec no_protocol = tiny_spec(AblationAxis::blur, {"box"});
    no_protocol.protocols.clear();
    EXPECT_THROW(validate(no_protocol), ConfigError);
}

TEST(Ablation, RunDirLayout) {
    EXPECT_EQ(ablation_run_dir("/r", AblationAxis::blur, "box", 3), fs::path("/r/ablations/blur/box/seed_3"));
    EXPECT_EQ(ablated_key(AblationAxis::loss), "loss.variant");
    EXPECT_EQ(parse_ablation_axis("blur"), AblationAxis::blur);
    EXPECT_THROW(parse_ablation_axis("kernel"), InvalidArgument);
}

class AblationRun : public ::testing::Test {
protected:
    void SetUp() override {
        SyntheticSpec spec;
        spec.native_size = 64;
        originals_ = make_synthetic_dataset(50, {source_domain(), shifted_domain()}, 1, dir_ / "data", spec);
    }
    TempDir dir_{"ablate"};
    DatasetManifest originals_;
};

TEST_F(AblationRun, TwoBlurVariantsOneSeed) {
    const AblationSpec spec = tiny_spec(AblationAxis::blur, {"median", "box"});
    const AblationResult r = run_ablation(spec, originals_, dir_.path());
    ASSERT_EQ(r.combined.rows.size(), 2u);
    EXPECT_EQ(r.combined.rows[0].method, "median");
    EXPECT_EQ(r.combined.rows[1].method, "box");
    EXPECT_EQ(r.masked_hashes.at("median"), r.masked_hashes.at("box"));
    for (const std::string v : {"median", "box"}) {
        const fs::path run = ablation_run_dir(dir_.path(), AblationAxis::blur, v, 0);
        EXPECT_TRUE(fs::exists(run / "model.ckpt"));
        EXPECT_TRUE(fs::exists(run / "history.jsonl"));
        EXPECT_TRUE(fs::exists(run / "eval.csv"));
        EXPECT_TRUE(fs::exists(dir_ / ("ablations/blur/_data/" + v + "/manifest.csv")));
    }
    EXPECT_TRUE(fs::exists(r.table.csv_path));
    EXPECT_NE(r.table.text.find('*'), std::string::npos);
    EXPECT_NE(r.table.text.find("median"), std::string::npos);

    // The stored checkpoint reloads under its variant's hash.
    CheckpointOptions opts;
    opts.expected_config_hash = config_hash(variant_config(spec.base_config, spec.axis, "box"));
    EXPECT_NO_THROW(load_checkpoint(ablation_run_dir(dir_.path(), AblationAxis::blur, "box", 0) / "model.ckpt", opts));
}

TEST_F(AblationRun, LossAxisSharesForgedDataAndIsReproducible) {
    AblationSpec spec = tiny_spec(AblationAxis::loss, {"custom", "cce6"});
    const AblationResult a = run_ablation(spec, originals_, dir_ / "a");
    EXPECT_TRUE(fs::exists(dir_ / "a/ablations/loss/_data/shared/manifest.csv"));
    EXPECT_FALSE(fs::exists(dir_ / "a/ablations/loss/_data/custom"));
    const AblationResult b = run_ablation(spec, originals_, dir_ / "b");
    ASSERT_EQ(a.combined.rows.size(), b.combined.rows.size());
    for (std::size_t i = 0; i < a.combined.rows.size(); ++i) EXPECT_EQ(a.combined.rows[i].accuracy, b.combined.rows[i].accuracy);
}

}  // namespace
