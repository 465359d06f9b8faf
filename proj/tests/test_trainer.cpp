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

#include <cmath>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "advblur/evaluator.hpp"
#include "advblur/trainer.hpp"
#include "test_util.hpp"

namespace {

using namespace advblur;
using advblur::testing::TempDir;

constexpr int kSize = 16;

// Grade g lights a bright square in quadrant-like cell g; twins are flat gray.
Image toy_image(int grade, Rng& rng) {
    Image img(kSize, kSize, 3);
    for (float& v : img.pixels) v = static_cast<float>(0.3 + 0.05 * uniform01(rng));
    if (grade == kBlurLabel) {
        for (float& v : img.pixels) v = 0.32f;
        return img;
    }
    const int cx = 2 + (grade % 3) * 5, cy = 2 + (grade / 3) * 7;
    for (int y = cy; y < cy + 4; ++y)
        for (int x = cx; x < cx + 4; ++x)
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = 0.9f;
    return img;
}

ImageSet toy_set(const std::string& name, int per_class, bool twins, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Image> images;
    std::vector<int> labels;
    for (int i = 0; i < per_class; ++i)
        for (int g = 0; g < kNumGrades; ++g) {
            images.push_back(toy_image(g, rng));
            labels.push_back(g);
            if (twins) {
                images.push_back(toy_image(kBlurLabel, rng));
                labels.push_back(kBlurLabel);
            }
        }
    return ImageSet::from_images(name, images, labels);
}

TrainConfig toy_config() {
    TrainConfig c;
    c.backbone = Backbone::small_cnn;
    c.image_size = kSize;
    c.epochs = 6;
    c.batch_size = 16;
    c.learning_rate = 0.003;
    c.seeds = {0};
    return c;
}

class TrainerTest : public ::testing::Test {
protected:
    ImageSet train_ = toy_set("train", 12, true, 1);
    ImageSet plain_ = toy_set("train", 12, false, 1);
    ImageSet val_ = toy_set("val", 4, false, 2);
};

TEST_F(TrainerTest, SameSeedReproducesEveryEpoch) {
    const TrainConfig cfg = toy_config();
    const TrainResult a = train(cfg, train_, val_, 7);
    const TrainResult b = train(cfg, train_, val_, 7);
    ASSERT_EQ(a.history.epochs.size(), b.history.epochs.size());
    for (std::size_t e = 0; e < a.history.epochs.size(); ++e) {
        EXPECT_NEAR(a.history.epochs[e].train_loss, b.history.epochs[e].train_loss, 1e-6);
        EXPECT_NEAR(a.history.epochs[e].bi_mean, b.history.epochs[e].bi_mean, 1e-6);
        EXPECT_EQ(a.history.epochs[e].val_accuracy, b.history.epochs[e].val_accuracy);
    }
    const TrainResult c = train(cfg, train_, val_, 8);
    EXPECT_NE(a.history.epochs[0].train_loss, c.history.epochs[0].train_loss);
}

TEST_F(TrainerTest, OriginalLossAtLeastHalves) {
    const TrainResult r = train(toy_config(), train_, val_, 0);
    const auto& h = r.history.epochs;
    EXPECT_LE(h.back().oi_mean, 0.5 * h.front().oi_mean);
    EXPECT_LT(h.back().bi_mean, 0.16);
    EXPECT_EQ(h.front().oi_count, 60u);
    EXPECT_EQ(h.front().bi_count, 60u);
    EXPECT_GT(h.front().bi_batches, 0u);
}

TEST_F(TrainerTest, ReturnsBestValidationEpoch) {
    TrainResult r = train(toy_config(), train_, val_, 0);
    double best = -1.0;
    int best_epoch = -1;
    for (const auto& e : r.history.epochs)
        if (e.val_accuracy > best) {
            best = e.val_accuracy;
            best_epoch = e.epoch;
        }
    EXPECT_EQ(r.history.best_epoch, best_epoch);
    EXPECT_EQ(r.model.metadata().epoch, best_epoch);
    EXPECT_DOUBLE_EQ(evaluate(r.model, val_).accuracy, best);
}

TEST_F(TrainerTest, SixWayVariantTrainsSixLogitsAndPredictsGrades) {
    TrainConfig cfg = toy_config();
    cfg.loss_variant = LossVariant::cce6;
    cfg.epochs = 2;
    TrainResult r = train(cfg, train_, val_, 0);
    EXPECT_EQ(r.model.metadata().head_width, 6);
    const ImageSet flat = toy_set("flat", 2, true, 3);
    std::vector<std::size_t> rows(flat.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    const nn::Tensor x = flat.batch(rows);
    EXPECT_EQ(r.model.logits(x).c(), 6);
    for (int p : r.model.predict(x)) EXPECT_LT(p, kNumGrades);
}

TEST_F(TrainerTest, BaselineRejectsTwinsAndAdvBlurNeedsThem) {
    TrainConfig cfg = toy_config();
    cfg.epochs = 1;
    EXPECT_THROW(train(cfg, plain_, val_, 0), InvalidArgument);
    cfg.blur.reset();
    EXPECT_THROW(train(cfg, train_, val_, 0), InvalidArgument);
    const TrainResult r = train(cfg, plain_, val_, 0);
    EXPECT_EQ(r.history.epochs.front().bi_count, 0u);
    EXPECT_TRUE(std::isnan(r.history.epochs.front().bi_mean));
    cfg.image_size = 32;
    EXPECT_THROW(train(cfg, plain_, val_, 0), InvalidArgument);
}

TEST_F(TrainerTest, WritesOneHistoryLinePerEpoch) {
    TempDir dir("train");
    TrainOptions opts;
    opts.history_path = dir / "h" / "history.jsonl";
    int calls = 0;
    opts.on_epoch = [&](const EpochRecord&) { ++calls; };
    TrainConfig cfg = toy_config();
    cfg.epochs = 3;
    train(cfg, train_, val_, 0, opts);
    EXPECT_EQ(calls, 3);
    const std::string text = advblur::testing::read_text(opts.history_path);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
    EXPECT_NE(text.find("\"bi_mean\""), std::string::npos);
}

TEST(Evaluator, AccuracyAndUniformityOracles) {
    const std::vector<int> pred{0, 1, 2, 3, 4, 4};
    const std::vector<int> truth{0, 1, 2, 0, 0, 4};
    EXPECT_NEAR(accuracy_percent(pred, truth), 400.0 / 6.0, 1e-12);

    // A zero-weight model emits equal logits: max softmax 0.2, BI loss 0.
    TrainConfig cfg = toy_config();
    ModelBundle m = build_model(cfg, 0);
    for (auto& [name, p] : m.network().parameters())
        if (name.starts_with(m.network().head_name())) std::fill(p->value.begin(), p->value.end(), 0.0f);
    Rng rng(0);
    std::vector<Image> imgs{toy_image(kBlurLabel, rng), toy_image(kBlurLabel, rng)};
    const ImageSet blurred = ImageSet::from_images("b", imgs, {kBlurLabel, kBlurLabel});
    const UniformityDiagnostic u = uniformity_diagnostic(m, blurred);
    EXPECT_NEAR(u.mean_max_softmax, 0.2, 1e-6);
    EXPECT_NEAR(u.mean_bi_loss, 0.0, 1e-12);
    EXPECT_EQ(u.n, 2u);
    EXPECT_THROW(evaluate(m, blurred), InvalidArgument);
}

}  // namespace
