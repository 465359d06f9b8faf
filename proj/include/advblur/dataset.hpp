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

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "advblur/image.hpp"
#include "advblur/manifest.hpp"
#include "advblur/nn/tensor.hpp"
#include "advblur/parallel.hpp"

namespace advblur {

/// Records decoded at a fixed square training size. Small sets are cached in
/// memory as 8-bit HWC; sets above `cache_limit_bytes` are decoded per batch.
class ImageSet {
public:
    static constexpr std::size_t kDefaultCacheLimit = std::size_t{2} << 30;

    ImageSet() = default;

    ImageSet(std::string name, std::vector<ImageRecord> records, int size, int threads = 0,
             std::size_t cache_limit_bytes = kDefaultCacheLimit)
        : name_(std::move(name)), records_(std::move(records)), size_(size), threads_(threads) {
        if (size <= 0) throw InvalidArgument("image size must be positive");
        labels_.reserve(records_.size());
        for (const auto& r : records_) labels_.push_back(r.label);
        if (records_.size() * stride() <= cache_limit_bytes) {
            cache_.resize(records_.size() * stride());
            parallel_for(
                records_.size(),
                [&](std::size_t i) {
                    const Image img = load_image(records_[i], size_);
                    std::uint8_t* dst = cache_.data() + i * stride();
                    for (std::size_t k = 0; k < stride(); ++k) dst[k] = quantize8(img.pixels[k]);
                },
                threads_);
            cached_ = true;
        }
    }

    /// In-memory set (no files); images must be size x size x 3 in [0,1].
    static ImageSet from_images(std::string name, const std::vector<Image>& images, const std::vector<int>& labels) {
        if (images.size() != labels.size()) throw InvalidArgument("image/label count mismatch");
        if (images.empty()) throw InvalidArgument("from_images needs at least one image");
        ImageSet out;
        out.name_ = std::move(name);
        out.size_ = images.front().height;
        out.labels_ = labels;
        out.cached_ = true;
        for (std::size_t i = 0; i < images.size(); ++i) {
            const Image& img = images[i];
            if (img.height != out.size_ || img.width != out.size_ || img.channels != 3) {
                throw InvalidArgument("from_images needs square 3-channel images of one size");
            }
            ImageRecord r;
            r.image_path = "<memory>/" + std::to_string(i);
            r.label = labels[i];
            out.records_.push_back(std::move(r));
            for (float v : img.pixels) out.cache_.push_back(quantize8(v));
        }
        return out;
    }

    const std::string& name() const { return name_; }
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }
    int image_size() const { return size_; }
    bool cached() const { return cached_; }
    const std::vector<int>& labels() const { return labels_; }
    const std::vector<ImageRecord>& records() const { return records_; }

    Image image(std::size_t i) const {
        if (!cached_) return load_image(records_.at(i), size_);
        Image img(size_, size_, 3);
        const std::uint8_t* src = cache_.data() + i * stride();
        for (std::size_t k = 0; k < stride(); ++k) img.pixels[k] = static_cast<float>(src[k]) / 255.0f;
        return img;
    }

    /// NCHW batch of the given rows, values in [0,1].
    nn::Tensor batch(std::span<const std::size_t> rows) const {
        nn::Tensor t(static_cast<int>(rows.size()), 3, size_, size_);
        const std::size_t plane = static_cast<std::size_t>(size_) * size_;
        auto fill = [&](std::size_t b) {
            float* dst = t.sample(static_cast<int>(b));
            if (cached_) {
                const std::uint8_t* src = cache_.data() + rows[b] * stride();
                for (std::size_t i = 0; i < plane; ++i)
                    for (std::size_t c = 0; c < 3; ++c) dst[c * plane + i] = static_cast<float>(src[i * 3 + c]) * (1.0f / 255.0f);
            } else {
                const Image img = load_image(records_.at(rows[b]), size_);
                for (std::size_t i = 0; i < plane; ++i)
                    for (std::size_t c = 0; c < 3; ++c) dst[c * plane + i] = img.pixels[i * 3 + c];
            }
        };
        if (cached_) {
            for (std::size_t b = 0; b < rows.size(); ++b) fill(b);
        } else {
            parallel_for(rows.size(), fill, threads_);
        }
        return t;
    }

    /// Subset of the records for which keep(record) holds.
    template <typename Pred>
    ImageSet filter(std::string name, Pred keep) const {
        ImageSet out;
        out.name_ = std::move(name);
        out.size_ = size_;
        out.threads_ = threads_;
        out.cached_ = cached_;
        for (std::size_t i = 0; i < records_.size(); ++i) {
            if (!keep(records_[i])) continue;
            out.records_.push_back(records_[i]);
            out.labels_.push_back(labels_[i]);
            if (cached_) out.cache_.insert(out.cache_.end(), cache_.begin() + static_cast<std::ptrdiff_t>(i * stride()),
                                           cache_.begin() + static_cast<std::ptrdiff_t>((i + 1) * stride()));
        }
        return out;
    }

private:
    std::size_t stride() const { return static_cast<std::size_t>(size_) * size_ * 3; }

    std::string name_;
    std::vector<ImageRecord> records_;
    std::vector<int> labels_;
    int size_ = 0;
    int threads_ = 0;
    bool cached_ = false;
    std::vector<std::uint8_t> cache_;
};

}  // namespace advblur
