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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "advblur/error.hpp"

namespace advblur {

/// Interleaved H x W x C float image (RGB order, values nominally in [0,1]).
struct Image {
    int height = 0;
    int width = 0;
    int channels = 3;
    std::vector<float> pixels;

    Image() = default;
    Image(int h, int w, int c = 3, float fill = 0.0f)
        : height(h), width(w), channels(c), pixels(static_cast<std::size_t>(h) * w * c, fill) {}

    float& at(int y, int x, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
    float at(int y, int x, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c]; }

    bool empty() const { return pixels.empty(); }
    std::size_t plane_size() const { return static_cast<std::size_t>(height) * width; }

    /// Copy of one channel as a dense row-major plane.
    std::vector<float> channel(int c) const {
        std::vector<float> out(plane_size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = pixels[i * channels + c];
        return out;
    }

    void set_channel(int c, const std::vector<float>& plane) {
        for (std::size_t i = 0; i < plane.size(); ++i) pixels[i * channels + c] = plane[i];
    }

    bool operator==(const Image&) const = default;
};

enum class Border { reflect, replicate };

inline std::string_view to_string(Border b) { return b == Border::reflect ? "reflect" : "replicate"; }

inline Border parse_border(std::string_view s) {
    if (s == "reflect") return Border::reflect;
    if (s == "replicate") return Border::replicate;
    throw InvalidArgument("unknown border policy '" + std::string(s) + "' (expected reflect|replicate)");
}

/// Maps an out-of-range coordinate onto [0, n).
/// reflect mirrors with the edge sample repeated (fedcba|abcdef|fedcba), the same
/// convention as cv::BORDER_REFLECT; it folds periodically for offsets beyond n.
inline int border_index(int i, int n, Border border) {
    if (i >= 0 && i < n) return i;
    if (border == Border::replicate) return std::clamp(i, 0, n - 1);
    const int period = 2 * n;
    int m = i % period;
    if (m < 0) m += period;
    return m < n ? m : period - 1 - m;
}

inline int to_cv_border(Border b) { return b == Border::reflect ? cv::BORDER_REFLECT : cv::BORDER_REPLICATE; }

/// 8-bit or float BGR(A)/gray mat -> RGB float image in [0,1].
inline Image from_mat(const cv::Mat& mat) {
    cv::Mat bgr;
    if (mat.channels() == 1) {
        cv::cvtColor(mat, bgr, cv::COLOR_GRAY2BGR);
    } else if (mat.channels() == 4) {
        cv::cvtColor(mat, bgr, cv::COLOR_BGRA2BGR);
    } else {
        bgr = mat;
    }
    cv::Mat f;
    if (bgr.depth() == CV_8U) {
        bgr.convertTo(f, CV_32FC3, 1.0 / 255.0);
    } else if (bgr.depth() == CV_16U) {
        bgr.convertTo(f, CV_32FC3, 1.0 / 65535.0);
    } else {
        bgr.convertTo(f, CV_32FC3);
    }
    Image out(f.rows, f.cols, 3);
    for (int y = 0; y < f.rows; ++y) {
        const auto* row = f.ptr<cv::Vec3f>(y);
        for (int x = 0; x < f.cols; ++x) {
            out.at(y, x, 0) = row[x][2];
            out.at(y, x, 1) = row[x][1];
            out.at(y, x, 2) = row[x][0];
        }
    }
    return out;
}

/// RGB float image -> BGR mat of type CV_32FC3 (values unchanged).
inline cv::Mat to_mat_float(const Image& img) {
    cv::Mat out(img.height, img.width, CV_32FC3);
    for (int y = 0; y < img.height; ++y) {
        auto* row = out.ptr<cv::Vec3f>(y);
        for (int x = 0; x < img.width; ++x) {
            row[x] = cv::Vec3f(img.at(y, x, 2), img.at(y, x, 1), img.at(y, x, 0));
        }
    }
    return out;
}

inline std::uint8_t quantize8(float v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

/// RGB float image -> BGR 8-bit mat, rounding to nearest level.
inline cv::Mat to_mat8(const Image& img) {
    cv::Mat out(img.height, img.width, CV_8UC3);
    for (int y = 0; y < img.height; ++y) {
        auto* row = out.ptr<cv::Vec3b>(y);
        for (int x = 0; x < img.width; ++x) {
            row[x] = cv::Vec3b(quantize8(img.at(y, x, 2)), quantize8(img.at(y, x, 1)), quantize8(img.at(y, x, 0)));
        }
    }
    return out;
}

/// Decodes an image file at native resolution into a 3-channel RGB image in [0,1].
/// Grayscale sources are replicated to three channels.
inline Image read_image(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) {
        throw ImageError("image file not found: " + path.string());
    }
    cv::Mat mat = cv::imread(path.string(), cv::IMREAD_ANYDEPTH | cv::IMREAD_ANYCOLOR);
    if (mat.empty()) throw ImageError("cannot decode image: " + path.string());
    if (mat.channels() != 1 && mat.channels() != 3 && mat.channels() != 4) {
        throw ImageError("unsupported channel count " + std::to_string(mat.channels()) + ": " + path.string());
    }
    return from_mat(mat);
}

/// Lossless 8-bit PNG.
inline void write_png(const Image& img, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    if (!cv::imwrite(path.string(), to_mat8(img))) {
        throw ImageError("cannot write image: " + path.string());
    }
}

/// Aspect-preserving resize (shorter side -> size) followed by a centered size x size crop.
inline Image resize_center_crop(const Image& src, int size) {
    if (size <= 0) throw InvalidArgument("target size must be positive");
    if (src.height == size && src.width == size) return src;
    const double scale = static_cast<double>(size) / std::min(src.height, src.width);
    const int rh = std::max(size, static_cast<int>(std::lround(src.height * scale)));
    const int rw = std::max(size, static_cast<int>(std::lround(src.width * scale)));
    cv::Mat resized;
    const int interp = scale < 1.0 ? cv::INTER_AREA : cv::INTER_LINEAR;
    cv::resize(to_mat_float(src), resized, cv::Size(rw, rh), 0, 0, interp);
    const int y0 = (rh - size) / 2;
    const int x0 = (rw - size) / 2;
    Image out = from_mat(resized(cv::Rect(x0, y0, size, size)).clone());
    for (float& v : out.pixels) v = std::clamp(v, 0.0f, 1.0f);
    return out;
}

/// Decode + resize/crop to size x size x 3, values in [0,1].
inline Image load_image(const std::filesystem::path& path, int target_size) {
    return resize_center_crop(read_image(path), target_size);
}

}  // namespace advblur
