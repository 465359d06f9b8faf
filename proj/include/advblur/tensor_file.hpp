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

// Single-file weight container shared by checkpoints and converted pretrained
// weights:
//
//   ADVBLUR-CHECKPOINT 1\n
//   <header byte length>\n
//   <JSON header>                       metadata, tensor table, payload digest
//   <payload>                           little-endian float32, tensors back to back
//
// The tensor table lists {name, shape, offset, count} with offsets in floats.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "advblur/error.hpp"
#include "advblur/hash.hpp"
#include "advblur/nn/layers.hpp"

namespace advblur {

static_assert(std::endian::native == std::endian::little, "tensor files are little-endian float32");

inline constexpr std::string_view kTensorFileMagic = "ADVBLUR-CHECKPOINT 1";

struct StoredTensor {
    std::vector<int> shape;
    std::vector<float> values;
};

struct TensorFile {
    nlohmann::json metadata;
    std::map<std::string, StoredTensor> tensors;
};

inline void write_tensor_file(const std::filesystem::path& path, const nlohmann::json& metadata,
                              const nn::NamedParameters& params) {
    nlohmann::json table = nlohmann::json::array();
    std::size_t offset = 0;
    Sha256 digest;
    for (const auto& [name, p] : params) {
        table.push_back({{"name", name}, {"shape", p->shape}, {"offset", offset}, {"count", p->numel()}});
        offset += p->numel();
        digest.update(p->value.data(), p->numel() * sizeof(float));
    }
    nlohmann::json header{{"metadata", metadata},
                          {"tensors", table},
                          {"payload_bytes", offset * sizeof(float)},
                          {"payload_sha256", digest.hex()}};
    const std::string text = header.dump();

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw CheckpointError("cannot open " + tmp.string() + " for writing");
        out << kTensorFileMagic << '\n' << text.size() << '\n' << text;
        for (const auto& [name, p] : params) {
            out.write(reinterpret_cast<const char*>(p->value.data()),
                      static_cast<std::streamsize>(p->numel() * sizeof(float)));
        }
        if (!out) throw CheckpointError("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline TensorFile read_tensor_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open " + path.string());
    std::string magic;
    std::getline(in, magic);
    if (magic != kTensorFileMagic) throw CheckpointError(path.string() + ": not an advblur weight file");
    std::string len_line;
    std::getline(in, len_line);
    std::size_t header_len = 0;
    try {
        header_len = std::stoull(len_line);
    } catch (const std::exception&) {
        throw CheckpointError(path.string() + ": corrupt header length");
    }
    if (header_len > (std::size_t{1} << 30)) throw CheckpointError(path.string() + ": corrupt header length");
    std::string text(header_len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(header_len));
    if (static_cast<std::size_t>(in.gcount()) != header_len) throw CheckpointError(path.string() + ": truncated header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(path.string() + ": corrupt header: " + e.what());
    }

    TensorFile file;
    try {
        file.metadata = header.at("metadata");
        const std::size_t payload_bytes = header.at("payload_bytes").get<std::size_t>();
        if (payload_bytes % sizeof(float) != 0) throw CheckpointError(path.string() + ": payload size not float-aligned");
        std::vector<float> payload(payload_bytes / sizeof(float));
        in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload_bytes));
        if (static_cast<std::size_t>(in.gcount()) != payload_bytes) throw CheckpointError(path.string() + ": truncated payload");
        if (in.peek() != std::char_traits<char>::eof()) throw CheckpointError(path.string() + ": trailing bytes after payload");
        if (Sha256().update(payload.data(), payload_bytes).hex() != header.at("payload_sha256").get<std::string>()) {
            throw CheckpointError(path.string() + ": payload checksum mismatch");
        }
        for (const auto& t : header.at("tensors")) {
            StoredTensor st;
            st.shape = t.at("shape").get<std::vector<int>>();
            const auto offset = t.at("offset").get<std::size_t>();
            const auto count = t.at("count").get<std::size_t>();
            std::size_t expected = 1;
            for (int d : st.shape) expected *= static_cast<std::size_t>(d);
            if (expected != count || offset + count > payload.size()) {
                throw CheckpointError(path.string() + ": inconsistent tensor table entry " + t.at("name").get<std::string>());
            }
            st.values.assign(payload.begin() + static_cast<std::ptrdiff_t>(offset),
                             payload.begin() + static_cast<std::ptrdiff_t>(offset + count));
            file.tensors.emplace(t.at("name").get<std::string>(), std::move(st));
        }
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(path.string() + ": corrupt header: " + e.what());
    }
    return file;
}

/// Copies stored tensors into `params` by name. Names starting with any of
/// `skip_prefixes` are left untouched; every other parameter must be present
/// with a matching shape.
inline void assign_parameters(const TensorFile& file, const nn::NamedParameters& params,
                              const std::vector<std::string>& skip_prefixes = {}) {
    for (const auto& [name, p] : params) {
        bool skip = false;
        for (const auto& prefix : skip_prefixes) skip |= name.rfind(prefix, 0) == 0;
        if (skip) continue;
        auto it = file.tensors.find(name);
        if (it == file.tensors.end()) throw CheckpointError("missing tensor " + name);
        if (it->second.shape != p->shape) throw CheckpointError("shape mismatch for tensor " + name);
        p->value.assign(it->second.values.begin(), it->second.values.end());
    }
}

}  // namespace advblur
