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

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "advblur/model.hpp"
#include "advblur/tensor_file.hpp"

namespace advblur {

inline void save_checkpoint(ModelBundle& bundle, const std::filesystem::path& path) {
    write_tensor_file(path, to_json(bundle.metadata()), bundle.network().parameters());
}

struct CheckpointOptions {
    /// Hash of the config the caller intends to use; unset skips the comparison.
    std::optional<std::string> expected_config_hash;
    /// Accept a mismatching expected hash (a warning is still printed).
    bool allow_hash_mismatch = false;
    std::ostream* warnings = &std::cerr;
};

/// Restores weights and metadata. The stored hash must match the stored config;
/// a mismatch against `expected_config_hash` is refused unless overridden.
inline ModelBundle load_checkpoint(const std::filesystem::path& path, const CheckpointOptions& opts = {}) {
    const TensorFile file = read_tensor_file(path);
    ModelMetadata meta;
    try {
        meta = metadata_from_json(file.metadata);
    } catch (const std::exception& e) {
        throw CheckpointError(path.string() + ": bad metadata: " + e.what());
    }
    TrainConfig stored;
    try {
        stored = train_config_from_json(meta.train_config);
    } catch (const Error& e) {
        throw CheckpointError(path.string() + ": bad stored config: " + e.what());
    }
    if (config_hash(stored) != meta.config_hash) {
        throw CheckpointError(path.string() + ": stored config hash does not match the stored config");
    }
    if (opts.expected_config_hash && *opts.expected_config_hash != meta.config_hash) {
        const std::string msg = path.string() + ": config hash mismatch (checkpoint " + meta.config_hash.substr(0, 12) +
                                ", expected " + opts.expected_config_hash->substr(0, 12) + ")";
        if (!opts.allow_hash_mismatch) throw CheckpointError(msg + "; pass the override flag to load anyway");
        if (opts.warnings) *opts.warnings << "warning: " << msg << "\n";
    }
    nn::Network net = make_network(meta.backbone, meta.head_width);
    const auto params = net.parameters();
    if (params.size() != file.tensors.size()) throw CheckpointError(path.string() + ": tensor count does not match the architecture");
    assign_parameters(file, params);
    return ModelBundle(std::move(net), std::move(meta));
}

}  // namespace advblur
