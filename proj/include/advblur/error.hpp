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

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace advblur {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A violated precondition on an argument (even kernel, label out of range, ...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A configuration value failed validation; `key()` is the dotted config path.
class ConfigError : public Error {
public:
    ConfigError(std::string key, const std::string& what)
        : Error(key + ": " + what), key_(std::move(key)) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

/// Malformed or inconsistent manifest content. `line()` is 1-based, 0 if not row-specific.
class ManifestError : public Error {
public:
    ManifestError(std::size_t line, std::string column, const std::string& what)
        : Error(format(line, column, what)), line_(line), column_(std::move(column)) {}
    explicit ManifestError(const std::string& what) : Error(what) {}

    std::size_t line() const noexcept { return line_; }
    const std::string& column() const noexcept { return column_; }

private:
    static std::string format(std::size_t line, const std::string& column, const std::string& what) {
        std::string out = "manifest line " + std::to_string(line);
        if (!column.empty()) out += ", column '" + column + "'";
        return out + ": " + what;
    }

    std::size_t line_ = 0;
    std::string column_;
};

class ImageError : public Error {
public:
    using Error::Error;
};

class CheckpointError : public Error {
public:
    using Error::Error;
};

/// Raised when the training loss stops being finite.
class NonFiniteLoss : public Error {
public:
    NonFiniteLoss(int epoch, int batch)
        : Error("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch)),
          epoch_(epoch), batch_(batch) {}
    int epoch() const noexcept { return epoch_; }
    int batch() const noexcept { return batch_; }

private:
    int epoch_;
    int batch_;
};

}  // namespace advblur
