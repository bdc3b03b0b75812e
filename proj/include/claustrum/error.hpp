/*
 *  Copyright 2026 The claustrum-seg Authors
 *
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 *  Unless required by applicable law or agreed to in writing, software
 *  distributed under the License is distributed on an "AS IS" BASIS,
 *  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *  See the License for the specific language governing permissions and
 *  limitations under the License.
 */

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace claustrum {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Tensor shape/channel disagreement or a violated layer precondition.
class ShapeError : public Error {
public:
    using Error::Error;
};

class ValueError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// A user supplied config with a bad field. `path` is the dotted field path.
class ConfigError : public Error {
public:
    ConfigError(std::string path, const std::string& what)
        : Error(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

// Raised when a held-out sample reaches a computation that must only see
// training data, or an augmented sample reaches evaluation.
class LeakageError : public Error {
public:
    using Error::Error;
};

} // namespace claustrum
