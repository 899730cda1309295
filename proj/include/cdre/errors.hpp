#pragma once
//------------------------------------------------------------------------------
//
//   Copyright 2026 The CDRE Authors
//
//   Licensed under the Apache License, Version 2.0 (the "License");
//   you may not use this file except in compliance with the License.
//   You may obtain a copy of the License at
//
//       http://www.apache.org/licenses/LICENSE-2.0
//
//   Unless required by applicable law or agreed to in writing, software
//   distributed under the License is distributed on an "AS IS" BASIS,
//   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//   See the License for the specific language governing permissions and
//   limitations under the License.
//
//------------------------------------------------------------------------------

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cdre {

/// Array or batch dimensions that do not compose.
class ShapeError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid argument to an estimator or oracle (empty batch, duplicate origin, ...).
class ArgumentError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

/// Non-finite values encountered while training. `where` is a step or layer index.
class TrainingError : public std::runtime_error
{
public:
  TrainingError(std::string const &what, std::size_t where)
    : std::runtime_error(what + " (at index " + std::to_string(where) + ")")
    , where_(where)
  {}

  std::size_t where() const noexcept
  {
    return where_;
  }

private:
  std::size_t where_;
};

/// Singular or otherwise ill-posed numerical problem.
class NumericError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Bad configuration value. `key()` names the offending dotted key.
class ConfigError : public std::runtime_error
{
public:
  ConfigError(std::string key, std::string const &what)
    : std::runtime_error(key.empty() ? what : key + ": " + what)
    , key_(std::move(key))
  {}

  std::string const &key() const noexcept
  {
    return key_;
  }

private:
  std::string key_;
};

}  // namespace cdre
