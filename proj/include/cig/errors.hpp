/*
 * Copyright 2026 The cig Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cig {

/// Base class of every error thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A tensor or layer shape disagrees with the operation's contract.
class ShapeError : public Error {
  using Error::Error;
};

/// A numeric or size parameter is outside its documented range.
class ParameterError : public Error {
  using Error::Error;
};

/// An API precondition was violated (non-scalar selector, wrong class, ...).
class ContractError : public Error {
  using Error::Error;
};

/// A bag with zero instances was passed where at least one is required.
class EmptyBagError : public Error {
  using Error::Error;
};

/// An iterative solver ran out of iterations; carries its last estimate.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double last_estimate)
      : Error(what), last_estimate_(last_estimate) {}
  double last_estimate() const { return last_estimate_; }

 private:
  double last_estimate_;
};

/// Malformed or corrupted file; offset is the byte position of the problem.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class IoError : public Error {
  using Error::Error;
};

class DatasetError : public Error {
  using Error::Error;
};

class PoolError : public Error {
  using Error::Error;
};

class EvalError : public Error {
  using Error::Error;
};

/// A non-finite value appeared where the math promises finite results.
class NumericError : public Error {
  using Error::Error;
};

/// Invalid run configuration; carries the offending field name.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, std::string field)
      : Error(what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace cig
