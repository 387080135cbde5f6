// Copyright 2026 The shapeservo Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
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

namespace shapeservo {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A state lies outside the domain of a kinematic mapping
/// (bend angle >= pi, non-physical cable lengths, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Argument sizes or counts do not agree.
class SizeMismatch : public Error {
 public:
  using Error::Error;
};

/// A point is too close to (or behind) the camera for the operation.
class DepthError : public Error {
 public:
  using Error::Error;
};

/// Error that carries the index of the section (or feature) it refers to.
/// Index is zero-based.
class IndexedError : public Error {
 public:
  IndexedError(const std::string& what, std::size_t index)
      : Error(what + " [section " + std::to_string(index) + "]"),
        index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

class VisibilityError : public IndexedError {
 public:
  using IndexedError::IndexedError;
};

class EstimationError : public IndexedError {
 public:
  using IndexedError::IndexedError;
};

/// Target cannot be reached within the section limits.
class UnreachableError : public Error {
 public:
  UnreachableError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  /// Constraint violation of the best candidate found (mm or rad).
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// No candidate satisfies the obstacle and limit constraints.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// Non-finite numbers showed up inside the control loop.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Malformed or invalid configuration / message content.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace shapeservo
