/* Copyright (c) 2026 The ipool Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License. */

#pragma once

#include <stdexcept>
#include <string>

namespace ipool {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor dims, channel counts or parameter shapes do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A value outside an operation's domain (bad label, qf, factor, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A file does not follow the expected on-disk layout.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A checkpoint is truncated or carries a bad magic/version.
class CorruptCheckpoint : public FormatError {
 public:
  using FormatError::FormatError;
};

/// A checkpoint is well formed but belongs to a different network.
class CheckpointMismatch : public Error {
 public:
  using Error::Error;
};

/// A generated record does not fit its patch after resampling.
class DiscardedRecord : public Error {
 public:
  using Error::Error;
};

/// A finite-difference probe hit NaN or infinity.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

namespace detail {

[[noreturn]] inline void fail_shape(const std::string& what) {
  throw ShapeError(what);
}

}  // namespace detail

#define IPOOL_CHECK_SHAPE(cond, msg)                 \
  do {                                               \
    if (!(cond)) ::ipool::detail::fail_shape(msg);   \
  } while (0)

}  // namespace ipool
