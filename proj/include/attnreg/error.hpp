// Copyright 2026 The attnreg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace attnreg {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid input or configuration; the CLI maps these to exit code 1.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Filesystem and format problems.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Numerical breakdown during training (non-finite loss or parameter).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace attnreg
