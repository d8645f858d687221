// Copyright 2026 The Carleman-KPP Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace carleman {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller violated a documented precondition (bad shape, bad parameter,
/// unsupported configuration). The CLI maps these to exit code 2.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

/// A size guard (matrix dimension, enumeration count) was exceeded.
class CapacityError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

class UnsupportedError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

/// Numerical failure during a computation. The CLI maps these to exit code 3.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class SingularMatrixError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Two diagonal blocks of a Carleman matrix share an eigenvalue, so the
/// block padding step cannot be carried out.
class ResonanceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace carleman
