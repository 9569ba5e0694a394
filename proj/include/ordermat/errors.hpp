// Copyright 2026 The ordermat Authors
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

#ifndef ORDERMAT_ERRORS_HPP
#define ORDERMAT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace ordermat {

/// Shape mismatch, out-of-range index, malformed input.
class InvalidArgument : public std::invalid_argument {
  public:
   using std::invalid_argument::invalid_argument;
};

/// NaN or Inf produced or supplied where finite values are required.
class NumericError : public std::runtime_error {
  public:
   using std::runtime_error::runtime_error;
};

/// Operation requested in a state where it cannot proceed (e.g. no agent
/// left to choose).
class InvalidState : public std::logic_error {
  public:
   using std::logic_error::logic_error;
};

/// Request outside what an oracle or environment can enumerate.
class Unsupported : public std::runtime_error {
  public:
   using std::runtime_error::runtime_error;
};

/// Reading or writing an artifact on disk failed.
class IoError : public std::runtime_error {
  public:
   using std::runtime_error::runtime_error;
};

}  // namespace ordermat

#endif  // ORDERMAT_ERRORS_HPP
