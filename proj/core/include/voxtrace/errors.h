// Copyright 2026 The voxtrace Authors.
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

#ifndef VOXTRACE_ERRORS_H_
#define VOXTRACE_ERRORS_H_

#include <stdexcept>
#include <string>

namespace voxtrace {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad or unusable input data. The CLI maps these to exit code 2.
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite values during optimization. The CLI maps these to exit code 3.
class NumericalError : public Error {
 public:
  using Error::Error;
};

#define VOXTRACE_DEFINE_ERROR(Name, Base) \
  class Name : public Base {              \
   public:                                \
    using Base::Base;                     \
  }

VOXTRACE_DEFINE_ERROR(InvalidAudio, DataError);
VOXTRACE_DEFINE_ERROR(SilentAudio, DataError);
VOXTRACE_DEFINE_ERROR(AlignmentError, DataError);
VOXTRACE_DEFINE_ERROR(DegenerateData, DataError);
VOXTRACE_DEFINE_ERROR(ClassMissing, DataError);
VOXTRACE_DEFINE_ERROR(ParseError, DataError);
VOXTRACE_DEFINE_ERROR(DuplicateId, DataError);
VOXTRACE_DEFINE_ERROR(InsufficientData, DataError);
VOXTRACE_DEFINE_ERROR(InvalidWeights, DataError);
VOXTRACE_DEFINE_ERROR(ShapeError, Error);
VOXTRACE_DEFINE_ERROR(NotScalar, Error);
VOXTRACE_DEFINE_ERROR(GraphError, Error);

#undef VOXTRACE_DEFINE_ERROR

}  // namespace voxtrace

#endif  // VOXTRACE_ERRORS_H_
