// Copyright 2026 The privbias Authors
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

#ifndef PRIVBIAS_ERRORS_H_
#define PRIVBIAS_ERRORS_H_

#include <stdexcept>
#include <string>

namespace privbias {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file or record.
class ParseError : public Error {
 public:
  using Error::Error;
};

// A caller violated an operation's precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A scoring backend answered with a message that breaks the wire protocol.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// A scoring backend could not be reached after all retries.
class TransportError : public Error {
 public:
  using Error::Error;
};

}  // namespace privbias

#endif  // PRIVBIAS_ERRORS_H_
