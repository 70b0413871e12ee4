// Copyright 2025 The EP-MPD Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace epmpd {

// Root of the project's exception hierarchy.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// crypto
class OversizeElement : public Error {
 public:
  using Error::Error;
};
class MalformedPadding : public Error {
 public:
  using Error::Error;
};
class InvalidPoint : public Error {
 public:
  using Error::Error;
};
class UnknownDigest : public Error {
 public:
  using Error::Error;
};

// protocol
class ProtocolAbort : public Error {
 public:
  using Error::Error;
};
class UnknownCiphertext : public ProtocolAbort {
 public:
  using ProtocolAbort::ProtocolAbort;
};

// runtime
class DuplicateParty : public Error {
 public:
  using Error::Error;
};
class UnknownParty : public Error {
 public:
  using Error::Error;
};
class IncompleteRun : public Error {
 public:
  using Error::Error;
};
class MeasureNesting : public Error {
 public:
  using Error::Error;
};

// dedup
class TooFewClients : public Error {
 public:
  using Error::Error;
};
class DuplicateWithinSet : public Error {
 public:
  using Error::Error;
};

// datagen
class InfeasibleSpec : public Error {
 public:
  using Error::Error;
};

// netio
class BindFailure : public Error {
 public:
  using Error::Error;
};
class HandshakeFailure : public Error {
 public:
  using Error::Error;
};
class ConnectionLost : public Error {
 public:
  using Error::Error;
};

}  // namespace epmpd
