/*
 Copyright 2026 The Scribo Authors
 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      http://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#pragma once

#include <stdexcept>
#include <string>

namespace scribo {

/// Broad classification used by the command-line front end to pick an exit
/// code and by callers that want to react to a failure class.
enum class ErrorKind {
  kParse,       // malformed input text or binary
  kSchema,      // well-formed but violates a declared structure
  kFormat,      // unsupported or mismatching format
  kIo,          // filesystem failure
  kShape,       // tensor or matrix dimension mismatch
  kMissing,     // referenced entity does not exist
  kDomain,      // argument outside the accepted range
  kState,       // operation invalid for the object's current state
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParse: return "parse error";
    case ErrorKind::kSchema: return "schema error";
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kIo: return "io error";
    case ErrorKind::kShape: return "shape error";
    case ErrorKind::kMissing: return "missing";
    case ErrorKind::kDomain: return "domain error";
    case ErrorKind::kState: return "state error";
  }
  return "error";
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace scribo
