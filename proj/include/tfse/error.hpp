// Copyright 2026 The tfse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef TFSE_ERROR_HPP_
#define TFSE_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace tfse {

enum class Errc {
  dimension,   // shape or channel mismatch
  config,      // invalid model/run configuration
  contract,    // violated precondition
  format,      // malformed file
  rate,        // unsupported sample rate
  io,          // file system failure
  numeric,     // NaN/Inf or non-finite parameters
  data,        // empty or unusable corpus
  length,      // signal too short for the requested analysis
  degenerate,  // zero-power input where a power ratio is required
  busy,        // exclusive resource already held
};

const char* errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] void fail(Errc code, const std::string& what);

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace tfse

#endif  // TFSE_ERROR_HPP_
