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

#include "tfse/error.hpp"

namespace tfse {

const char* errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::dimension: return "dimension error";
    case Errc::config: return "config error";
    case Errc::contract: return "contract error";
    case Errc::format: return "format error";
    case Errc::rate: return "rate error";
    case Errc::io: return "io error";
    case Errc::numeric: return "numeric error";
    case Errc::data: return "data error";
    case Errc::length: return "length error";
    case Errc::degenerate: return "degenerate-input error";
    case Errc::busy: return "busy";
  }
  return "error";
}

void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace tfse
