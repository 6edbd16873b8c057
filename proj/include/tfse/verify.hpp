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

// Self-verification suite: gradient checks, scan and stabilizer oracles,
// causality sweeps and DSP identities, runnable from the CLI.

#ifndef TFSE_VERIFY_HPP_
#define TFSE_VERIFY_HPP_

#include <functional>
#include <string>
#include <vector>

namespace tfse {

struct VerifyCheck {
  std::string name;
  bool passed = false;
  double value = 0;      // measured quantity
  double threshold = 0;  // bound it was compared against
  std::string detail;
};

struct VerifyOptions {
  // Substitutes an op with a deliberately wrong backward rule into the
  // gradient checks; the suite must then fail.
  bool inject_fault = false;
  std::function<void(const VerifyCheck&)> on_check;
};

struct VerifyReport {
  std::vector<VerifyCheck> checks;
  bool passed() const;
};

VerifyReport run_verify(const VerifyOptions& opts = {});

}  // namespace tfse

#endif  // TFSE_VERIFY_HPP_
