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

#ifndef TFSE_TESTS_TEST_UTIL_HPP_
#define TFSE_TESTS_TEST_UTIL_HPP_

#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "tfse/error.hpp"
#include "tfse/tensor.hpp"

// Asserts that `expr` throws tfse::Error with the given code.
#define CHECK_ERRC(expr, errc)                                  \
  do {                                                          \
    bool tfse_thrown_ = false;                                  \
    try {                                                       \
      (void)(expr);                                             \
    } catch (const tfse::Error& tfse_e_) {                      \
      tfse_thrown_ = true;                                      \
      CHECK_MESSAGE(tfse_e_.code() == (errc), tfse_e_.what());  \
    }                                                           \
    CHECK_MESSAGE(tfse_thrown_, "expected tfse::Error from " #expr); \
  } while (0)

namespace testutil {

template <typename T>
std::vector<double> to_vec(const tfse::Tensor<T>& t) {
  return std::vector<double>(t.values().begin(), t.values().end());
}

template <typename T>
tfse::Tensor<T> tensor(tfse::Shape shape, const std::vector<double>& v) {
  return tfse::Tensor<T>(std::move(shape), std::vector<T>(v.begin(), v.end()));
}

// Fresh scratch directory under the system temp directory.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto base = std::filesystem::temp_directory_path() / "tfse-tests";
  const auto p = base / (name + "-" + std::to_string(std::random_device{}()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testutil

#endif  // TFSE_TESTS_TEST_UTIL_HPP_
