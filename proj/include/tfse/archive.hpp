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

// Named-tensor archive: a text manifest followed by raw little-endian
// IEEE-754 payloads concatenated in manifest order.
//
//   TFSE-ARCHIVE 1
//   entries <n>
//   <name> <f32|f64> <d0,d1,...> <byte offset> <byte length>
//   ...
//   END
//   <payload bytes>
//
// Offsets are relative to the first payload byte.

#ifndef TFSE_ARCHIVE_HPP_
#define TFSE_ARCHIVE_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "tfse/tensor.hpp"

namespace tfse {

enum class Dtype { f32, f64 };

class TensorArchive {
 public:
  struct Entry {
    std::string name;
    Dtype dtype = Dtype::f32;
    Shape shape;
    std::vector<double> values;  // widened copy; narrowed again on save for f32
  };

  template <typename T>
  void put(const std::string& name, const Tensor<T>& t) {
    put(name, t.shape(), std::vector<double>(t.values().begin(), t.values().end()),
        sizeof(T) == 4 ? Dtype::f32 : Dtype::f64);
  }
  void put(const std::string& name, Shape shape, std::vector<double> values, Dtype dtype);

  bool contains(const std::string& name) const;
  const Entry& at(const std::string& name) const;

  template <typename T>
  Tensor<T> get(const std::string& name) const {
    const Entry& e = at(name);
    return Tensor<T>(e.shape, std::vector<T>(e.values.begin(), e.values.end()));
  }

  const std::vector<Entry>& entries() const { return entries_; }

  void save(const std::string& path) const;
  static TensorArchive load(const std::string& path);

 private:
  std::vector<Entry> entries_;
};

}  // namespace tfse

#endif  // TFSE_ARCHIVE_HPP_
