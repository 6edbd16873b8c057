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

#include "tfse/archive.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace tfse {

namespace {

template <typename U>
void append_le(std::string& out, U bits) {
  for (std::size_t b = 0; b < sizeof(U); ++b)
    out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
}

template <typename U>
U read_le(const unsigned char* p) {
  U v = 0;
  for (std::size_t b = 0; b < sizeof(U); ++b) v |= static_cast<U>(p[b]) << (8 * b);
  return v;
}

const char* dtype_name(Dtype d) { return d == Dtype::f32 ? "f32" : "f64"; }
std::size_t dtype_size(Dtype d) { return d == Dtype::f32 ? 4 : 8; }

Shape parse_shape(const std::string& s) {
  Shape shape;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    require(!tok.empty() && tok.find_first_not_of("0123456789") == std::string::npos,
            Errc::format, "archive: bad shape '" + s + "'");
    shape.push_back(std::stoull(tok));
  }
  require(!shape.empty(), Errc::format, "archive: empty shape");
  return shape;
}

}  // namespace

void TensorArchive::put(const std::string& name, Shape shape, std::vector<double> values,
                        Dtype dtype) {
  require(!name.empty() && name.find_first_of(" \t\n") == std::string::npos, Errc::contract,
          "archive entry names must be non-empty without whitespace");
  require(numel(shape) == values.size(), Errc::dimension, "archive: shape/data mismatch for " + name);
  for (auto& e : entries_) {
    if (e.name == name) {
      e = Entry{name, dtype, std::move(shape), std::move(values)};
      return;
    }
  }
  entries_.push_back(Entry{name, dtype, std::move(shape), std::move(values)});
}

bool TensorArchive::contains(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return true;
  return false;
}

const TensorArchive::Entry& TensorArchive::at(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e;
  fail(Errc::format, "archive has no entry '" + name + "'");
}

void TensorArchive::save(const std::string& path) const {
  std::ostringstream head;
  head << "TFSE-ARCHIVE 1\nentries " << entries_.size() << "\n";
  std::string payload;
  for (const auto& e : entries_) {
    const std::size_t offset = payload.size();
    for (double v : e.values) {
      if (e.dtype == Dtype::f32)
        append_le(payload, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      else
        append_le(payload, std::bit_cast<std::uint64_t>(v));
    }
    head << e.name << ' ' << dtype_name(e.dtype) << ' ';
    for (std::size_t i = 0; i < e.shape.size(); ++i) head << (i ? "," : "") << e.shape[i];
    head << ' ' << offset << ' ' << payload.size() - offset << '\n';
  }
  head << "END\n";
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(os), Errc::io, "cannot write archive " + path);
  const std::string h = head.str();
  os.write(h.data(), static_cast<std::streamsize>(h.size()));
  os.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  require(static_cast<bool>(os), Errc::io, "short write on archive " + path);
}

TensorArchive TensorArchive::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), Errc::io, "cannot open archive " + path);
  std::string line;
  require(std::getline(is, line) && line == "TFSE-ARCHIVE 1", Errc::format,
          "not a tensor archive: " + path);
  std::size_t count = 0;
  {
    require(static_cast<bool>(std::getline(is, line)), Errc::format, "archive truncated");
    std::istringstream ls(line);
    std::string key;
    require((ls >> key >> count) && key == "entries", Errc::format, "archive: bad entry count");
  }
  struct Pending {
    std::string name;
    Dtype dtype;
    Shape shape;
    std::size_t offset, length;
  };
  std::vector<Pending> pending;
  for (std::size_t i = 0; i < count; ++i) {
    require(static_cast<bool>(std::getline(is, line)), Errc::format, "archive manifest truncated");
    std::istringstream ls(line);
    std::string name, dtype, shape;
    std::size_t offset = 0, length = 0;
    require(static_cast<bool>(ls >> name >> dtype >> shape >> offset >> length), Errc::format,
            "archive: malformed manifest line '" + line + "'");
    require(dtype == "f32" || dtype == "f64", Errc::format, "archive: unknown dtype " + dtype);
    pending.push_back({name, dtype == "f32" ? Dtype::f32 : Dtype::f64, parse_shape(shape), offset,
                       length});
  }
  require(std::getline(is, line) && line == "END", Errc::format, "archive: missing END marker");
  std::string payload((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());

  TensorArchive ar;
  for (auto& p : pending) {
    const std::size_t width = dtype_size(p.dtype);
    const std::size_t n = numel(p.shape);
    require(p.length == n * width && p.offset + p.length <= payload.size(), Errc::format,
            "archive: payload bounds wrong for " + p.name);
    std::vector<double> values(n);
    const auto* base = reinterpret_cast<const unsigned char*>(payload.data()) + p.offset;
    for (std::size_t j = 0; j < n; ++j) {
      if (p.dtype == Dtype::f32)
        values[j] = std::bit_cast<float>(read_le<std::uint32_t>(base + 4 * j));
      else
        values[j] = std::bit_cast<double>(read_le<std::uint64_t>(base + 8 * j));
    }
    ar.put(p.name, p.shape, std::move(values), p.dtype);
  }
  return ar;
}

}  // namespace tfse
