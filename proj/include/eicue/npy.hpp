/* Copyright 2026 The eicue Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

// Minimal NPY v1.0 container: C-order arrays of little-endian float32 ("<f4")
// or int32 ("<i4").

#include <bit>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "eicue/error.hpp"

namespace eicue::npy {

inline constexpr char kMagic[] = "\x93NUMPY";
inline constexpr std::size_t kMagicSize = 6;
inline constexpr std::size_t kPreludeSize = 10;  // magic + version + header length

struct Array {
  std::string descr;
  std::vector<std::size_t> shape;
  std::vector<unsigned char> payload;

  std::size_t element_count() const {
    std::size_t n = 1;
    for (auto s : shape) n *= s;
    return n;
  }
};

namespace detail {

class HeaderParser {
 public:
  HeaderParser(std::string_view text, std::size_t base) : text_(text), base_(base) {}

  Array parse() {
    Array out;
    bool have_descr = false, have_order = false, have_shape = false;
    skip_ws();
    expect('{');
    while (true) {
      skip_ws();
      if (peek() == '}') {
        ++pos_;
        break;
      }
      const std::string key = quoted();
      skip_ws();
      expect(':');
      skip_ws();
      if (key == "descr") {
        out.descr = quoted();
        have_descr = true;
      } else if (key == "fortran_order") {
        if (consume("False")) {
        } else if (consume("True")) {
          fail("fortran_order True is not supported");
        } else {
          fail("fortran_order must be True or False");
        }
        have_order = true;
      } else if (key == "shape") {
        out.shape = tuple();
        have_shape = true;
      } else {
        fail("unknown header key '" + key + "'");
      }
      skip_ws();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      skip_ws();
      expect('}');
      break;
    }
    if (!have_descr || !have_order || !have_shape) fail("header misses descr/fortran_order/shape");
    return out;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw FormatError(base_ + pos_, what); }

  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  bool consume(std::string_view word) {
    if (text_.substr(pos_, word.size()) == word) {
      pos_ += word.size();
      return true;
    }
    return false;
  }

  std::string quoted() {
    const char q = peek();
    if (q != '\'' && q != '"') fail("expected quoted string");
    ++pos_;
    const std::size_t start = pos_;
    while (pos_ < text_.size() && text_[pos_] != q) ++pos_;
    if (pos_ >= text_.size()) fail("unterminated string");
    std::string s(text_.substr(start, pos_ - start));
    ++pos_;
    return s;
  }

  std::vector<std::size_t> tuple() {
    std::vector<std::size_t> dims;
    expect('(');
    while (true) {
      skip_ws();
      if (peek() == ')') {
        ++pos_;
        break;
      }
      if (!std::isdigit(static_cast<unsigned char>(peek()))) fail("expected dimension");
      std::size_t v = 0;
      while (std::isdigit(static_cast<unsigned char>(peek()))) {
        v = v * 10 + static_cast<std::size_t>(peek() - '0');
        ++pos_;
      }
      dims.push_back(v);
      skip_ws();
      if (peek() == ',') ++pos_;
    }
    return dims;
  }

  std::string_view text_;
  std::size_t base_;
  std::size_t pos_ = 0;
};

inline std::size_t element_size(const std::string& descr, std::size_t offset) {
  if (descr == "<f4" || descr == "<i4") return 4;
  throw FormatError(offset, "unsupported dtype '" + descr + "' (expected <f4 or <i4)");
}

}  // namespace detail

inline Array parse(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < kPreludeSize) throw FormatError(bytes.size(), "file shorter than NPY prelude");
  if (std::memcmp(bytes.data(), kMagic, kMagicSize) != 0) throw FormatError(0, "bad magic");
  if (bytes[6] != 1 || bytes[7] != 0)
    throw FormatError(6, "unsupported NPY version " + std::to_string(bytes[6]) + "." +
                             std::to_string(bytes[7]));
  const std::size_t header_len = bytes[8] | (std::size_t{bytes[9]} << 8);
  if (bytes.size() < kPreludeSize + header_len)
    throw FormatError(bytes.size(), "truncated header");
  const std::string_view text(reinterpret_cast<const char*>(bytes.data()) + kPreludeSize,
                              header_len);
  Array out = detail::HeaderParser(text, kPreludeSize).parse();
  const std::size_t offset = kPreludeSize + header_len;
  const std::size_t esize = detail::element_size(out.descr, kPreludeSize);
  const std::size_t expect = out.element_count() * esize;
  const std::size_t have = bytes.size() - offset;
  if (have < expect)
    throw FormatError(bytes.size(), "truncated payload: expected " + std::to_string(expect) +
                                        " bytes, found " + std::to_string(have));
  if (have > expect)
    throw FormatError(offset + expect, "payload longer than declared shape");
  out.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(offset), bytes.end());
  return out;
}

inline Array read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return parse(bytes);
}

inline std::vector<unsigned char> serialize(const Array& a) {
  std::string header = "{'descr': '" + a.descr + "', 'fortran_order': False, 'shape': (";
  for (std::size_t i = 0; i < a.shape.size(); ++i) {
    if (i) header += ", ";
    header += std::to_string(a.shape[i]);
  }
  if (a.shape.size() == 1) header += ",";
  header += "), }";
  // Pad with spaces so that the payload starts on a 64-byte boundary.
  const std::size_t unpadded = kPreludeSize + header.size() + 1;
  header.append((64 - unpadded % 64) % 64, ' ');
  header += '\n';
  std::vector<unsigned char> out(kMagic, kMagic + kMagicSize);
  out.push_back(1);
  out.push_back(0);
  out.push_back(static_cast<unsigned char>(header.size() & 0xFF));
  out.push_back(static_cast<unsigned char>(header.size() >> 8));
  out.insert(out.end(), header.begin(), header.end());
  out.insert(out.end(), a.payload.begin(), a.payload.end());
  return out;
}

inline void write(const std::filesystem::path& path, const Array& a) {
  const auto bytes = serialize(a);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

// Little-endian element access for 4- and 8-byte trivially copyable types.
template <typename T>
T load_le(const unsigned char* p) {
  static_assert(sizeof(T) == 4 || sizeof(T) == 8);
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  U u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) u |= U{p[i]} << (8 * i);
  return std::bit_cast<T>(u);
}

template <typename T>
void store_le(unsigned char* p, T value) {
  static_assert(sizeof(T) == 4 || sizeof(T) == 8);
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  const auto u = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) p[i] = static_cast<unsigned char>(u >> (8 * i));
}

}  // namespace eicue::npy
