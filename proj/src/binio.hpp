/*
 * Copyright 2026 The cig Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Little-endian buffer codecs and atomic file IO for the binary formats.

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "cig/errors.hpp"

namespace cig::detail {

class ByteWriter {
 public:
  void put_u8(std::uint8_t v) { buf_.push_back(v); }
  void put_u16(std::uint16_t v) {
    put_u8(static_cast<std::uint8_t>(v));
    put_u8(static_cast<std::uint8_t>(v >> 8));
  }
  void put_u32(std::uint32_t v) {
    put_u16(static_cast<std::uint16_t>(v));
    put_u16(static_cast<std::uint16_t>(v >> 16));
  }
  void put_u64(std::uint64_t v) {
    put_u32(static_cast<std::uint32_t>(v));
    put_u32(static_cast<std::uint32_t>(v >> 32));
  }
  void put_i32(std::int32_t v) { put_u32(static_cast<std::uint32_t>(v)); }
  void put_f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(bits);
  }
  void put_f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(bits);
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    buf_.insert(buf_.end(), p, p + n);
  }
  void put_string(const std::string& s) {
    put_u32(static_cast<std::uint32_t>(s.size()));
    put_bytes(s.data(), s.size());
  }
  /// Appends the CRC32 (IEEE) of everything written so far.
  void put_crc() {
    const std::uint32_t crc = static_cast<std::uint32_t>(
        ::crc32(0, buf_.data(), static_cast<uInt>(buf_.size())));
    put_u32(crc);
  }

  const std::vector<std::uint8_t>& bytes() const { return buf_; }
  std::size_t size() const { return buf_.size(); }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<std::uint8_t> bytes)
      : buf_(std::move(bytes)) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return buf_.size() - pos_; }

  std::uint8_t get_u8() {
    need(1);
    return buf_[pos_++];
  }
  std::uint16_t get_u16() {
    need(2);
    const std::uint16_t v = static_cast<std::uint16_t>(
        buf_[pos_] | (static_cast<std::uint16_t>(buf_[pos_ + 1]) << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t get_u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | buf_[pos_ + i];
    pos_ += 4;
    return v;
  }
  std::uint64_t get_u64() {
    const std::uint64_t lo = get_u32();
    const std::uint64_t hi = get_u32();
    return lo | (hi << 32);
  }
  std::int32_t get_i32() { return static_cast<std::int32_t>(get_u32()); }
  float get_f32() {
    const std::uint32_t bits = get_u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  double get_f64() {
    const std::uint64_t bits = get_u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string get_string() {
    const std::uint32_t n = get_u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void expect_magic(const char* magic, std::size_t len, const char* what) {
    need_or(len, 0, what);
    if (std::memcmp(buf_.data() + pos_, magic, len) != 0) {
      throw FormatError(std::string(what) + ": bad magic", pos_);
    }
    pos_ += len;
  }
  /// Verifies the trailing CRC32 over all preceding bytes and positions the
  /// reader right after the payload.
  void check_crc(const char* what) {
    if (buf_.size() < pos_ + 4) {
      throw FormatError(std::string(what) + ": truncated before checksum",
                        buf_.size());
    }
    const std::size_t crc_at = buf_.size() - 4;
    const std::uint32_t want = static_cast<std::uint32_t>(
        ::crc32(0, buf_.data(), static_cast<uInt>(crc_at)));
    std::uint32_t got = 0;
    for (int i = 3; i >= 0; --i) got = (got << 8) | buf_[crc_at + i];
    if (want != got) {
      throw FormatError(std::string(what) + ": checksum mismatch", crc_at);
    }
    end_ = crc_at;
  }
  /// After check_crc, the payload must end exactly at the checksum.
  void expect_consumed(const char* what) {
    if (end_ != pos_) {
      throw FormatError(std::string(what) + ": trailing bytes in payload",
                        pos_);
    }
  }

 private:
  void need(std::size_t n) { need_or(n, pos_, "stream"); }
  void need_or(std::size_t n, std::size_t at, const char* what) {
    if (buf_.size() - pos_ < n) {
      throw FormatError(std::string(what) + ": truncated", at ? at : pos_);
    }
  }

  std::vector<std::uint8_t> buf_;
  std::size_t pos_ = 0;
  std::size_t end_ = 0;
};

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

/// Writes bytes to `path` via a temp file in the same directory followed by
/// an atomic rename, so readers never observe a partial file.
inline void atomic_write_file(const std::string& path,
                              const std::vector<std::uint8_t>& bytes) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create file: " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  fs::rename(tmp, target);
}

inline void atomic_write_text(const std::string& path, const std::string& s) {
  std::vector<std::uint8_t> bytes(s.begin(), s.end());
  atomic_write_file(path, bytes);
}

}  // namespace cig::detail
