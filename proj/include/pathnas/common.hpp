/*
 * Copyright 2026 The pathnas Authors.
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

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <iterator>
#include <type_traits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <zlib.h>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace pathnas {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file; carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class VocabularyError : public Error {
 public:
  using Error::Error;
};

class PartitionError : public Error {
 public:
  using Error::Error;
};

/// Checksum, magic, seed or header mismatch in a persisted artifact.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value produced or consumed by a numeric operation.
class NumericFault : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Seeds and random numbers. Distributions are implemented here rather than
// taken from <random> so sampled streams are identical across standard
// libraries.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent seed from (seed, label).
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(seed ^ splitmix64(h));
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view label,
                                 std::uint64_t index) {
  return splitmix64(derive_seed(seed, label) + splitmix64(index));
}

using Rng = std::mt19937_64;

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

/// Uniform integer in [0, n).
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) %
         n;
}

/// Inverse-CDF draw from unnormalized nonnegative weights.
inline std::size_t sample_categorical(Rng& rng, std::span<const double> probs) {
  double total = 0.0;
  for (double p : probs) total += p;
  double u = uniform01(rng) * total;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (u < probs[i]) return i;
    u -= probs[i];
  }
  // Rounding can leave u marginally above the last bucket.
  for (std::size_t i = probs.size(); i-- > 0;)
    if (probs[i] > 0.0) return i;
  return probs.size() - 1;
}

template <class It>
void shuffle(It first, It last, Rng& rng) {
  const auto n = static_cast<std::size_t>(last - first);
  for (std::size_t i = n; i > 1; --i) {
    std::size_t j = uniform_index(rng, i);
    std::swap(first[i - 1], first[j]);
  }
}

inline std::string rng_state(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

inline void set_rng_state(Rng& rng, const std::string& state) {
  std::istringstream is(state);
  is >> rng;
  if (!is) throw IntegrityError("corrupt RNG state");
}

// ---------------------------------------------------------------------------
// Little binary writer/reader used by the corpus and checkpoint formats. The
// writer accumulates into memory so a CRC32 trailer can cover the payload.

class BinaryWriter {
 public:
  template <class T>
  void put(const T& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }
  template <class T>
  void put_span(std::span<const T> v) {
    const auto* p = reinterpret_cast<const char*>(v.data());
    buf_.insert(buf_.end(), p, p + v.size_bytes());
  }
  void put_string(std::string_view s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    buf_.insert(buf_.end(), s.begin(), s.end());
  }
  /// Appends the CRC32 of everything written so far and writes to `os`.
  void finish(std::ostream& os) {
    std::uint32_t crc = crc32(0L, reinterpret_cast<const Bytef*>(buf_.data()),
                              static_cast<uInt>(buf_.size()));
    put(crc);
    os.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    if (!os) throw Error("write failed");
  }

 private:
  std::vector<char> buf_;
};

class BinaryReader {
 public:
  /// Reads the whole stream and verifies the CRC32 trailer.
  explicit BinaryReader(std::istream& is)
      : buf_(std::istreambuf_iterator<char>(is), {}) {
    if (buf_.size() < sizeof(std::uint32_t))
      throw IntegrityError("truncated file");
    std::uint32_t stored;
    std::memcpy(&stored, buf_.data() + buf_.size() - sizeof(stored),
                sizeof(stored));
    buf_.resize(buf_.size() - sizeof(stored));
    std::uint32_t crc = crc32(0L, reinterpret_cast<const Bytef*>(buf_.data()),
                              static_cast<uInt>(buf_.size()));
    if (crc != stored) throw IntegrityError("checksum mismatch");
  }
  template <class T>
  T get() {
    T v;
    need(sizeof(T));
    std::memcpy(&v, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  template <class T>
  void get_span(std::span<T> out) {
    need(out.size_bytes());
    std::memcpy(out.data(), buf_.data() + pos_, out.size_bytes());
    pos_ += out.size_bytes();
  }
  std::string get_string() {
    auto n = get<std::uint32_t>();
    need(n);
    std::string s(buf_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > buf_.size()) throw IntegrityError("truncated payload");
  }
  std::vector<char> buf_;
  std::size_t pos_ = 0;
};

/// Keeps large per-step scratch buffers on the heap between training steps.
/// Call once at program start; a no-op outside glibc.
inline void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 64 << 20);
#endif
}

}  // namespace pathnas
