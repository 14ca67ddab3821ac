#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace adpa {

/// Dense row-major matrix used for features, activations and parameters.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using NodeId = std::uint32_t;

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incremental 64-bit FNV-1a hash. Used for fingerprints and file checksums.
class Fnv1a64 {
 public:
  void update(std::span<const std::byte> bytes) {
    for (std::byte b : bytes) {
      state_ ^= static_cast<std::uint64_t>(b);
      state_ *= kPrime;
    }
  }

  template <typename T>
  void update_value(const T& value) {
    static_assert(std::is_trivially_copyable_v<T>);
    update(std::as_bytes(std::span<const T, 1>(&value, 1)));
  }

  std::uint64_t digest() const { return state_; }

 private:
  static constexpr std::uint64_t kOffset = 0xcbf29ce484222325ULL;
  static constexpr std::uint64_t kPrime = 0x100000001b3ULL;
  std::uint64_t state_ = kOffset;
};

inline std::uint64_t fingerprint(const Matrix& x) {
  Fnv1a64 h;
  h.update_value(static_cast<std::uint64_t>(x.rows()));
  h.update_value(static_cast<std::uint64_t>(x.cols()));
  h.update(std::as_bytes(std::span<const double>(x.data(), static_cast<std::size_t>(x.size()))));
  return h.digest();
}

namespace detail {

// Little-endian byte buffer writer. The host is assumed little-endian
// (checked in binary_io users via static_assert).
class ByteWriter {
 public:
  template <typename T>
  void put(const T& value) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const char*>(&value);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }

  void put_bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }

  void put_string(std::string_view s) {
    put(static_cast<std::uint32_t>(s.size()));
    put_bytes(s);
  }

  void put_matrix_data(const Matrix& m) {
    const auto* p = reinterpret_cast<const char*>(m.data());
    buf_.insert(buf_.end(), p, p + sizeof(double) * static_cast<std::size_t>(m.size()));
  }

  /// Appends the FNV-1a checksum of everything written so far.
  void seal() {
    Fnv1a64 h;
    h.update(std::as_bytes(std::span<const char>(buf_)));
    put(h.digest());
  }

  const std::vector<char>& bytes() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const char> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    static_assert(std::is_trivially_copyable_v<T>);
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string get_bytes(std::size_t count) {
    need(count);
    std::string s(bytes_.data() + pos_, count);
    pos_ += count;
    return s;
  }

  std::string get_string() { return get_bytes(get<std::uint32_t>()); }

  void get_matrix_data(Matrix& m) {
    const std::size_t count = sizeof(double) * static_cast<std::size_t>(m.size());
    need(count);
    std::memcpy(m.data(), bytes_.data() + pos_, count);
    pos_ += count;
  }

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t count) const {
    if (count > bytes_.size() - pos_) throw Error("truncated binary payload");
  }

  std::span<const char> bytes_;
  std::size_t pos_ = 0;
};

/// Verifies the trailing checksum and returns the payload without it.
inline std::span<const char> verify_sealed(std::span<const char> bytes, std::string_view what) {
  if (bytes.size() < sizeof(std::uint64_t)) throw Error(std::string(what) + ": file too short");
  const auto payload = bytes.first(bytes.size() - sizeof(std::uint64_t));
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + payload.size(), sizeof stored);
  Fnv1a64 h;
  h.update(std::as_bytes(payload));
  if (h.digest() != stored) throw Error(std::string(what) + ": checksum mismatch");
  return payload;
}

}  // namespace detail
}  // namespace adpa
