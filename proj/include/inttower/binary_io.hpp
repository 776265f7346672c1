#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

#include "inttower/errors.hpp"

// Little-endian encoding helpers for the on-disk formats.
namespace inttower::binary {

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

template <typename T>
void put(std::string& out, T value) {
  value = to_little(value);
  char b[sizeof(T)];
  std::memcpy(b, &value, sizeof(T));
  out.append(b, sizeof(T));
}

inline void put_bytes(std::string& out, std::string_view bytes) { out.append(bytes); }

class Reader {
 public:
  Reader(const char* data, std::size_t size, std::string what) : data_(data), size_(size), what_(std::move(what)) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_ + pos_, sizeof(T));
    pos_ += sizeof(T);
    return to_little(v);
  }

  std::string_view bytes(std::size_t n) {
    need(n);
    std::string_view v(data_ + pos_, n);
    pos_ += n;
    return v;
  }

  std::size_t position() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return size_ - pos_; }

 private:
  void need(std::size_t n) const {
    if (n > size_ - pos_) throw FormatError(what_ + " is truncated at byte " + std::to_string(pos_));
  }

  const char* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
  std::string what_;
};

}  // namespace inttower::binary
