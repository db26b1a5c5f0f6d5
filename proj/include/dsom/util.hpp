#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <functional>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>

namespace dsom {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

/// FNV-1a, 64 bit. Used for content fingerprints, not security.
class Fnv1a {
 public:
  void update(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001b3ULL;
    }
  }
  void update(std::string_view s) { update(s.data(), s.size()); }
  template <typename T>
    requires std::is_arithmetic_v<T>
  void update_value(T v) {
    update(&v, sizeof(v));
  }
  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string hex64(std::uint64_t v);

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename T>
  requires std::is_arithmetic_v<T>
void write_le(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

/// Returns false on short read.
template <typename T>
  requires std::is_arithmetic_v<T>
bool read_le(std::istream& is, T& v) {
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  return static_cast<std::size_t>(is.gcount()) == sizeof(v);
}

/// Worker count from DSOM_THREADS (default 1).
unsigned thread_count();

/// Runs body(i) for i in [0, n) split into contiguous chunks across
/// thread_count() workers. body must only write to slots owned by i.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace dsom
