#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace cdvi {

/// 64-bit FNV-1a.
constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;

constexpr std::uint64_t fnv1a(std::span<const std::byte> bytes, std::uint64_t h = kFnvOffset) noexcept {
  for (std::byte b : bytes) {
    h ^= static_cast<std::uint64_t>(b);
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a(std::string_view text, std::uint64_t h = kFnvOffset) noexcept {
  return fnv1a(std::as_bytes(std::span(text.data(), text.size())), h);
}

/// 16 lowercase hex digits.
std::string hex64(std::uint64_t value);

}  // namespace cdvi
