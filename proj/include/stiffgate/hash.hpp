#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace stiffgate {

/// 128-bit FNV-1a digest rendered as 32 lowercase hex characters.
inline std::string fnv1a128_hex(std::string_view data) {
  using u128 = unsigned __int128;
  const u128 prime = (static_cast<u128>(0x0000000001000000ULL) << 64) | 0x000000000000013BULL;
  u128 h = (static_cast<u128>(0x6c62272e07bb0142ULL) << 64) | 0x62b821756295c58dULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= prime;
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(32, '0');
  for (int i = 31; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kHex[static_cast<unsigned>(h & 0xF)];
    h >>= 4;
  }
  return out;
}

}  // namespace stiffgate
