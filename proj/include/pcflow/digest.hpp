#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace pcflow {

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);

/// 16 lowercase hex digits.
std::string hex64(std::uint64_t v);

}  // namespace pcflow
