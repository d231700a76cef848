// textio.hpp: Number formatting and content hashing used by reports and caches

#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace sb {

// 17 significant digits, '.' decimal point, round-trips every double.
std::string fmt17(double x);

// 64-bit FNV-1a, rendered as 16 lowercase hex digits.
std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t h);
inline std::string content_hash(std::string_view data) { return hex64(fnv1a64(data)); }

// Write to `path` via a temporary sibling and rename, so readers never see a
// partially written file.
void write_file_atomic(const std::string& path, std::string_view contents);
std::string read_file(const std::string& path);

inline constexpr std::string_view kToolVersion = "0.3.0";

} // namespace sb
