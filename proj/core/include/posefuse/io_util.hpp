#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace posefuse {

/// Throws DataError when the file cannot be read.
std::string read_text_file(const std::string& path);
std::vector<std::uint8_t> read_binary_file(const std::string& path);

/// Writes to `path + ".tmp"` and renames over `path`, so readers never see a
/// partially written file.
void write_text_file_atomic(const std::string& path, const std::string& text);
void write_binary_file_atomic(const std::string& path,
                              std::span<const std::uint8_t> bytes);

}  // namespace posefuse
