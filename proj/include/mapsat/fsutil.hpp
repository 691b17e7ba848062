#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mapsat {

/// Whole file contents, or nullopt when it cannot be opened.
std::optional<std::vector<std::uint8_t>> read_file(std::filesystem::path const &path);

std::optional<std::string> read_text_file(std::filesystem::path const &path);

/**
 * Write to a unique temp file next to `path`, fsync it, rename over `path`
 * and fsync the directory. Parent directories are created as needed.
 */
void write_file_atomic(std::filesystem::path const &path,
                       std::span<std::uint8_t const> bytes);

inline void write_file_atomic(std::filesystem::path const &path,
                              std::string_view text)
{
    write_file_atomic(path, std::span<std::uint8_t const>{
                                reinterpret_cast<std::uint8_t const *>(text.data()),
                                text.size()});
}

} // namespace mapsat
