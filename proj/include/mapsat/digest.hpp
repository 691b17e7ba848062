#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace mapsat {

/// Lower-case hex SHA-256 of a byte buffer.
std::string sha256_hex(std::span<std::uint8_t const> bytes);

inline std::string sha256_hex(std::string_view text)
{
    return sha256_hex(std::span<std::uint8_t const>{
        reinterpret_cast<std::uint8_t const *>(text.data()), text.size()});
}

} // namespace mapsat
