#include "mapsat/digest.hpp"

#include "mapsat/errors.hpp"

#include <openssl/evp.h>

#include <array>
#include <memory>

namespace mapsat {

std::string sha256_hex(std::span<std::uint8_t const> bytes)
{
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(),
                   nullptr) != 1) {
        throw Error{"SHA-256 computation failed"};
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4U]);
        out.push_back(hex[md[i] & 0xFU]);
    }
    return out;
}

} // namespace mapsat
