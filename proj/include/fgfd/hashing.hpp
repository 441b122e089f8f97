#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace fgfd {

/// Incremental SHA-256, hex-encoded on finish.
class Sha256 {
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    Sha256& update(std::span<const std::byte> bytes);
    Sha256& update(std::string_view text);
    Sha256& update_file(const std::filesystem::path& path);
    std::string hex_digest();

private:
    void* ctx_;
};

std::string sha256_hex(std::string_view text);
std::string sha256_file(const std::filesystem::path& path);

} // namespace fgfd
