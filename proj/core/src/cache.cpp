#include "rotgyro/cache.hpp"

#include <array>
#include <fstream>
#include <system_error>

#include <spdlog/spdlog.h>

#include "rotgyro/common.hpp"
#include "rotgyro/digest.hpp"

namespace rotgyro {

namespace {

constexpr std::array<char, 4> kMagic{'R', 'G', 'C', '1'};

}  // namespace

Cache::Cache(std::filesystem::path root, std::string version) : root_(std::move(root)), version_(std::move(version)) {
    if (version_.empty()) throw InvalidArgument("cache: empty version");
}

std::filesystem::path Cache::path_for(std::uint64_t key) const {
    return root_ / version_ / (Digest{}.add(key).hex() + ".bin");
}

std::optional<std::vector<std::byte>> Cache::get(std::uint64_t key) const {
    const auto path = path_for(key);
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::array<char, 4> magic{};
    std::uint64_t stored_key = 0, size = 0, checksum = 0;
    in.read(magic.data(), magic.size());
    in.read(reinterpret_cast<char*>(&stored_key), sizeof(stored_key));
    in.read(reinterpret_cast<char*>(&size), sizeof(size));
    if (!in || magic != kMagic || stored_key != key || size > (std::uint64_t{1} << 36)) {
        spdlog::warn("cache: ignoring malformed entry {}", path.string());
        return std::nullopt;
    }
    std::vector<std::byte> payload(size);
    in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(size));
    in.read(reinterpret_cast<char*>(&checksum), sizeof(checksum));
    if (!in || in.peek() != std::char_traits<char>::eof() ||
        Digest{}.bytes(payload.data(), payload.size()).value() != checksum) {
        spdlog::warn("cache: ignoring corrupt entry {}", path.string());
        return std::nullopt;
    }
    return payload;
}

void Cache::put(std::uint64_t key, std::span<const std::byte> payload) const {
    const auto path = path_for(key);
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw Error("cache: cannot create " + path.parent_path().string() + ": " + ec.message());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        const std::uint64_t size = payload.size();
        const std::uint64_t checksum = Digest{}.bytes(payload.data(), payload.size()).value();
        out.write(kMagic.data(), kMagic.size());
        out.write(reinterpret_cast<const char*>(&key), sizeof(key));
        out.write(reinterpret_cast<const char*>(&size), sizeof(size));
        out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(size));
        out.write(reinterpret_cast<const char*>(&checksum), sizeof(checksum));
        if (!out) throw Error("cache: write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error("cache: cannot move entry into place: " + ec.message());
}

}  // namespace rotgyro
