#pragma once

#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rotgyro {

inline constexpr const char* kCacheVersion = "v1";

/// Content-addressed binary cache: <root>/<version>/<key>.bin. Entries carry
/// their key and a checksum; anything that fails verification reads as absent.
class Cache {
public:
    explicit Cache(std::filesystem::path root, std::string version = kCacheVersion);

    const std::filesystem::path& root() const noexcept { return root_; }
    const std::string& version() const noexcept { return version_; }
    std::filesystem::path path_for(std::uint64_t key) const;

    std::optional<std::vector<std::byte>> get(std::uint64_t key) const;
    /// Writes atomically (temporary file then rename). Throws on I/O failure.
    void put(std::uint64_t key, std::span<const std::byte> payload) const;

private:
    std::filesystem::path root_;
    std::string version_;
};

/// Little helpers for flat binary payloads (native endianness).
class ByteWriter {
public:
    template <class T>
    void put(const T& value) {
        const auto* p = reinterpret_cast<const std::byte*>(&value);
        buffer_.insert(buffer_.end(), p, p + sizeof(T));
    }
    void put_doubles(const double* data, std::size_t count) {
        const auto* p = reinterpret_cast<const std::byte*>(data);
        buffer_.insert(buffer_.end(), p, p + count * sizeof(double));
    }
    std::vector<std::byte> take() { return std::move(buffer_); }

private:
    std::vector<std::byte> buffer_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::byte> data) : data_(data) {}

    template <class T>
    bool get(T& value) {
        if (data_.size() - pos_ < sizeof(T)) return false;
        std::memcpy(&value, data_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return true;
    }
    bool get_doubles(double* out, std::size_t count) {
        if ((data_.size() - pos_) / sizeof(double) < count) return false;
        std::memcpy(out, data_.data() + pos_, count * sizeof(double));
        pos_ += count * sizeof(double);
        return true;
    }
    bool exhausted() const noexcept { return pos_ == data_.size(); }

private:
    std::span<const std::byte> data_;
    std::size_t pos_ = 0;
};

}  // namespace rotgyro
