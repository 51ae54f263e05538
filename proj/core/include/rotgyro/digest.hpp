#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <type_traits>

namespace rotgyro {

/// 64-bit FNV-1a accumulator. Used for cache keys and config hashes, where
/// the digest must be stable across runs and platforms.
class Digest {
public:
    Digest& bytes(const void* data, std::size_t size) noexcept {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < size; ++i) {
            state_ ^= p[i];
            state_ *= 0x100000001b3ULL;
        }
        return *this;
    }

    template <class T>
        requires std::is_arithmetic_v<T>
    Digest& add(T value) noexcept {
        if constexpr (std::is_floating_point_v<T>) {
            // +0.0 and -0.0 hash alike
            if (value == T{0}) value = T{0};
        }
        return bytes(&value, sizeof(value));
    }

    Digest& add(std::string_view s) noexcept {
        add<std::uint64_t>(s.size());
        return bytes(s.data(), s.size());
    }

    std::uint64_t value() const noexcept { return state_; }

    std::string hex() const {
        static constexpr char kDigits[] = "0123456789abcdef";
        std::string out(16, '0');
        std::uint64_t v = state_;
        for (int i = 15; i >= 0; --i) {
            out[static_cast<std::size_t>(i)] = kDigits[v & 0xfU];
            v >>= 4;
        }
        return out;
    }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

}  // namespace rotgyro
