#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace rotgyro {

/// Single-particle level of the isotropic 2D oscillator: radial quantum
/// number n >= 0 and angular-momentum projection m.
struct Orbital {
    int n = 0;
    int m = 0;

    /// Landau excitation quanta carried by one particle: n + (|m| - m) / 2.
    constexpr int landau_excitation() const noexcept { return n + ((m < 0 ? -m : m) - m) / 2; }
    constexpr int landau_index() const noexcept { return 1 + landau_excitation(); }
    /// Energy in units of the trap frequency, 2n + |m| + 1, at zero rotation.
    constexpr double energy() const noexcept { return 2.0 * n + (m < 0 ? -m : m) + 1.0; }

    friend constexpr bool operator==(const Orbital&, const Orbital&) = default;
};

struct TruncationSpec {
    int n_particles = 1;
    int l_max = 0;
    int n_ll_max = 2;
    bool even_parity = true;

    /// Throws InvalidArgument unless N >= 1, l_max >= 0 and n_ll_max >= 1.
    void validate() const;

    /// Truncation used throughout the protocol: l_max = N + 4, two Landau levels.
    static TruncationSpec standard(int n_particles);

    friend bool operator==(const TruncationSpec&, const TruncationSpec&) = default;
};

/// Sparse occupation-number state: (orbital, count) pairs with count >= 1.
using FockState = std::vector<std::pair<Orbital, int>>;

/// Occupation numbers indexed by the position of each orbital in a basis.
using Occupation = std::vector<std::uint8_t>;

/// Every orbital usable by some Fock state of the truncation, ordered by
/// (landau index, m, n).
std::vector<Orbital> enumerate_orbitals(const TruncationSpec& spec);

int landau_index(const FockState& state);
int total_angular_momentum(const FockState& state);

struct LBlock {
    int l = 0;
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const noexcept { return end - begin; }
};

/// Truncated many-body occupation basis, grouped into contiguous blocks of
/// total angular momentum L (ascending). Inside a block states are ordered
/// lexicographically by occupation vector. Immutable after construction.
class ManyBodyBasis {
public:
    static constexpr std::size_t kDefaultCapacity = 500000;

    explicit ManyBodyBasis(const TruncationSpec& spec, std::size_t capacity = kDefaultCapacity);

    // the lookup index holds views into the occupation table
    ManyBodyBasis(const ManyBodyBasis&) = delete;
    ManyBodyBasis& operator=(const ManyBodyBasis&) = delete;
    ManyBodyBasis(ManyBodyBasis&&) noexcept = default;
    ManyBodyBasis& operator=(ManyBodyBasis&&) noexcept = default;

    const TruncationSpec& spec() const noexcept { return spec_; }
    std::size_t dimension() const noexcept { return l_values_.size(); }
    std::size_t n_orbitals() const noexcept { return orbitals_.size(); }
    const std::vector<Orbital>& orbitals() const noexcept { return orbitals_; }
    const std::vector<LBlock>& blocks() const noexcept { return blocks_; }

    std::span<const std::uint8_t> occupation(std::size_t index) const {
        return {occupations_.data() + index * orbitals_.size(), orbitals_.size()};
    }
    int angular_momentum(std::size_t index) const { return l_values_[index]; }
    const std::vector<int>& angular_momenta() const noexcept { return l_values_; }
    int landau_index(std::size_t index) const;

    std::optional<std::size_t> orbital_index(const Orbital& orb) const;

    std::optional<std::size_t> lookup(std::span<const std::uint8_t> occupation) const;
    std::optional<std::size_t> lookup(const FockState& state) const;

    FockState state(std::size_t index) const;

    /// Block holding total angular momentum l, if present.
    const LBlock* block(int l) const;

    /// One line per state: "L n_LL [n,m:count ...]".
    void dump(std::ostream& out) const;
    std::string dump() const;

    /// Stable 64-bit digest of the truncation (used for cache keys).
    std::uint64_t digest() const;

private:
    TruncationSpec spec_;
    std::vector<Orbital> orbitals_;
    std::vector<std::uint8_t> occupations_;
    std::vector<int> l_values_;
    std::vector<LBlock> blocks_;
    std::unordered_map<std::string_view, std::size_t> index_;
};

}  // namespace rotgyro
