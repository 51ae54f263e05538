#include "rotgyro/basis.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <sstream>

#include "rotgyro/common.hpp"
#include "rotgyro/digest.hpp"

namespace rotgyro {

void TruncationSpec::validate() const {
    if (n_particles < 1) throw InvalidArgument("truncation: n_particles must be >= 1");
    if (l_max < 0) throw InvalidArgument("truncation: l_max must be >= 0");
    if (n_ll_max < 1) throw InvalidArgument("truncation: n_ll_max must be >= 1");
    if (n_particles > 255) throw InvalidArgument("truncation: n_particles must fit in 8 bits");
}

TruncationSpec TruncationSpec::standard(int n_particles) {
    return TruncationSpec{n_particles, n_particles + 4, 2, true};
}

std::vector<Orbital> enumerate_orbitals(const TruncationSpec& spec) {
    spec.validate();
    std::vector<Orbital> out;
    const int max_excitation = spec.n_ll_max - 1;
    for (int n = 0; n <= max_excitation; ++n) {
        // m < 0 costs |m| excitation quanta on top of n
        for (int m = -(max_excitation - n); m <= spec.l_max; ++m) {
            out.push_back({n, m});
        }
    }
    std::sort(out.begin(), out.end(), [](const Orbital& a, const Orbital& b) {
        if (a.landau_index() != b.landau_index()) return a.landau_index() < b.landau_index();
        if (a.m != b.m) return a.m < b.m;
        return a.n < b.n;
    });
    return out;
}

int landau_index(const FockState& state) {
    int idx = 1;
    for (const auto& [orb, count] : state) idx += orb.landau_excitation() * count;
    return idx;
}

int total_angular_momentum(const FockState& state) {
    int l = 0;
    for (const auto& [orb, count] : state) l += orb.m * count;
    return l;
}

namespace {

struct Generator {
    const TruncationSpec& spec;
    const std::vector<Orbital>& orbitals;
    std::vector<std::size_t> lll;      // orbital positions of (0, m >= 0), indexed by m
    std::vector<std::size_t> excited;  // orbital positions with nonzero excitation
    std::size_t capacity;
    std::vector<Occupation> states;

    void push(const Occupation& occ) {
        if (states.size() >= capacity) {
            throw CapacityError("basis dimension exceeds capacity limit of " + std::to_string(capacity));
        }
        states.push_back(occ);
    }

    // Partitions of `remaining_l` into at most `particles` parts, each part
    // bounded by `max_part`, placed on LLL orbitals; leftover particles sit in m = 0.
    void partitions(Occupation& occ, int particles, int remaining_l, int max_part) {
        if (remaining_l == 0) {
            occ[lll[0]] = static_cast<std::uint8_t>(occ[lll[0]] + particles);
            push(occ);
            occ[lll[0]] = static_cast<std::uint8_t>(occ[lll[0]] - particles);
            return;
        }
        if (particles == 0) return;
        for (int part = std::min(max_part, remaining_l); part >= 1; --part) {
            // remaining_l must be reachable with `particles` parts of size <= part
            if (part * particles < remaining_l) break;
            ++occ[lll[static_cast<std::size_t>(part)]];
            partitions(occ, particles - 1, remaining_l - part, part);
            --occ[lll[static_cast<std::size_t>(part)]];
        }
    }

    void excited_sets(Occupation& occ, std::size_t from, int particles_left, int excitation_left,
                      int l_excited) {
        // Close the excited multiset here and fill the LLL part for every target L.
        for (int l = 0; l <= spec.l_max; ++l) {
            if (spec.even_parity && (l % 2) != 0) continue;
            const int lll_l = l - l_excited;
            if (lll_l < 0) continue;
            partitions(occ, particles_left, lll_l, spec.l_max);
        }
        for (std::size_t e = from; e < excited.size(); ++e) {
            const Orbital& orb = orbitals[excited[e]];
            const int cost = orb.landau_excitation();
            if (cost > excitation_left || particles_left == 0) continue;
            ++occ[excited[e]];
            excited_sets(occ, e, particles_left - 1, excitation_left - cost, l_excited + orb.m);
            --occ[excited[e]];
        }
    }
};

}  // namespace

ManyBodyBasis::ManyBodyBasis(const TruncationSpec& spec, std::size_t capacity)
    : spec_(spec), orbitals_(enumerate_orbitals(spec)) {
    Generator gen{spec_, orbitals_, {}, {}, capacity, {}};
    gen.lll.resize(static_cast<std::size_t>(spec_.l_max) + 1);
    for (std::size_t i = 0; i < orbitals_.size(); ++i) {
        const Orbital& o = orbitals_[i];
        if (o.landau_excitation() == 0) {
            gen.lll[static_cast<std::size_t>(o.m)] = i;
        } else {
            gen.excited.push_back(i);
        }
    }
    Occupation scratch(orbitals_.size(), 0);
    gen.excited_sets(scratch, 0, spec_.n_particles, spec_.n_ll_max - 1, 0);

    auto l_of = [&](const Occupation& occ) {
        int l = 0;
        for (std::size_t k = 0; k < occ.size(); ++k) l += orbitals_[k].m * occ[k];
        return l;
    };
    std::vector<std::pair<int, Occupation>> keyed;
    keyed.reserve(gen.states.size());
    for (auto& occ : gen.states) keyed.emplace_back(l_of(occ), std::move(occ));
    std::sort(keyed.begin(), keyed.end());

    const std::size_t k = orbitals_.size();
    occupations_.reserve(keyed.size() * k);
    l_values_.reserve(keyed.size());
    index_.reserve(keyed.size());
    for (std::size_t i = 0; i < keyed.size(); ++i) {
        const auto& [l, occ] = keyed[i];
        occupations_.insert(occupations_.end(), occ.begin(), occ.end());
        l_values_.push_back(l);
        if (blocks_.empty() || blocks_.back().l != l) blocks_.push_back({l, i, i});
        blocks_.back().end = i + 1;
    }
    const auto* base = reinterpret_cast<const char*>(occupations_.data());
    for (std::size_t i = 0; i < l_values_.size(); ++i) {
        index_.emplace(std::string_view(base + i * k, k), i);
    }
}

int ManyBodyBasis::landau_index(std::size_t index) const {
    const auto occ = occupation(index);
    int idx = 1;
    for (std::size_t k = 0; k < occ.size(); ++k) idx += orbitals_[k].landau_excitation() * occ[k];
    return idx;
}

std::optional<std::size_t> ManyBodyBasis::orbital_index(const Orbital& orb) const {
    const auto it = std::find(orbitals_.begin(), orbitals_.end(), orb);
    if (it == orbitals_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - orbitals_.begin());
}

std::optional<std::size_t> ManyBodyBasis::lookup(std::span<const std::uint8_t> occupation) const {
    if (occupation.size() != orbitals_.size()) return std::nullopt;
    const auto it = index_.find(
        std::string_view(reinterpret_cast<const char*>(occupation.data()), occupation.size()));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::size_t> ManyBodyBasis::lookup(const FockState& state) const {
    Occupation occ(orbitals_.size(), 0);
    for (const auto& [orb, count] : state) {
        if (count <= 0) continue;
        const auto k = orbital_index(orb);
        if (!k) return std::nullopt;
        const int total = occ[*k] + count;
        if (total > 255) return std::nullopt;
        occ[*k] = static_cast<std::uint8_t>(total);
    }
    return lookup(occ);
}

FockState ManyBodyBasis::state(std::size_t index) const {
    FockState out;
    const auto occ = occupation(index);
    for (std::size_t k = 0; k < occ.size(); ++k) {
        if (occ[k] > 0) out.emplace_back(orbitals_[k], occ[k]);
    }
    return out;
}

const LBlock* ManyBodyBasis::block(int l) const {
    for (const auto& b : blocks_) {
        if (b.l == l) return &b;
    }
    return nullptr;
}

void ManyBodyBasis::dump(std::ostream& out) const {
    for (std::size_t i = 0; i < dimension(); ++i) {
        out << l_values_[i] << ' ' << landau_index(i) << " [";
        bool first = true;
        for (const auto& [orb, count] : state(i)) {
            if (!first) out << ' ';
            first = false;
            out << orb.n << ',' << orb.m << ':' << count;
        }
        out << "]\n";
    }
}

std::string ManyBodyBasis::dump() const {
    std::ostringstream os;
    dump(os);
    return os.str();
}

std::uint64_t ManyBodyBasis::digest() const {
    return Digest{}
        .add(std::string_view("basis-v1"))
        .add(spec_.n_particles)
        .add(spec_.l_max)
        .add(spec_.n_ll_max)
        .add(static_cast<int>(spec_.even_parity))
        .value();
}

}  // namespace rotgyro
