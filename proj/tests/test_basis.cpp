#include <doctest.h>

#include <algorithm>
#include <set>

#include "oracles.hpp"
#include "rotgyro/basis.hpp"

using namespace rotgyro;

namespace {

std::set<std::pair<int, int>> as_set(const std::vector<Orbital>& orbs) {
    std::set<std::pair<int, int>> out;
    for (const auto& o : orbs) out.insert({o.n, o.m});
    return out;
}

}  // namespace

TEST_CASE("lowest Landau level orbitals for two particles") {
    const auto orbs = enumerate_orbitals({2, 2, 1, true});
    CHECK(as_set(orbs) == std::set<std::pair<int, int>>{{0, 0}, {0, 1}, {0, 2}});
}

TEST_CASE("second Landau level adds one excitation quantum") {
    const auto orbs = enumerate_orbitals({2, 2, 2, true});
    CHECK(as_set(orbs) == std::set<std::pair<int, int>>{{0, 0}, {0, 1}, {0, 2}, {0, -1}, {1, 0}, {1, 1}, {1, 2}});
    // ordered by (landau index, m, n)
    for (std::size_t i = 1; i < orbs.size(); ++i) {
        const auto key = [](const Orbital& o) { return std::tuple(o.landau_index(), o.m, o.n); };
        CHECK(key(orbs[i - 1]) < key(orbs[i]));
    }
}

TEST_CASE("landau index of Fock states") {
    CHECK(landau_index(FockState{{{0, 0}, 3}, {{0, 2}, 1}}) == 1);
    CHECK(landau_index(FockState{{{0, -1}, 1}, {{0, 1}, 2}}) == 2);
    CHECK(landau_index(FockState{{{1, 2}, 1}, {{0, 0}, 1}}) == 2);
    CHECK(landau_index(FockState{{{1, 0}, 2}}) == 3);
    CHECK(total_angular_momentum(FockState{{{0, -1}, 1}, {{0, 3}, 2}}) == 5);
}

TEST_CASE("two particles in the lowest Landau level up to L = 2") {
    const ManyBodyBasis basis({2, 2, 1, true});
    REQUIRE(basis.dimension() == 3);
    REQUIRE(basis.blocks().size() == 2);
    CHECK(basis.blocks()[0].l == 0);
    CHECK(basis.blocks()[0].size() == 1);
    CHECK(basis.blocks()[1].l == 2);
    CHECK(basis.blocks()[1].size() == 2);
    CHECK(basis.lookup(FockState{{{0, 0}, 2}}).value() == 0);
    CHECK(basis.lookup(FockState{{{0, 1}, 2}}).has_value());
    CHECK(basis.lookup(FockState{{{0, 0}, 1}, {{0, 2}, 1}}).has_value());
}

TEST_CASE("single particle, l_max = 0") {
    const ManyBodyBasis basis({1, 0, 1, true});
    REQUIRE(basis.dimension() == 1);
    CHECK(basis.state(0) == FockState{{{0, 0}, 1}});
}

TEST_CASE("block sizes match brute-force enumeration") {
    for (int n = 1; n <= 6; ++n) {
        for (int l_max = 0; l_max <= 10; ++l_max) {
            for (int nll = 1; nll <= 2; ++nll) {
                for (bool parity : {true, false}) {
                    const TruncationSpec spec{n, l_max, nll, parity};
                    const ManyBodyBasis basis(spec);
                    std::map<int, std::size_t> lib;
                    for (const auto& b : basis.blocks()) lib[b.l] = b.size();
                    INFO("N=" << n << " l_max=" << l_max << " nll=" << nll << " parity=" << parity);
                    CHECK(lib == oracle::brute_force_block_sizes(spec));
                }
            }
        }
    }
}

TEST_CASE("twelve-particle protocol truncation matches the enumeration") {
    const auto spec = TruncationSpec::standard(12);
    CHECK(spec.l_max == 16);
    CHECK(spec.n_ll_max == 2);
    const ManyBodyBasis basis(spec);
    std::size_t expected = 0;
    for (const auto& [l, count] : oracle::brute_force_block_sizes(spec)) expected += count;
    CHECK(basis.dimension() == expected);
    CHECK(basis.dimension() == 3088);
}

TEST_CASE("lookup is a bijection and blocks are consistent") {
    const ManyBodyBasis basis(TruncationSpec::standard(6));
    std::size_t total = 0;
    for (const auto& b : basis.blocks()) {
        total += b.size();
        for (std::size_t i = b.begin; i < b.end; ++i) {
            CHECK(basis.angular_momentum(i) == b.l);
            CHECK(total_angular_momentum(basis.state(i)) == b.l);
            CHECK(basis.landau_index(i) <= 2);
            CHECK(basis.lookup(basis.state(i)).value() == i);
            CHECK(basis.lookup(basis.occupation(i)).value() == i);
        }
    }
    CHECK(total == basis.dimension());
    CHECK(basis.block(6) != nullptr);
    CHECK(basis.block(5) == nullptr);
}

TEST_CASE("states outside the truncation are absent") {
    const ManyBodyBasis basis(TruncationSpec::standard(2));
    CHECK_FALSE(basis.lookup(FockState{{{0, 0}, 1}, {{0, 1}, 1}}).has_value());   // odd L
    CHECK_FALSE(basis.lookup(FockState{{{0, -1}, 1}, {{1, 1}, 1}}).has_value());  // landau index 3
    CHECK_FALSE(basis.lookup(FockState{{{0, 0}, 1}}).has_value());                // wrong particle number
}

TEST_CASE("construction is deterministic and the dump is line per state") {
    const ManyBodyBasis a(TruncationSpec::standard(4)), b(TruncationSpec::standard(4));
    CHECK(a.dump() == b.dump());
    CHECK(a.digest() == b.digest());
    CHECK(a.digest() != ManyBodyBasis(TruncationSpec::standard(6)).digest());
    const ManyBodyBasis two({2, 2, 1, true});
    CHECK(two.dump() == "0 1 [0,0:2]\n2 1 [0,1:2]\n2 1 [0,0:1 0,2:1]\n");
}

TEST_CASE("invalid truncations and the capacity limit") {
    CHECK_THROWS_AS(ManyBodyBasis({0, 2, 1, true}), InvalidArgument);
    CHECK_THROWS_AS(ManyBodyBasis({2, -1, 1, true}), InvalidArgument);
    CHECK_THROWS_AS(ManyBodyBasis({2, 2, 0, true}), InvalidArgument);
    CHECK_THROWS_AS(ManyBodyBasis(TruncationSpec::standard(12), 100), CapacityError);
}
