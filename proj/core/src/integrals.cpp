#include "rotgyro/integrals.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>

#include "rotgyro/common.hpp"
#include "rotgyro/digest.hpp"

namespace rotgyro {

namespace {

double generalized_laguerre(int n, double alpha, double x) {
    if (n == 0) return 1.0;
    double prev = 1.0;
    double cur = 1.0 + alpha - x;
    for (int k = 1; k < n; ++k) {
        const double next = ((2.0 * k + 1.0 + alpha - x) * cur - (k + alpha) * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    return cur;
}

int abs_m(const Orbital& o) { return o.m < 0 ? -o.m : o.m; }

}  // namespace

double orbital_radial(const Orbital& orb, double u) {
    const int am = abs_m(orb);
    const double log_norm = 0.5 * (std::log(2.0) + std::lgamma(orb.n + 1.0) - std::lgamma(orb.n + am + 1.0));
    const double power = am == 0 ? 1.0 : std::pow(u, 0.5 * am);
    return std::exp(log_norm) * power * generalized_laguerre(orb.n, am, u);
}

double lll_contact_integral(int m1, int m2, int m3, int m4) {
    if (m1 < 0 || m2 < 0 || m3 < 0 || m4 < 0) throw InvalidArgument("lll_contact_integral: m must be >= 0");
    if (m1 + m2 != m3 + m4) return 0.0;
    const int total = m1 + m2;
    const double log_value = std::lgamma(total + 1.0) - total * std::log(2.0) -
                             0.5 * (std::lgamma(m1 + 1.0) + std::lgamma(m2 + 1.0) +
                                    std::lgamma(m3 + 1.0) + std::lgamma(m4 + 1.0));
    return std::exp(log_value) / (2.0 * std::numbers::pi);
}

OrbitalIntegrals::OrbitalIntegrals(int quadrature_order)
    : order_(quadrature_order), rule_(gauss_laguerre(quadrature_order)) {}

int OrbitalIntegrals::required_order(std::span<const Orbital> orbitals) {
    int max_twice_degree = 0;  // 2 * (n + |m|/2) per orbital
    for (const auto& o : orbitals) max_twice_degree = std::max(max_twice_degree, 2 * o.n + abs_m(o));
    const int degree = 2 * max_twice_degree;  // four orbitals: sum of (n + |m|/2)
    return degree / 2 + 2;
}

double OrbitalIntegrals::contact(const Orbital& k1, const Orbital& k2, const Orbital& k3,
                                 const Orbital& k4) const {
    if (k1.m + k2.m != k3.m + k4.m) return 0.0;
    // (1/2pi) * (1/2) Int_0^inf e^{-2u} R1 R2 R3 R4 du, with t = 2u.
    double sum = 0.0;
    for (std::size_t i = 0; i < rule_.size(); ++i) {
        const double u = 0.5 * rule_.nodes[i];
        sum += rule_.weights[i] * orbital_radial(k1, u) * orbital_radial(k2, u) * orbital_radial(k3, u) *
               orbital_radial(k4, u);
    }
    return 0.25 * sum / (2.0 * std::numbers::pi);
}

double OrbitalIntegrals::quadrupole(const Orbital& k, const Orbital& l) const {
    if (std::abs(k.m - l.m) != 2) return 0.0;
    // angular factor of r^2 cos(2 theta) is 1/2, times the explicit 2
    double sum = 0.0;
    for (std::size_t i = 0; i < rule_.size(); ++i) {
        const double u = rule_.nodes[i];
        sum += rule_.weights[i] * orbital_radial(k, u) * orbital_radial(l, u) * u;
    }
    return 0.5 * sum;
}

double interaction_element(const Orbital& k1, const Orbital& k2, const Orbital& k3, const Orbital& k4) {
    const std::array<Orbital, 4> quad{k1, k2, k3, k4};
    const OrbitalIntegrals integrals(OrbitalIntegrals::required_order(quad));
    return integrals.contact(k1, k2, k3, k4);
}

double anisotropy_element(const Orbital& k, const Orbital& l) {
    const std::array<Orbital, 2> pair{k, l};
    const OrbitalIntegrals integrals(OrbitalIntegrals::required_order(pair));
    return integrals.quadrupole(k, l);
}

std::vector<double> anisotropy_matrix(std::span<const Orbital> orbitals) {
    const OrbitalIntegrals integrals(OrbitalIntegrals::required_order(orbitals));
    const std::size_t k = orbitals.size();
    std::vector<double> out(k * k, 0.0);
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = a + 1; b < k; ++b) {
            const double v = integrals.quadrupole(orbitals[a], orbitals[b]);
            out[a * k + b] = v;
            out[b * k + a] = v;
        }
    }
    return out;
}

InteractionTensor::InteractionTensor(std::span<const Orbital> orbitals, int quadrature_order)
    : order_(quadrature_order) {
    if (orbitals.size() > 65535) throw CapacityError("interaction tensor: too many orbitals");
    const OrbitalIntegrals integrals(quadrature_order);
    std::map<int, PairGroup> by_m;
    for (std::size_t a = 0; a < orbitals.size(); ++a) {
        for (std::size_t b = a; b < orbitals.size(); ++b) {
            const int total = orbitals[a].m + orbitals[b].m;
            auto& g = by_m[total];
            g.total_m = total;
            g.pairs.emplace_back(static_cast<std::uint16_t>(a), static_cast<std::uint16_t>(b));
        }
    }
    groups_.reserve(by_m.size());
    for (auto& [m, g] : by_m) {
        const std::size_t n = g.pairs.size();
        g.elements.assign(n * n, 0.0);
        for (std::size_t p = 0; p < n; ++p) {
            const auto& [a, b] = g.pairs[p];
            for (std::size_t q = p; q < n; ++q) {
                const auto& [c, d] = g.pairs[q];
                const double v = integrals.contact(orbitals[a], orbitals[b], orbitals[c], orbitals[d]);
                g.elements[p * n + q] = v;
                g.elements[q * n + p] = v;
            }
        }
        groups_.push_back(std::move(g));
    }
}

const InteractionTensor::PairGroup* InteractionTensor::group(int total_m) const {
    const auto it = std::lower_bound(groups_.begin(), groups_.end(), total_m,
                                     [](const PairGroup& g, int m) { return g.total_m < m; });
    if (it == groups_.end() || it->total_m != total_m) return nullptr;
    return &*it;
}

namespace {

constexpr char kMagic[4] = {'R', 'G', 'I', 'T'};

template <class T>
void put(std::string& buf, const T& v) {
    buf.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
bool take(std::string_view& buf, T& v) {
    if (buf.size() < sizeof(T)) return false;
    std::memcpy(&v, buf.data(), sizeof(T));
    buf.remove_prefix(sizeof(T));
    return true;
}

}  // namespace

void InteractionTensor::save(const std::filesystem::path& file, std::uint64_t spec_digest) const {
    std::string body;
    put(body, kFormatVersion);
    put(body, spec_digest);
    put(body, static_cast<std::int32_t>(order_));
    put(body, static_cast<std::uint32_t>(groups_.size()));
    for (const auto& g : groups_) {
        put(body, static_cast<std::int32_t>(g.total_m));
        put(body, static_cast<std::uint32_t>(g.pairs.size()));
        for (const auto& [a, b] : g.pairs) {
            put(body, a);
            put(body, b);
        }
        body.append(reinterpret_cast<const char*>(g.elements.data()), g.elements.size() * sizeof(double));
    }
    const std::uint64_t check = Digest{}.bytes(body.data(), body.size()).value();

    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    const auto tmp = std::filesystem::path(file).concat(".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write interaction tensor cache: " + tmp.string());
        out.write(kMagic, sizeof(kMagic));
        out.write(body.data(), static_cast<std::streamsize>(body.size()));
        out.write(reinterpret_cast<const char*>(&check), sizeof(check));
    }
    std::filesystem::rename(tmp, file);
}

std::optional<InteractionTensor> InteractionTensor::load(const std::filesystem::path& file,
                                                         std::uint64_t spec_digest, int quadrature_order) {
    std::ifstream in(file, std::ios::binary);
    if (!in) return std::nullopt;
    std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (raw.size() < sizeof(kMagic) + sizeof(std::uint64_t)) return std::nullopt;
    if (std::memcmp(raw.data(), kMagic, sizeof(kMagic)) != 0) return std::nullopt;

    std::string_view body(raw.data() + sizeof(kMagic), raw.size() - sizeof(kMagic) - sizeof(std::uint64_t));
    std::uint64_t check = 0;
    std::memcpy(&check, raw.data() + raw.size() - sizeof(check), sizeof(check));
    if (Digest{}.bytes(body.data(), body.size()).value() != check) return std::nullopt;

    std::uint32_t version = 0;
    std::uint64_t digest = 0;
    std::int32_t order = 0;
    std::uint32_t n_groups = 0;
    if (!take(body, version) || version != kFormatVersion) return std::nullopt;
    if (!take(body, digest) || digest != spec_digest) return std::nullopt;
    if (!take(body, order) || order != quadrature_order) return std::nullopt;
    if (!take(body, n_groups)) return std::nullopt;

    InteractionTensor t;
    t.order_ = order;
    t.groups_.resize(n_groups);
    for (auto& g : t.groups_) {
        std::int32_t m = 0;
        std::uint32_t n = 0;
        if (!take(body, m) || !take(body, n)) return std::nullopt;
        g.total_m = m;
        g.pairs.resize(n);
        for (auto& [a, b] : g.pairs) {
            if (!take(body, a) || !take(body, b)) return std::nullopt;
        }
        const std::size_t bytes = static_cast<std::size_t>(n) * n * sizeof(double);
        if (body.size() < bytes) return std::nullopt;
        g.elements.resize(static_cast<std::size_t>(n) * n);
        std::memcpy(g.elements.data(), body.data(), bytes);
        body.remove_prefix(bytes);
    }
    if (!body.empty()) return std::nullopt;
    return t;
}

}  // namespace rotgyro
