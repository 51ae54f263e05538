#include "rotgyro/hamiltonian.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "rotgyro/digest.hpp"

namespace rotgyro {

void ModelParams::validate() const {
    spec.validate();
    if (!(g >= 0.0) || !std::isfinite(g)) throw InvalidArgument("model: g must be finite and >= 0");
    if (!(anisotropy >= 0.0 && anisotropy < 1.0)) throw InvalidArgument("model: anisotropy must lie in [0, 1)");
}

const char* to_string(AnisotropyConvention c) {
    return c == AnisotropyConvention::elliptic ? "elliptic" : "quadrupole";
}

AnisotropyConvention anisotropy_convention_from_string(std::string_view name) {
    if (name == "elliptic") return AnisotropyConvention::elliptic;
    if (name == "quadrupole") return AnisotropyConvention::quadrupole;
    throw InvalidArgument("unknown anisotropy convention '" + std::string(name) + "'");
}

ModelParams ModelParams::from_reduced_coupling(int n_particles, double g_n_over_6, double anisotropy) {
    ModelParams p;
    p.spec = TruncationSpec::standard(n_particles);
    p.g = 6.0 * g_n_over_6 / n_particles;
    p.anisotropy = anisotropy;
    return p;
}

double single_particle_energy(const Orbital& orb, double omega) { return orb.energy() - omega * orb.m; }

namespace {

// Row accumulator: gathers (column, value) pairs for one row and appends
// them, merged and sorted, to a compressed-row build.
class RowBuilder {
public:
    explicit RowBuilder(Eigen::Index dim) : dim_(dim) { outer_.push_back(0); }

    void add(Eigen::Index col, double value) { row_.emplace_back(col, value); }

    void finish_row(double drop_below = 0.0) {
        std::sort(row_.begin(), row_.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        for (std::size_t i = 0; i < row_.size();) {
            const Eigen::Index col = row_[i].first;
            double sum = 0.0;
            for (; i < row_.size() && row_[i].first == col; ++i) sum += row_[i].second;
            if (std::abs(sum) > drop_below) {
                inner_.push_back(col);
                values_.push_back(sum);
            }
        }
        row_.clear();
        outer_.push_back(static_cast<Eigen::Index>(values_.size()));
    }

    SparseMatrix build() {
        SparseMatrix m(dim_, dim_);
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(values_.size());
        for (Eigen::Index r = 0; r + 1 < static_cast<Eigen::Index>(outer_.size()); ++r) {
            for (Eigen::Index p = outer_[static_cast<std::size_t>(r)]; p < outer_[static_cast<std::size_t>(r) + 1]; ++p) {
                trips.emplace_back(r, inner_[static_cast<std::size_t>(p)], values_[static_cast<std::size_t>(p)]);
            }
        }
        m.setFromTriplets(trips.begin(), trips.end());
        m.makeCompressed();
        return m;
    }

private:
    Eigen::Index dim_;
    std::vector<std::pair<Eigen::Index, double>> row_;
    std::vector<Eigen::Index> outer_;
    std::vector<Eigen::Index> inner_;
    std::vector<double> values_;
};

}  // namespace

SparseMatrix build_contact_operator(const ManyBodyBasis& basis, const InteractionTensor& tensor) {
    const std::size_t k = basis.n_orbitals();
    const auto dim = static_cast<Eigen::Index>(basis.dimension());

    // pair (a <= b) -> (group, position)
    std::vector<std::pair<const InteractionTensor::PairGroup*, std::size_t>> pair_slot(k * k, {nullptr, 0});
    for (const auto& g : tensor.groups()) {
        for (std::size_t p = 0; p < g.pairs.size(); ++p) {
            const auto [a, b] = g.pairs[p];
            if (a >= k || b >= k) throw InvalidArgument("contact operator: tensor does not match the basis orbitals");
            pair_slot[a * k + b] = {&g, p};
        }
    }

    RowBuilder rows(dim);
    Occupation occ(k);
    std::vector<std::size_t> occupied;
    // The operator is symmetric, so the column generated from ket i is stored as row i.
    for (Eigen::Index i = 0; i < dim; ++i) {
        const auto src = basis.occupation(static_cast<std::size_t>(i));
        std::copy(src.begin(), src.end(), occ.begin());
        occupied.clear();
        for (std::size_t a = 0; a < k; ++a) {
            if (occ[a] > 0) occupied.push_back(a);
        }
        for (std::size_t ia = 0; ia < occupied.size(); ++ia) {
            for (std::size_t ib = ia; ib < occupied.size(); ++ib) {
                const std::size_t a = occupied[ia];
                const std::size_t b = occupied[ib];
                double amp_out;
                if (a == b) {
                    if (occ[a] < 2) continue;
                    amp_out = std::sqrt(static_cast<double>(occ[a]) * (occ[a] - 1));
                } else {
                    amp_out = std::sqrt(static_cast<double>(occ[a]) * occ[b]);
                }
                const auto [group, q] = pair_slot[a * k + b];
                if (group == nullptr) throw InvalidArgument("contact operator: tensor is missing an orbital pair");
                const double s_q = a == b ? 1.0 : 2.0;
                --occ[a];
                --occ[b];
                for (std::size_t p = 0; p < group->pairs.size(); ++p) {
                    const double v = group->at(p, q);
                    if (v == 0.0) continue;
                    const auto [c, d] = group->pairs[p];
                    ++occ[c];
                    ++occ[d];
                    const auto j = basis.lookup(occ);
                    if (j) {
                        const double amp_in = c == d ? std::sqrt(static_cast<double>(occ[c]) * (occ[c] - 1))
                                                     : std::sqrt(static_cast<double>(occ[c]) * occ[d]);
                        const double s_p = c == d ? 1.0 : 2.0;
                        rows.add(static_cast<Eigen::Index>(*j), 0.5 * s_p * s_q * v * amp_out * amp_in);
                    }
                    --occ[c];
                    --occ[d];
                }
                ++occ[a];
                ++occ[b];
            }
        }
        rows.finish_row();
    }
    return rows.build();
}

SparseMatrix build_quadrupole_operator(const ManyBodyBasis& basis) {
    const std::size_t k = basis.n_orbitals();
    const auto dim = static_cast<Eigen::Index>(basis.dimension());
    const std::vector<double> w = anisotropy_matrix(basis.orbitals());

    RowBuilder rows(dim);
    Occupation occ(k);
    for (Eigen::Index i = 0; i < dim; ++i) {
        const auto src = basis.occupation(static_cast<std::size_t>(i));
        std::copy(src.begin(), src.end(), occ.begin());
        for (std::size_t l = 0; l < k; ++l) {
            if (occ[l] == 0) continue;
            const double amp_out = std::sqrt(static_cast<double>(occ[l]));
            for (std::size_t kk = 0; kk < k; ++kk) {
                const double v = w[kk * k + l];
                if (v == 0.0) continue;
                --occ[l];
                ++occ[kk];
                if (const auto j = basis.lookup(occ)) {
                    rows.add(static_cast<Eigen::Index>(*j), v * amp_out * std::sqrt(static_cast<double>(occ[kk])));
                }
                --occ[kk];
                ++occ[l];
            }
        }
        rows.finish_row();
    }
    return rows.build();
}

HamiltonianModel::HamiltonianModel(ModelParams params, std::shared_ptr<const ManyBodyBasis> basis)
    : HamiltonianModel(std::move(params), std::move(basis), Options{}) {}

HamiltonianModel::HamiltonianModel(ModelParams params, std::shared_ptr<const ManyBodyBasis> basis,
                                   const Options& options)
    : params_(std::move(params)), basis_(std::move(basis)) {
    params_.validate();
    if (!basis_) throw InvalidArgument("hamiltonian: null basis");
    if (!(basis_->spec() == params_.spec)) throw InvalidArgument("hamiltonian: basis was built from a different truncation");

    const auto dim = dimension();
    const auto& orbs = basis_->orbitals();
    bare_energy_.resize(dim);
    angular_momentum_.resize(dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
        const auto occ = basis_->occupation(static_cast<std::size_t>(i));
        double e = 0.0;
        for (std::size_t k = 0; k < occ.size(); ++k) e += occ[k] * orbs[k].energy();
        bare_energy_(i) = e;
        angular_momentum_(i) = basis_->angular_momentum(static_cast<std::size_t>(i));
    }

    if (options.tensor != nullptr) {
        contact_ = build_contact_operator(*basis_, *options.tensor);
    } else {
        const int order =
            options.quadrature_order > 0 ? options.quadrature_order : OrbitalIntegrals::required_order(orbs);
        const InteractionTensor tensor(orbs, order);
        contact_ = build_contact_operator(*basis_, tensor);
    }
    quadrupole_ = build_quadrupole_operator(*basis_);
}

HamiltonianModel HamiltonianModel::with_params(const ModelParams& params) const {
    params.validate();
    if (!(params.spec == params_.spec)) throw InvalidArgument("hamiltonian: with_params cannot change the truncation");
    HamiltonianModel out;
    out.params_ = params;
    out.basis_ = basis_;
    out.bare_energy_ = bare_energy_;
    out.angular_momentum_ = angular_momentum_;
    out.contact_ = contact_;
    out.quadrupole_ = quadrupole_;
    return out;
}

SparseHamiltonian HamiltonianModel::assemble(double omega, double anisotropy_scale) const {
    if (!(anisotropy_scale >= 0.0 && anisotropy_scale <= 1.0)) {
        throw InvalidArgument("assemble: anisotropy_scale must lie in [0, 1]");
    }
    const double a = anisotropy_scale * params_.quadrupole_coefficient();
    SparseHamiltonian h;
    h.omega = omega;
    h.anisotropy_scale = anisotropy_scale;
    h.anisotropy = a;

    SparseMatrix diag(dimension(), dimension());
    diag.reserve(Eigen::VectorXi::Constant(dimension(), 1));
    for (Eigen::Index i = 0; i < dimension(); ++i) diag.insert(i, i) = bare_energy_(i) - omega * angular_momentum_(i);
    if (a != 0.0) {
        h.matrix = diag + params_.g * contact_ + a * quadrupole_;
    } else {
        h.matrix = diag + params_.g * contact_;
    }
    h.matrix.makeCompressed();
    return h;
}

std::uint64_t HamiltonianModel::digest() const {
    return Digest{}
        .add(std::string_view("model-v1"))
        .add(basis_->digest())
        .add(params_.g)
        .add(params_.anisotropy)
        .add(static_cast<int>(params_.convention))
        .value();
}

ComplexVector apply(const SparseHamiltonian& h, const ComplexVector& v) {
    if (v.size() != h.dimension()) throw InvalidArgument("apply: dimension mismatch");
    return h.matrix * v;
}

RealVector apply(const SparseHamiltonian& h, const RealVector& v) {
    if (v.size() != h.dimension()) throw InvalidArgument("apply: dimension mismatch");
    return h.matrix * v;
}

}  // namespace rotgyro
