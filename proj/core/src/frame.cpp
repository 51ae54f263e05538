#include "rotgyro/frame.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "rotgyro/spectrum.hpp"

namespace rotgyro {

namespace {

constexpr Eigen::Index kDenseFrameLimit = 6000;

}  // namespace

IsotropicFrame::IsotropicFrame(const HamiltonianModel& model, const FrameOptions& options)
    : basis_(model.basis_ptr()), options_(options), coupling_(model.params().quadrupole_coefficient()) {
    if (!(options.energy_window > 0.0)) throw InvalidArgument("frame: energy window must be positive");
    if (options.omega_max < options.omega_min) throw InvalidArgument("frame: omega_max < omega_min");
    if (options.max_states < 0) throw InvalidArgument("frame: max_states must be >= 0");

    const SparseHamiltonian h0 = model.assemble(0.0, 0.0);
    const auto& lblocks = basis_->blocks();

    struct Raw {
        int l;
        std::size_t begin, size;
        RealVector values;
        RealMatrix vectors;
    };
    std::vector<Raw> raw;
    raw.reserve(lblocks.size());
    for (const auto& b : lblocks) {
        const auto n = static_cast<Eigen::Index>(b.size());
        RealMatrix dense = RealMatrix(h0.matrix.block(static_cast<Eigen::Index>(b.begin), static_cast<Eigen::Index>(b.begin), n, n));
        Eigen::SelfAdjointEigenSolver<RealMatrix> es(dense);
        if (es.info() != Eigen::Success) throw NumericalError("isotropic block diagonalisation failed", "frame");
        RealMatrix vec = es.eigenvectors();
        fix_signs(vec);
        raw.push_back({b.l, b.begin, b.size(), es.eigenvalues(), std::move(vec)});
    }

    // relative energy of every state, minimised over the Ω range
    const bool windowed = std::isfinite(options.energy_window) || options.max_states > 0;
    std::vector<std::vector<double>> rel(raw.size());
    if (windowed) {
        const int samples = options.omega_max > options.omega_min ? 21 : 1;
        const auto omegas = linspace(options.omega_min, options.omega_max, samples);
        for (std::size_t r = 0; r < raw.size(); ++r) rel[r].assign(static_cast<std::size_t>(raw[r].values.size()), 1e300);
        for (double w : omegas) {
            double emin = 1e300;
            for (const auto& b : raw) emin = std::min(emin, b.values(0) - w * b.l);
            for (std::size_t r = 0; r < raw.size(); ++r) {
                for (Eigen::Index i = 0; i < raw[r].values.size(); ++i) {
                    auto& x = rel[r][static_cast<std::size_t>(i)];
                    x = std::min(x, raw[r].values(i) - w * raw[r].l - emin);
                }
            }
        }
    }
    double cutoff = options.energy_window;
    if (options.max_states > 0) {
        std::vector<double> all;
        for (const auto& v : rel) all.insert(all.end(), v.begin(), v.end());
        if (static_cast<int>(all.size()) > options.max_states) {
            std::nth_element(all.begin(), all.begin() + options.max_states - 1, all.end());
            cutoff = std::min(cutoff, all[static_cast<std::size_t>(options.max_states - 1)]);
        }
    }

    Eigen::Index offset = 0;
    std::vector<double> energies, ls;
    for (std::size_t r = 0; r < raw.size(); ++r) {
        Eigen::Index keep = raw[r].values.size();
        if (windowed) {
            // eigenvalues ascend within a block, so the kept set is a prefix
            keep = 0;
            while (keep < raw[r].values.size() && rel[r][static_cast<std::size_t>(keep)] <= cutoff) ++keep;
        }
        if (keep == 0) continue;
        Block blk;
        blk.l = raw[r].l;
        blk.basis_begin = raw[r].begin;
        blk.basis_size = raw[r].size;
        blk.frame_begin = offset;
        blk.vectors = raw[r].vectors.leftCols(keep);
        for (Eigen::Index i = 0; i < keep; ++i) {
            energies.push_back(raw[r].values(i));
            ls.push_back(blk.l);
        }
        offset += keep;
        blocks_.push_back(std::move(blk));
    }
    if (offset == 0) throw InvalidArgument("frame: energy window keeps no states");
    energies_ = Eigen::Map<RealVector>(energies.data(), offset);
    angular_momentum_ = Eigen::Map<RealVector>(ls.data(), offset);

    // quadrupole couplings between blocks with ΔL = 2
    const Eigen::SparseMatrix<double, Eigen::ColMajor> q(model.quadrupole());
    std::vector<Eigen::Triplet<double>> triplets;
    for (std::size_t a = 0; a < blocks_.size(); ++a) {
        for (std::size_t b = a + 1; b < blocks_.size(); ++b) {
            if (blocks_[b].l != blocks_[a].l + 2) continue;
            const auto& ba = blocks_[a];
            const auto& bb = blocks_[b];
            const RealMatrix y = q.middleCols(static_cast<Eigen::Index>(bb.basis_begin), static_cast<Eigen::Index>(bb.basis_size)) * bb.vectors;
            const RealMatrix m = ba.vectors.transpose() * y.middleRows(static_cast<Eigen::Index>(ba.basis_begin), static_cast<Eigen::Index>(ba.basis_size));
            for (Eigen::Index i = 0; i < m.rows(); ++i) {
                for (Eigen::Index j = 0; j < m.cols(); ++j) {
                    const double v = m(i, j);
                    if (v == 0.0) continue;
                    triplets.emplace_back(ba.frame_begin + i, bb.frame_begin + j, v);
                    triplets.emplace_back(bb.frame_begin + j, ba.frame_begin + i, v);
                }
            }
        }
    }
    quadrupole_.resize(offset, offset);
    quadrupole_.setFromTriplets(triplets.begin(), triplets.end());
    quadrupole_.makeCompressed();
}

RealVector IsotropicFrame::diagonal(double omega) const { return energies_ - omega * angular_momentum_; }

SparseMatrix IsotropicFrame::hamiltonian(double omega, double scale) const {
    SparseMatrix h = (scale * coupling_) * quadrupole_;
    const RealVector d = diagonal(omega);
    SparseMatrix diag(size(), size());
    diag.reserve(Eigen::VectorXi::Constant(size(), 1));
    for (Eigen::Index i = 0; i < size(); ++i) diag.insert(i, i) = d(i);
    h += diag;
    h.makeCompressed();
    return h;
}

RealMatrix IsotropicFrame::dense_hamiltonian(double omega, double scale) const {
    if (size() > kDenseFrameLimit) throw CapacityError("frame: too many states for a dense Hamiltonian");
    RealMatrix h = (scale * coupling_) * RealMatrix(quadrupole_);
    h.diagonal() += diagonal(omega);
    return h;
}

FrameSpectrum IsotropicFrame::diagonalize(double omega, double scale) const {
    Eigen::SelfAdjointEigenSolver<RealMatrix> es(dense_hamiltonian(omega, scale));
    if (es.info() != Eigen::Success) throw NumericalError("frame diagonalisation failed", "frame");
    FrameSpectrum s;
    s.omega = omega;
    s.scale = scale;
    s.values = es.eigenvalues();
    s.vectors = es.eigenvectors();
    fix_signs(s.vectors);
    return s;
}

Eigen::Index IsotropicFrame::isotropic_ground(double omega) const {
    Eigen::Index idx = 0;
    diagonal(omega).minCoeff(&idx);
    return idx;
}

ComplexVector IsotropicFrame::to_frame(const ComplexVector& fock) const {
    if (fock.size() != static_cast<Eigen::Index>(basis_->dimension())) throw InvalidArgument("frame: dimension mismatch");
    ComplexVector c(size());
    for (const auto& b : blocks_) {
        c.segment(b.frame_begin, b.kept()) =
            b.vectors.transpose() * fock.segment(static_cast<Eigen::Index>(b.basis_begin), static_cast<Eigen::Index>(b.basis_size));
    }
    return c;
}

ComplexVector IsotropicFrame::to_fock(const ComplexVector& amplitudes) const {
    if (amplitudes.size() != size()) throw InvalidArgument("frame: amplitude count mismatch");
    ComplexVector psi = ComplexVector::Zero(static_cast<Eigen::Index>(basis_->dimension()));
    for (const auto& b : blocks_) {
        psi.segment(static_cast<Eigen::Index>(b.basis_begin), static_cast<Eigen::Index>(b.basis_size)) =
            b.vectors * amplitudes.segment(b.frame_begin, b.kept());
    }
    return psi;
}

AngularMomentumMoments IsotropicFrame::moments(const ComplexVector& amplitudes) const {
    AngularMomentumMoments m;
    const RealVector p = amplitudes.cwiseAbs2();
    const double total = p.sum();
    if (total > 0.0) {
        m.mean = p.dot(angular_momentum_) / total;
        m.mean_square = p.dot(angular_momentum_.cwiseAbs2()) / total;
    }
    m.stddev = std::sqrt(std::max(0.0, m.mean_square - m.mean * m.mean));
    return m;
}

std::vector<std::pair<int, double>> IsotropicFrame::block_weights(const ComplexVector& amplitudes) const {
    std::vector<std::pair<int, double>> out;
    for (const auto& b : blocks_) out.emplace_back(b.l, amplitudes.segment(b.frame_begin, b.kept()).squaredNorm());
    return out;
}

}  // namespace rotgyro
