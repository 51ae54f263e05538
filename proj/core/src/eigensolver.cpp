#include "rotgyro/eigensolver.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include <Eigen/Eigenvalues>

namespace rotgyro {

void fix_signs(RealMatrix& vectors) {
    for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
        Eigen::Index arg = 0;
        double best = -1.0;
        for (Eigen::Index r = 0; r < vectors.rows(); ++r) {
            // first index wins among (numerically) equal magnitudes
            const double a = std::abs(vectors(r, c));
            if (a > best * (1.0 + 1e-12)) {
                best = a;
                arg = r;
            }
        }
        if (vectors(arg, c) < 0.0) vectors.col(c) *= -1.0;
    }
}

EigenPairs full_eigenpairs(const RealMatrix& h) {
    Eigen::SelfAdjointEigenSolver<RealMatrix> es(h);
    if (es.info() != Eigen::Success) throw NumericalError("dense eigensolver failed", "eigensolver");
    EigenPairs out;
    out.values = es.eigenvalues();
    out.vectors = es.eigenvectors();
    fix_signs(out.vectors);
    return out;
}

namespace {

double infinity_norm(const SparseMatrix& h) {
    double best = 0.0;
    for (Eigen::Index r = 0; r < h.outerSize(); ++r) {
        double s = 0.0;
        for (SparseMatrix::InnerIterator it(h, r); it; ++it) s += std::abs(it.value());
        best = std::max(best, s);
    }
    return best;
}

EigenPairs dense_lowest(const SparseMatrix& h, int k) {
    const RealMatrix dense = RealMatrix(h);
    Eigen::SelfAdjointEigenSolver<RealMatrix> es(dense);
    if (es.info() != Eigen::Success) throw NumericalError("dense eigensolver failed", "eigensolver");
    EigenPairs out;
    out.values = es.eigenvalues().head(k);
    out.vectors = es.eigenvectors().leftCols(k);
    fix_signs(out.vectors);
    for (int i = 0; i < k; ++i) {
        const double r = (h * out.vectors.col(i) - out.values(i) * out.vectors.col(i)).norm();
        out.max_residual = std::max(out.max_residual, r);
    }
    return out;
}

class ThickRestartLanczos {
public:
    ThickRestartLanczos(const SparseMatrix& h, int k, const SolverOptions& opt)
        : h_(h), k_(k), opt_(opt), dim_(h.rows()) {
        m_max_ = opt.subspace > 0 ? opt.subspace : k + 80;
        m_max_ = static_cast<int>(std::min<Eigen::Index>(m_max_, dim_));
        m_max_ = std::max(m_max_, std::min<int>(k + 1, static_cast<int>(dim_)));
        keep_ = std::min(m_max_ - 1, k + (m_max_ - k) / 2);
        v_.resize(dim_, m_max_);
        hv_.resize(dim_, m_max_);
        t_ = RealMatrix::Zero(m_max_, m_max_);
        threshold_ = opt.tol * std::max(infinity_norm(h), 1e-300);
    }

    EigenPairs run(const RealMatrix* seed) {
        std::mt19937_64 rng(0x5eed1234ULL);
        std::uniform_real_distribution<double> uni(-1.0, 1.0);
        auto random_vector = [&] {
            RealVector r(dim_);
            for (Eigen::Index i = 0; i < dim_; ++i) r(i) = uni(rng);
            return r;
        };

        // A single start vector keeps the Lanczos relation that thick restarts rely on:
        // every Ritz residual is parallel to the next Krylov direction. Seeding with a
        // block of vectors breaks that and can stall convergence.
        RealVector candidate;
        if (seed != nullptr && seed->rows() == dim_ && seed->cols() > 0) {
            candidate = RealVector::Zero(dim_);
            for (Eigen::Index c = 0; c < seed->cols(); ++c) {
                const double n = seed->col(c).norm();
                if (n > 0.0) candidate += seed->col(c) / n;
            }
            if (!(candidate.norm() > 0.0)) candidate = random_vector();
        } else {
            candidate = RealVector::Constant(dim_, 1.0) + 0.1 * random_vector();
        }

        double last_residual = INFINITY;
        int since_check = 0;
        while (true) {
            append(candidate, random_vector);
            candidate = hv_.col(j_ - 1);
            ++since_check;

            const bool full = j_ == m_max_;
            if (j_ >= k_ && (full || since_check >= 10 || j_ == dim_)) {
                since_check = 0;
                ritz();
                last_residual = residuals_.head(k_).maxCoeff();
                if (last_residual <= threshold_ || j_ == dim_) return finish(last_residual);
                if (products_ >= opt_.max_products) {
                    throw NumericalError("Lanczos did not converge after " + std::to_string(products_) +
                                             " products; achieved residual " + std::to_string(last_residual) +
                                             " vs bound " + std::to_string(threshold_),
                                         "eigensolver");
                }
                if (full) restart(candidate);
            }
        }
    }

private:
    template <class Rng>
    void append(RealVector w, Rng& random_vector) {
        for (int attempt = 0; attempt < 4; ++attempt) {
            const double before = w.norm();
            for (int pass = 0; pass < 2; ++pass) {
                if (j_ > 0) w -= v_.leftCols(j_) * (v_.leftCols(j_).transpose() * w);
            }
            const double after = w.norm();
            if (after > 1e-10 * std::max(before, 1e-300) && after > 1e-300) {
                w /= after;
                break;
            }
            w = random_vector();  // invariant subspace reached; continue in a fresh direction
        }
        v_.col(j_) = w;
        hv_.col(j_) = h_ * w;
        ++products_;
        const RealVector col = v_.leftCols(j_ + 1).transpose() * hv_.col(j_);
        t_.block(0, j_, j_ + 1, 1) = col;
        t_.block(j_, 0, 1, j_ + 1) = col.transpose();
        ++j_;
    }

    void ritz() {
        const RealMatrix t = 0.5 * (t_.topLeftCorner(j_, j_) + t_.topLeftCorner(j_, j_).transpose());
        Eigen::SelfAdjointEigenSolver<RealMatrix> es(t);
        theta_ = es.eigenvalues();
        s_ = es.eigenvectors();
        const int n = std::min<int>(std::max(k_, keep_), j_);
        residuals_.resize(n);
        for (int i = 0; i < n; ++i) {
            const RealVector r = hv_.leftCols(j_) * s_.col(i) - theta_(i) * (v_.leftCols(j_) * s_.col(i));
            residuals_(i) = r.norm();
        }
    }

    void restart(RealVector& candidate) {
        // next Krylov direction, orthogonal to the whole current space
        for (int pass = 0; pass < 2; ++pass) candidate -= v_.leftCols(j_) * (v_.leftCols(j_).transpose() * candidate);
        const RealMatrix keep = s_.leftCols(keep_);
        const RealMatrix new_v = v_.leftCols(j_) * keep;
        const RealMatrix new_hv = hv_.leftCols(j_) * keep;
        v_.leftCols(keep_) = new_v;
        hv_.leftCols(keep_) = new_hv;
        t_.setZero();
        t_.topLeftCorner(keep_, keep_) = v_.leftCols(keep_).transpose() * hv_.leftCols(keep_);
        j_ = keep_;
    }

    EigenPairs finish(double residual) {
        EigenPairs out;
        out.values = theta_.head(k_);
        out.vectors = v_.leftCols(j_) * s_.leftCols(k_);
        // re-orthonormalise against rounding
        Eigen::HouseholderQR<RealMatrix> qr(out.vectors);
        RealMatrix q = qr.householderQ() * RealMatrix::Identity(dim_, k_);
        for (int c = 0; c < k_; ++c) {
            if (q.col(c).dot(out.vectors.col(c)) < 0.0) q.col(c) *= -1.0;
        }
        out.vectors = q;
        fix_signs(out.vectors);
        out.max_residual = residual;
        out.products = products_;
        return out;
    }

    const SparseMatrix& h_;
    int k_;
    SolverOptions opt_;
    Eigen::Index dim_;
    int m_max_ = 0;
    int keep_ = 0;
    int j_ = 0;
    int products_ = 0;
    double threshold_ = 0.0;
    RealMatrix v_, hv_, t_, s_;
    RealVector theta_, residuals_;
};

}  // namespace

EigenPairs lowest_eigenpairs(const SparseMatrix& h, int k, const SolverOptions& options, const RealMatrix* seed) {
    if (h.rows() != h.cols()) throw InvalidArgument("lowest_eigenpairs: matrix must be square");
    if (k < 1 || k > h.rows()) throw InvalidArgument("lowest_eigenpairs: k must lie in [1, dimension]");
    if (h.rows() < options.dense_threshold) return dense_lowest(h, k);
    ThickRestartLanczos lanczos(h, k, options);
    return lanczos.run(seed);
}

}  // namespace rotgyro
