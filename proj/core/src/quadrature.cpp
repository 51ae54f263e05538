#include "rotgyro/quadrature.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "rotgyro/common.hpp"

namespace rotgyro {

namespace {

// L_order(x) and its derivative by the three-term recurrence.
std::pair<double, double> laguerre_with_derivative(int order, double x) {
    double prev = 1.0;
    double cur = 1.0 - x;
    if (order == 0) return {1.0, 0.0};
    for (int k = 1; k < order; ++k) {
        const double next = ((2.0 * k + 1.0 - x) * cur - k * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    // x L'_n = n (L_n - L_{n-1})
    const double deriv = order * (cur - prev) / x;
    return {cur, deriv};
}

}  // namespace

QuadratureRule gauss_laguerre(int order) {
    if (order < 1) throw InvalidArgument("gauss_laguerre: order must be >= 1");
    // Golub-Welsch seed: Jacobi matrix with diagonal 2i+1 and off-diagonal i+1.
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(order, order);
    for (int i = 0; i < order; ++i) {
        jacobi(i, i) = 2.0 * i + 1.0;
        if (i + 1 < order) {
            jacobi(i, i + 1) = i + 1.0;
            jacobi(i + 1, i) = i + 1.0;
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi, Eigen::EigenvaluesOnly);

    QuadratureRule rule;
    rule.nodes.resize(static_cast<std::size_t>(order));
    rule.weights.resize(static_cast<std::size_t>(order));
    for (int i = 0; i < order; ++i) {
        double x = es.eigenvalues()(i);
        // Newton polish on L_n(x) = 0
        for (int it = 0; it < 8; ++it) {
            const auto [p, dp] = laguerre_with_derivative(order, x);
            const double step = p / dp;
            x -= step;
            if (std::abs(step) <= 1e-15 * std::abs(x)) break;
        }
        const auto [pn1, unused] = laguerre_with_derivative(order + 1, x);
        (void)unused;
        const double denom = (order + 1.0) * pn1;
        rule.nodes[static_cast<std::size_t>(i)] = x;
        rule.weights[static_cast<std::size_t>(i)] = x / (denom * denom);
    }
    return rule;
}

}  // namespace rotgyro
