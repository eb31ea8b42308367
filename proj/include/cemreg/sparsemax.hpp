#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <stdexcept>
#include <vector>

namespace cemreg {

// Euclidean projection of q onto the probability simplex, via the sorted
// closed form: out_i = max(q_i - tau(q), 0) with
// tau(q) = (sum of the M(q) largest entries - 1) / M(q).
inline Eigen::VectorXd sparsemax(const Eigen::VectorXd& q) {
    if (q.size() < 1) throw std::invalid_argument("sparsemax: empty input");
    if (!q.allFinite()) throw std::invalid_argument("sparsemax: input must be finite");

    std::vector<double> sorted(q.data(), q.data() + q.size());
    std::sort(sorted.begin(), sorted.end(), std::greater<double>());

    double cumsum = 0.0;
    double tau = sorted[0] - 1.0;
    for (Eigen::Index m = 1; m <= q.size(); ++m) {
        cumsum += sorted[static_cast<std::size_t>(m - 1)];
        if (1.0 + static_cast<double>(m) * sorted[static_cast<std::size_t>(m - 1)] > cumsum)
            tau = (cumsum - 1.0) / static_cast<double>(m);
        else
            break;
    }
    return (q.array() - tau).max(0.0).matrix();
}

// Support of the projection: indices with q_i > tau, i.e. positive output.
inline std::vector<Eigen::Index> sparsemax_support(const Eigen::VectorXd& q) {
    Eigen::VectorXd p = sparsemax(q);
    std::vector<Eigen::Index> support;
    for (Eigen::Index i = 0; i < p.size(); ++i)
        if (p(i) > 0.0) support.push_back(i);
    return support;
}

// Jacobian at a support-stable point: on the support S (size s),
// J_ij = delta_ij - 1/s; zero elsewhere.
inline Eigen::MatrixXd sparsemax_jacobian(const Eigen::VectorXd& q) {
    const auto support = sparsemax_support(q);
    const double inv_s = 1.0 / static_cast<double>(support.size());
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(q.size(), q.size());
    for (Eigen::Index i : support)
        for (Eigen::Index j : support) jac(i, j) = (i == j ? 1.0 : 0.0) - inv_s;
    return jac;
}

}  // namespace cemreg
