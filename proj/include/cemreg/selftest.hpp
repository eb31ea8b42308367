#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "cemreg/bench.hpp"
#include "cemreg/metrics.hpp"
#include "cemreg/rigid_solver.hpp"
#include "cemreg/rng.hpp"
#include "cemreg/sparsemax.hpp"

namespace cemreg {

// Independent simplex-projection oracle: enumerate every nonempty support set,
// solve the KKT system on it, return the feasible solution. Exponential in n;
// for checking the closed form only.
inline Eigen::VectorXd sparsemax_bruteforce(const Eigen::VectorXd& q) {
    const int n = static_cast<int>(q.size());
    for (unsigned mask = 1; mask < (1u << n); ++mask) {
        double sum = 0.0;
        int size = 0;
        for (int i = 0; i < n; ++i)
            if (mask & (1u << i)) {
                sum += q(i);
                ++size;
            }
        const double tau = (sum - 1.0) / size;
        bool feasible = true;
        Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
        for (int i = 0; i < n; ++i) {
            if (mask & (1u << i)) {
                p(i) = q(i) - tau;
                if (p(i) <= 0.0) feasible = false;
            } else if (q(i) > tau) {
                feasible = false;
            }
        }
        if (feasible) return p;
    }
    // Single-point fallback: all mass on the largest entry.
    Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
    Eigen::Index best;
    q.maxCoeff(&best);
    p(best) = 1.0;
    return p;
}

struct SelfTestSuite {
    std::string name;
    int passed = 0;
    int total = 0;
    bool ok() const { return passed == total; }
};

// D^mc = D^cd / eps whenever eps dominates every closest-pair distance.
inline SelfTestSuite selftest_lemma_proportionality(int pairs = 100, std::uint64_t seed = 20240901) {
    SelfTestSuite suite{"lemma_dmc_chamfer"};
    Rng rng(seed);
    for (int c = 0; c < pairs; ++c) {
        const int n = 64 + static_cast<int>(rng.uniform_index(449));
        PointCloud a = random_blob(n, rng);
        PointCloud b = random_blob(n, rng);
        NeighborIndex ia(a), ib(b);

        double max_closest = 0.0;
        for (const auto& p : a.points) max_closest = std::max(max_closest, ib.nearest(p).distance);
        for (const auto& p : b.points) max_closest = std::max(max_closest, ia.nearest(p).distance);
        const double eps = 1.01 * max_closest;

        const double mc = d_mc(a, b, ia, ib, RewardParams(eps));
        const double cd = chamfer(a, b, ia, ib);
        const double expected = cd / eps;
        ++suite.total;
        if (std::abs(mc - expected) <= 1e-9 * std::max(1.0, expected)) ++suite.passed;
    }
    return suite;
}

inline SelfTestSuite selftest_sparsemax_oracle(int vectors = 500, std::uint64_t seed = 20240902) {
    SelfTestSuite suite{"sparsemax_oracle"};
    Rng rng(seed);
    for (int c = 0; c < vectors; ++c) {
        const int n = 2 + static_cast<int>(rng.uniform_index(7));
        Eigen::VectorXd q(n);
        for (int i = 0; i < n; ++i) q(i) = rng.uniform(-2, 2);
        const Eigen::VectorXd fast = sparsemax(q);
        const Eigen::VectorXd slow = sparsemax_bruteforce(q);
        const double shift = rng.uniform(-5, 5);
        const Eigen::VectorXd shifted = sparsemax(q.array() + shift);
        ++suite.total;
        if ((fast - slow).cwiseAbs().maxCoeff() <= 1e-10 && fast.minCoeff() >= 0.0 &&
            std::abs(fast.sum() - 1.0) <= 1e-12 &&
            (fast - shifted).cwiseAbs().maxCoeff() <= 1e-12)
            ++suite.passed;
    }
    return suite;
}

// Closed-form Jacobian vs central finite differences at support-stable points.
inline SelfTestSuite selftest_sparsemax_jacobian(int points = 100, std::uint64_t seed = 20240903) {
    SelfTestSuite suite{"sparsemax_jacobian_fd"};
    Rng rng(seed);
    const double step = 1e-6;
    int tested = 0;
    while (tested < points) {
        const int n = 2 + static_cast<int>(rng.uniform_index(5));
        Eigen::VectorXd q(n);
        for (int i = 0; i < n; ++i) q(i) = rng.uniform(-1, 1);

        // Keep only points whose support is stable under the probe step.
        const auto support = sparsemax_support(q);
        bool stable = true;
        for (int i = 0; i < n && stable; ++i)
            for (const double sgn : {-1.0, 1.0}) {
                Eigen::VectorXd probe = q;
                probe(i) += sgn * step;
                if (sparsemax_support(probe) != support) {
                    stable = false;
                    break;
                }
            }
        if (!stable) continue;
        ++tested;

        const Eigen::MatrixXd jac = sparsemax_jacobian(q);
        Eigen::MatrixXd fd(n, n);
        for (int j = 0; j < n; ++j) {
            Eigen::VectorXd hi = q, lo = q;
            hi(j) += step;
            lo(j) -= step;
            fd.col(j) = (sparsemax(hi) - sparsemax(lo)) / (2.0 * step);
        }
        ++suite.total;
        if ((jac - fd).cwiseAbs().maxCoeff() <= 1e-5) ++suite.passed;
    }
    return suite;
}

// Noiseless correspondence recovery through the weighted SVD solve.
inline SelfTestSuite selftest_kabsch_recovery(int cases = 50, std::uint64_t seed = 20240904) {
    SelfTestSuite suite{"kabsch_recovery"};
    Rng rng(seed);
    for (int c = 0; c < cases; ++c) {
        const RigidMotion truth(
            EulerAngles(rng.uniform(-3, 3), rng.uniform(-1.5, 1.5), rng.uniform(-3, 3)),
            Eigen::Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)));
        std::vector<Correspondence> pairs;
        for (int i = 0; i < 12; ++i) {
            const Eigen::Vector3d x(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
            pairs.push_back({x, truth.apply(x), rng.uniform(0.1, 2.0)});
        }
        const KabschResult solved = kabsch_solve(pairs);
        ++suite.total;
        if ((solved.motion.rotation - truth.rotation).cwiseAbs().maxCoeff() <= 1e-9 &&
            (solved.motion.translation - truth.translation).cwiseAbs().maxCoeff() <= 1e-9 &&
            !solved.degenerate)
            ++suite.passed;
    }
    return suite;
}

inline std::vector<SelfTestSuite> run_selftests() {
    return {selftest_lemma_proportionality(), selftest_sparsemax_oracle(),
            selftest_sparsemax_jacobian(), selftest_kabsch_recovery()};
}

}  // namespace cemreg
