#include <doctest.h>

#include <numbers>

#include "cemreg/metrics.hpp"
#include "cemreg/rigid_solver.hpp"
#include "cemreg/rng.hpp"

using namespace cemreg;

namespace {

PointCloud random_cloud(int n, Rng& rng) {
    PointCloud c;
    for (int i = 0; i < n; ++i)
        c.points.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    return c;
}

RigidMotion random_motion(Rng& rng, double rot_scale = 1.0, double trans_scale = 1.0) {
    return RigidMotion(EulerAngles(rot_scale * rng.uniform(-1, 1), rot_scale * rng.uniform(-1, 1),
                                   rot_scale * rng.uniform(-1, 1)),
                       trans_scale * Eigen::Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1),
                                                     rng.uniform(-1, 1)));
}

double objective(const RigidMotion& m, const std::vector<Correspondence>& pairs) {
    double sum = 0.0;
    for (const auto& c : pairs) sum += c.weight * (m.apply(c.source) - c.matched).squaredNorm();
    return sum;
}

}  // namespace

TEST_CASE("kabsch recovers a known motion exactly") {
    Rng rng(40);
    for (int rep = 0; rep < 50; ++rep) {
        const RigidMotion truth = random_motion(rng);
        std::vector<Correspondence> pairs;
        for (int i = 0; i < 10; ++i) {
            const Eigen::Vector3d x(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
            pairs.push_back({x, truth.apply(x), rng.uniform(0.1, 3.0)});
        }
        const KabschResult r = kabsch_solve(pairs);
        CHECK_FALSE(r.degenerate);
        CHECK((r.motion.rotation - truth.rotation).cwiseAbs().maxCoeff() < 1e-9);
        CHECK((r.motion.translation - truth.translation).cwiseAbs().maxCoeff() < 1e-9);
        CHECK(r.residual_rms < 1e-9);
    }
}

TEST_CASE("kabsch on identical pairs gives the identity") {
    Rng rng(41);
    std::vector<Correspondence> pairs;
    for (int i = 0; i < 8; ++i) {
        const Eigen::Vector3d x(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        pairs.push_back({x, x, 1.0});
    }
    const KabschResult r = kabsch_solve(pairs);
    CHECK((r.motion.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(r.motion.translation.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("kabsch corrects reflections on mirrored planar sets") {
    // planar source, target mirrored through the xy plane composed with a flip
    std::vector<Correspondence> pairs;
    Rng rng(42);
    for (int i = 0; i < 10; ++i) {
        const Eigen::Vector3d x(rng.uniform(-1, 1), rng.uniform(-1, 1), 0.0);
        pairs.push_back({x, Eigen::Vector3d(x.x(), -x.y(), 0.0), 1.0});
    }
    const KabschResult r = kabsch_solve(pairs);
    CHECK(r.motion.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK((r.motion.rotation.transpose() * r.motion.rotation - Eigen::Matrix3d::Identity())
              .cwiseAbs()
              .maxCoeff() < 1e-9);
}

TEST_CASE("kabsch flags collinear degenerate geometry") {
    std::vector<Correspondence> pairs;
    for (int i = 0; i < 6; ++i) {
        const Eigen::Vector3d x(static_cast<double>(i), 0, 0);
        pairs.push_back({x, x + Eigen::Vector3d(0.5, 0, 0), 1.0});
    }
    const KabschResult r = kabsch_solve(pairs);
    CHECK(r.degenerate);
    CHECK(r.motion.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("kabsch rejects too few positive weights") {
    std::vector<Correspondence> pairs = {{{0, 0, 0}, {1, 0, 0}, 1.0},
                                         {{1, 0, 0}, {2, 0, 0}, 1.0},
                                         {{0, 1, 0}, {1, 1, 0}, 0.0}};
    CHECK_THROWS_AS((void)kabsch_solve(pairs), std::invalid_argument);
    pairs[0].weight = -1.0;
    CHECK_THROWS_AS((void)kabsch_solve(pairs), std::invalid_argument);
}

TEST_CASE("kabsch objective beats random perturbed motions") {
    Rng rng(43);
    for (int rep = 0; rep < 5; ++rep) {
        std::vector<Correspondence> pairs;
        const RigidMotion truth = random_motion(rng);
        for (int i = 0; i < 10; ++i) {
            const Eigen::Vector3d x(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
            // noisy targets so the optimum is nontrivial
            pairs.push_back({x,
                             truth.apply(x) + 0.05 * Eigen::Vector3d(rng.normal(), rng.normal(),
                                                                     rng.normal()),
                             rng.uniform(0.2, 2.0)});
        }
        const KabschResult solved = kabsch_solve(pairs);
        const double best = objective(solved.motion, pairs);
        for (int trial = 0; trial < 1000; ++trial) {
            const RigidMotion perturbed(
                EulerAngles(solved.motion.euler.e + 0.1 * Eigen::Vector3d(rng.normal(), rng.normal(),
                                                                          rng.normal())),
                solved.motion.translation +
                    0.1 * Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()));
            CHECK(best <= objective(perturbed, pairs) + 1e-12);
        }
    }
}

TEST_CASE("soft_correspondence saturates on matching features") {
    Rng rng(44);
    PointCloud target = random_cloud(20, rng);
    const int n = 5;
    // one-hot features: logit is 100 for the matching pair, 0 elsewhere
    Eigen::MatrixXd ft = 10.0 * Eigen::MatrixXd::Identity(20, 20);
    Eigen::MatrixXd fs = ft.topRows(n);  // feature of x_i identical to y_i, margin 100
    const auto matched = soft_correspondence(fs, ft, target);
    for (int i = 0; i < n; ++i)
        CHECK((matched[static_cast<std::size_t>(i)] - target.points[static_cast<std::size_t>(i)])
                  .cwiseAbs()
                  .maxCoeff() < 1e-6);
}

TEST_CASE("soft_correspondence with equal features yields the target centroid") {
    Rng rng(45);
    PointCloud target = random_cloud(15, rng);
    Eigen::MatrixXd ft = Eigen::MatrixXd::Ones(15, 3);
    Eigen::MatrixXd fs = Eigen::MatrixXd::Ones(4, 3);
    const Eigen::Vector3d c = centroid(target);
    for (const auto& m : soft_correspondence(fs, ft, target))
        CHECK((m - c).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("soft_correspondence is shift invariant in the logits") {
    Rng rng(46);
    PointCloud target = random_cloud(12, rng);
    Eigen::MatrixXd ft(12, 2);
    for (int j = 0; j < 12; ++j) ft.row(j) << rng.uniform(-1, 1), rng.uniform(-1, 1);
    Eigen::MatrixXd fs(3, 2);
    for (int i = 0; i < 3; ++i) fs.row(i) << rng.uniform(-1, 1), rng.uniform(-1, 1);
    const auto base = soft_correspondence(fs, ft, target);
    // adding a constant to every logit of a row == adding a vector c with
    // <c, f_y> constant; emulate by appending a bias feature column
    Eigen::MatrixXd ft2(12, 3);
    ft2 << ft, Eigen::VectorXd::Ones(12);
    Eigen::MatrixXd fs2(3, 3);
    fs2 << fs, Eigen::Vector3d(5.0, -3.0, 100.0);
    const auto shifted = soft_correspondence(fs2, ft2, target);
    for (std::size_t i = 0; i < base.size(); ++i)
        CHECK((base[i] - shifted[i]).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("soft_correspondence outputs stay inside the target bounding box") {
    Rng rng(47);
    PointCloud target = random_cloud(25, rng);
    Eigen::Vector3d lo = target.points[0], hi = target.points[0];
    for (const auto& p : target.points) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    Eigen::MatrixXd ft(25, 3), fs(10, 3);
    for (int j = 0; j < 25; ++j)
        ft.row(j) << rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2);
    for (int i = 0; i < 10; ++i)
        fs.row(i) << rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2);
    for (const auto& m : soft_correspondence(fs, ft, target)) {
        CHECK((m - lo).minCoeff() >= -1e-12);
        CHECK((hi - m).minCoeff() >= -1e-12);
    }
}

TEST_CASE("icp on already aligned clouds returns near identity") {
    Rng rng(48);
    PointCloud c = random_cloud(60, rng);
    RegistrationState s = make_state(c, c);
    const IcpResult r = icp(s, IcpConfig(10, 1e-12));
    CHECK((r.motion.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(r.motion.translation.cwiseAbs().maxCoeff() < 1e-9);
    CHECK(r.final_mse <= 1e-18);
}

TEST_CASE("icp recovers a small offset on a full-overlap pair") {
    constexpr double deg = std::numbers::pi / 180.0;
    Rng rng(49);
    PointCloud source = random_cloud(200, rng);
    const RigidMotion truth(EulerAngles(5 * deg, -3 * deg, 4 * deg),
                            Eigen::Vector3d(0.05, -0.02, 0.03));
    RegistrationState s = make_state(source, transform_cloud(source, truth));
    const IcpResult r = icp(s, IcpConfig(30, 1e-12));
    const TransformError err = transform_error(r.motion, truth);
    CHECK(err.mae_rotation_deg < 0.1);
    CHECK(err.mae_translation < 1e-3);
}

TEST_CASE("icp correspondence MSE is non-increasing") {
    Rng rng(50);
    for (int rep = 0; rep < 20; ++rep) {
        PointCloud source = random_cloud(80, rng);
        const RigidMotion offset = random_motion(rng, 0.3, 0.2);
        RegistrationState s = make_state(source, transform_cloud(source, offset));
        const IcpResult r = icp(s, IcpConfig(15, 0.0));
        for (std::size_t i = 1; i < r.mse_history.size(); ++i)
            CHECK(r.mse_history[i] <= r.mse_history[i - 1] + 1e-12);
    }
}

TEST_CASE("icp rejects clouds smaller than three points") {
    PointCloud tiny;
    tiny.points.emplace_back(0, 0, 0);
    tiny.points.emplace_back(1, 0, 0);
    PointCloud ok;
    for (int i = 0; i < 5; ++i) ok.points.emplace_back(i, i % 2, 0);
    CHECK_THROWS_AS((void)icp(make_state(tiny, ok)), std::invalid_argument);
}
