#include <doctest.h>

#include "cemreg/nn_index.hpp"
#include "cemreg/rng.hpp"

using namespace cemreg;

namespace {

// Brute-force oracle with the same tie rule (lowest index wins).
NeighborIndex::Result brute_force(const PointCloud& cloud, const Eigen::Vector3d& q) {
    NeighborIndex::Result best{std::numeric_limits<double>::infinity(), 0};
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        const double d = (cloud.points[i] - q).norm();
        if (d < best.distance) best = {d, i};
    }
    return best;
}

PointCloud random_cloud(int n, Rng& rng) {
    PointCloud c;
    for (int i = 0; i < n; ++i)
        c.points.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    return c;
}

}  // namespace

TEST_CASE("build_index rejects empty cloud") {
    CHECK_THROWS_AS(NeighborIndex(PointCloud{}), std::invalid_argument);
}

TEST_CASE("single point cloud always returns that point") {
    PointCloud c;
    c.points.emplace_back(1, 2, 3);
    NeighborIndex idx(c);
    const auto r = idx.nearest(Eigen::Vector3d(4, 6, 3));
    CHECK(r.index == 0);
    CHECK(r.distance == doctest::Approx(5.0));
}

TEST_CASE("query equal to a cloud point has distance zero") {
    Rng rng(11);
    PointCloud c = random_cloud(50, rng);
    NeighborIndex idx(c);
    const auto r = idx.nearest(c.points[17]);
    CHECK(r.distance == 0.0);
    CHECK(r.index == 17);
}

TEST_CASE("duplicate points give distance zero and the lowest index") {
    PointCloud c;
    c.points.emplace_back(0, 0, 0);
    c.points.emplace_back(1, 1, 1);
    c.points.emplace_back(1, 1, 1);
    NeighborIndex idx(c);
    const auto r = idx.nearest(Eigen::Vector3d(1, 1, 1));
    CHECK(r.distance == 0.0);
    CHECK(r.index == 1);
}

TEST_CASE("two point cloud picks the closer point") {
    PointCloud c;
    c.points.emplace_back(0, 0, 0);
    c.points.emplace_back(2, 0, 0);
    NeighborIndex idx(c);
    const auto r = idx.nearest(Eigen::Vector3d(0.9, 0, 0));
    CHECK(r.distance == doctest::Approx(0.9));
    CHECK(r.index == 0);
}

TEST_CASE("equidistant tie resolves to the lower index") {
    PointCloud c;
    c.points.emplace_back(-1, 0, 0);
    c.points.emplace_back(1, 0, 0);
    c.points.emplace_back(0, 1, 0);
    NeighborIndex idx(c);
    const auto r = idx.nearest(Eigen::Vector3d(0, 0, 0));
    CHECK(r.index == 0);
    CHECK(r.distance == doctest::Approx(1.0));
}

TEST_CASE("oracle equivalence on randomized clouds and queries") {
    Rng rng(12);
    for (int rep = 0; rep < 5; ++rep) {
        PointCloud c = random_cloud(1000, rng);
        NeighborIndex idx(c);
        for (int q = 0; q < 100; ++q) {
            const Eigen::Vector3d query(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5),
                                        rng.uniform(-1.5, 1.5));
            const auto tree = idx.nearest(query);
            const auto exact = brute_force(c, query);
            CHECK(tree.index == exact.index);
            CHECK(std::abs(tree.distance - exact.distance) < 1e-12);
        }
    }
}

TEST_CASE("oracle equivalence on clustered clouds with duplicates") {
    Rng rng(13);
    for (int rep = 0; rep < 100; ++rep) {
        PointCloud c = random_cloud(64, rng);
        // inject duplicates to stress the tie rule
        c.points.push_back(c.points[3]);
        c.points.push_back(c.points[10]);
        NeighborIndex idx(c);
        const Eigen::Vector3d query(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        const auto tree = idx.nearest(query);
        const auto exact = brute_force(c, query);
        CHECK(tree.index == exact.index);
        CHECK(std::abs(tree.distance - exact.distance) < 1e-12);
    }
}

TEST_CASE("non-finite query rejected") {
    PointCloud c;
    c.points.emplace_back(0, 0, 0);
    NeighborIndex idx(c);
    Eigen::Vector3d bad(std::numeric_limits<double>::infinity(), 0, 0);
    CHECK_THROWS_AS((void)idx.nearest(bad), std::invalid_argument);
}
