#include <doctest.h>

#include <set>

#include "cemreg/bench.hpp"
#include "cemreg/metrics.hpp"
#include "cemreg/rng.hpp"

using namespace cemreg;

namespace {

PointCloud unit_square_corners() {
    PointCloud c;
    c.points.emplace_back(0, 0, 0);
    c.points.emplace_back(1, 0, 0);
    c.points.emplace_back(1, 1, 0);
    c.points.emplace_back(0, 1, 0);
    return c;
}

bool contains_point(const PointCloud& cloud, const Eigen::Vector3d& p) {
    for (const auto& q : cloud.points)
        if ((q - p).cwiseAbs().maxCoeff() == 0.0) return true;
    return false;
}

}  // namespace

TEST_CASE("fps with m equal to n returns a permutation of the cloud") {
    Rng rng(100);
    PointCloud c;
    for (int i = 0; i < 20; ++i)
        c.points.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    const PointCloud sub = fps(c, 20, 3);
    REQUIRE(sub.points.size() == 20);
    for (const auto& p : c.points) CHECK(contains_point(sub, p));
}

TEST_CASE("fps with m=1 returns a single input point") {
    Rng rng(101);
    PointCloud c;
    for (int i = 0; i < 10; ++i)
        c.points.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    const PointCloud sub = fps(c, 1, 9);
    REQUIRE(sub.points.size() == 1);
    CHECK(contains_point(c, sub.points[0]));
}

TEST_CASE("fps on the unit square picks opposite corners first") {
    const PointCloud square = unit_square_corners();
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        const PointCloud sub = fps(square, 2, seed);
        // second pick is always the diagonal opposite of the first
        CHECK((sub.points[1] - sub.points[0]).norm() == doctest::Approx(std::sqrt(2.0)));
    }
}

TEST_CASE("fps output is a subset of the input") {
    Rng rng(102);
    PointCloud c;
    for (int i = 0; i < 100; ++i)
        c.points.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    const PointCloud sub = fps(c, 37, 5);
    REQUIRE(sub.points.size() == 37);
    std::set<std::array<double, 3>> seen;
    for (const auto& p : sub.points) {
        CHECK(contains_point(c, p));
        CHECK(seen.insert({p.x(), p.y(), p.z()}).second);  // no repeats
    }
}

TEST_CASE("fps rejects m outside [1, n]") {
    const PointCloud square = unit_square_corners();
    CHECK_THROWS_AS((void)fps(square, 0, 0), std::invalid_argument);
    CHECK_THROWS_AS((void)fps(square, 5, 0), std::invalid_argument);
}

TEST_CASE("random_blob is normalized to the unit sphere") {
    Rng rng(103);
    for (int rep = 0; rep < 10; ++rep) {
        const PointCloud c = random_blob(200, rng);
        CHECK(centroid(c).cwiseAbs().maxCoeff() < 1e-12);
        double max_r = 0.0;
        for (const auto& p : c.points) max_r = std::max(max_r, p.norm());
        CHECK(max_r == doctest::Approx(1.0));
    }
}

TEST_CASE("generate_case is deterministic per seed") {
    CaseSpec spec;
    spec.num_points = 128;
    spec.seed = 77;
    const GeneratedCase a = generate_case(spec);
    const GeneratedCase b = generate_case(spec);
    REQUIRE(a.source.points.size() == b.source.points.size());
    REQUIRE(a.target.points.size() == b.target.points.size());
    for (std::size_t i = 0; i < a.source.points.size(); ++i)
        CHECK((a.source.points[i] - b.source.points[i]).cwiseAbs().maxCoeff() == 0.0);
    for (std::size_t i = 0; i < a.target.points.size(); ++i)
        CHECK((a.target.points[i] - b.target.points[i]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.truth.to_vector() - b.truth.to_vector()).cwiseAbs().maxCoeff() == 0.0);

    spec.seed = 78;
    const GeneratedCase c = generate_case(spec);
    CHECK((a.truth.to_vector() - c.truth.to_vector()).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("generate_case truth stays inside the protocol ranges") {
    constexpr double deg = std::numbers::pi / 180.0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        CaseSpec spec;
        spec.num_points = 32;
        spec.seed = seed;
        const GeneratedCase gen = generate_case(spec);
        for (int d = 0; d < 3; ++d) {
            CHECK(gen.truth.euler.e[d] >= 0.0);
            CHECK(gen.truth.euler.e[d] <= 45.0 * deg);
            CHECK(gen.truth.translation[d] >= -0.5);
            CHECK(gen.truth.translation[d] <= 0.5);
        }
    }
}

TEST_CASE("generate_case respects keep_fraction and noise clipping") {
    CaseSpec spec;
    spec.num_points = 200;
    spec.keep_fraction = 0.75;
    spec.noise_sigma = 0.01;
    spec.noise_clip = 0.05;
    spec.seed = 9;
    const GeneratedCase gen = generate_case(spec);
    CHECK(gen.source.points.size() == 150);
    CHECK(gen.target.points.size() == 150);

    // compare against the same case without noise: displacement per coordinate
    // is bounded by the clip
    CaseSpec clean = spec;
    clean.noise_sigma = 0.0;
    const GeneratedCase base = generate_case(clean);
    REQUIRE(base.source.points.size() == gen.source.points.size());
    for (std::size_t i = 0; i < gen.source.points.size(); ++i)
        CHECK((gen.source.points[i] - base.source.points[i]).cwiseAbs().maxCoeff() <=
              spec.noise_clip + 1e-15);
    for (std::size_t i = 0; i < gen.target.points.size(); ++i)
        CHECK((gen.target.points[i] - base.target.points[i]).cwiseAbs().maxCoeff() <=
              spec.noise_clip + 1e-15);
}

TEST_CASE("clean full-overlap cases have zero reward at the truth") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        CaseSpec spec;
        spec.num_points = 64;
        spec.keep_fraction = 1.0;
        spec.noise_sigma = 0.0;
        spec.seed = 100 + seed;
        const GeneratedCase gen = generate_case(spec);
        RegistrationState s = make_state(gen.source, gen.target);
        CHECK(reward(s, gen.truth, RewardParams(0.1)) == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("generate_case with a provided base shape normalizes it") {
    PointCloud base;
    Rng rng(104);
    for (int i = 0; i < 40; ++i)
        base.points.emplace_back(5 + rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    CaseSpec spec;
    spec.num_points = 40;
    spec.keep_fraction = 1.0;
    spec.noise_sigma = 0.0;
    spec.seed = 3;
    const GeneratedCase gen = generate_case(spec, base);
    double max_r = 0.0;
    for (const auto& p : gen.source.points) max_r = std::max(max_r, p.norm());
    CHECK(max_r == doctest::Approx(1.0));
}

TEST_CASE("aggregate_results pools and medians correctly") {
    std::vector<CaseResult> cases(3);
    const double rot[3] = {1.0, 2.0, 6.0};
    const double trans[3] = {0.1, 0.2, 0.6};
    for (int i = 0; i < 3; ++i) {
        cases[static_cast<std::size_t>(i)].error.rmse_rotation_deg = rot[i];
        cases[static_cast<std::size_t>(i)].error.mae_rotation_deg = rot[i];
        cases[static_cast<std::size_t>(i)].error.rmse_translation = trans[i];
        cases[static_cast<std::size_t>(i)].error.mae_translation = trans[i];
    }
    BenchAggregate agg = detail::aggregate_results(cases);
    CHECK(agg.rmse_rotation_deg_pooled == doctest::Approx(std::sqrt((1 + 4 + 36) / 3.0)));
    CHECK(agg.rmse_rotation_deg_per_case == doctest::Approx(3.0));
    CHECK(agg.mae_rotation_deg == doctest::Approx(3.0));
    CHECK(agg.median_rotation_mae_deg == doctest::Approx(2.0));
    CHECK(agg.median_translation_mae == doctest::Approx(0.2));

    // failed cases are excluded
    cases[2].failed = true;
    agg = detail::aggregate_results(cases);
    CHECK(agg.mae_rotation_deg == doctest::Approx(1.5));
    CHECK(agg.median_rotation_mae_deg == doctest::Approx(1.5));
}

TEST_CASE("run_benchmark solves an easy case and is deterministic") {
    CaseSpec spec;
    spec.num_points = 128;
    spec.rotation_hi_deg = 15.0;
    spec.translation_lo = -0.2;
    spec.translation_hi = 0.2;
    spec.keep_fraction = 1.0;
    spec.noise_sigma = 0.0;
    spec.seed = 11;

    CemConfig cfg;
    cfg.iterations = 8;
    cfg.population = 200;
    cfg.future_iterations = 2;
    cfg.elite_count = 20;

    const BenchReport a = run_benchmark({spec}, cfg, PriorKind::kFixed);
    REQUIRE(a.cases.size() == 1);
    CHECK(a.failed_cases == 0);
    CHECK_FALSE(a.cases[0].failed);
    CHECK(a.cases[0].error.mae_rotation_deg < 2.0);
    CHECK(a.cases[0].error.mae_translation < 0.02);

    const BenchReport b = run_benchmark({spec}, cfg, PriorKind::kFixed);
    CHECK((a.cases[0].predicted.to_vector() - b.cases[0].predicted.to_vector())
              .cwiseAbs()
              .maxCoeff() == 0.0);
    CHECK(a.aggregate.mae_rotation_deg == b.aggregate.mae_rotation_deg);
}

TEST_CASE("run_benchmark rejects an empty case list") {
    CHECK_THROWS_AS((void)run_benchmark({}, CemConfig{}, PriorKind::kFixed), std::invalid_argument);
}
