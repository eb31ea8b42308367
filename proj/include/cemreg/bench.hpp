#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "cemreg/cem.hpp"
#include "cemreg/metrics.hpp"
#include "cemreg/prior.hpp"
#include "cemreg/rng.hpp"

namespace cemreg {

// One synthetic registration case. Defaults mirror the evaluation protocol:
// rotation per Euler component in [0, 45] degrees, translation in [-0.5, 0.5],
// 75% keep fraction, clipped Gaussian noise with sigma 0.01 clipped at 0.05.
struct CaseSpec {
    int num_points = 1024;
    double rotation_lo_deg = 0.0;
    double rotation_hi_deg = 45.0;
    double translation_lo = -0.5;
    double translation_hi = 0.5;
    double keep_fraction = 0.75;
    double noise_sigma = 0.01;
    double noise_clip = 0.05;
    std::uint64_t seed = 0;

    void validate() const {
        if (num_points < 1) throw std::invalid_argument("CaseSpec: num_points must be >= 1");
        if (rotation_hi_deg < rotation_lo_deg)
            throw std::invalid_argument("CaseSpec: rotation range inverted");
        if (translation_hi < translation_lo)
            throw std::invalid_argument("CaseSpec: translation range inverted");
        if (!(keep_fraction > 0.0 && keep_fraction <= 1.0))
            throw std::invalid_argument("CaseSpec: keep_fraction must be in (0, 1]");
        if (noise_sigma < 0.0 || noise_clip < 0.0)
            throw std::invalid_argument("CaseSpec: noise parameters must be nonnegative");
    }
};

// Greedy farthest-point subsampling from a seeded random start. Output points
// are a subset of the input, in selection order.
inline PointCloud fps(const PointCloud& cloud, std::size_t m, std::uint64_t seed) {
    validate_cloud(cloud);
    const std::size_t n = cloud.points.size();
    if (m < 1 || m > n) throw std::invalid_argument("fps: m must be in [1, cloud size]");

    Rng rng(seed);
    std::size_t current = static_cast<std::size_t>(rng.uniform_index(n));

    std::vector<double> min_dist2(n, std::numeric_limits<double>::infinity());
    PointCloud out;
    out.points.reserve(m);
    out.normalization = cloud.normalization;
    for (std::size_t picked = 0; picked < m; ++picked) {
        out.points.push_back(cloud.points[current]);
        if (picked + 1 == m) break;
        std::size_t best = 0;
        double best_d2 = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d2 = (cloud.points[i] - cloud.points[current]).squaredNorm();
            if (d2 < min_dist2[i]) min_dist2[i] = d2;
            if (min_dist2[i] > best_d2) {  // tie kept at the lower index
                best_d2 = min_dist2[i];
                best = i;
            }
        }
        current = best;
    }
    return out;
}

// Seeded base shape: a union of 3-6 Gaussian clusters, normalized to centroid
// 0 and unit max radius.
inline PointCloud random_blob(int num_points, Rng& rng) {
    const int clusters = 3 + static_cast<int>(rng.uniform_index(4));
    std::vector<Eigen::Vector3d> centers(static_cast<std::size_t>(clusters));
    for (auto& c : centers) c = Eigen::Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));

    PointCloud cloud;
    cloud.points.reserve(static_cast<std::size_t>(num_points));
    for (int i = 0; i < num_points; ++i) {
        const auto& c = centers[static_cast<std::size_t>(i % clusters)];
        cloud.points.emplace_back(c.x() + 0.35 * rng.normal(), c.y() + 0.35 * rng.normal(),
                                  c.z() + 0.35 * rng.normal());
    }
    return normalize_unit_sphere(cloud);
}

struct GeneratedCase {
    PointCloud source;
    PointCloud target;
    RigidMotion truth;
};

// Draws a ground-truth motion, builds target = truth(base), independently
// FPS-subsamples both sides, then jitters with clipped Gaussian noise.
// Deterministic per seed. When `base` is given it is normalized and used as
// the shape instead of a random blob.
inline GeneratedCase generate_case(const CaseSpec& spec,
                                   const std::optional<PointCloud>& base_shape = std::nullopt) {
    spec.validate();
    constexpr double deg2rad = std::numbers::pi / 180.0;
    Rng rng(spec.seed);

    PointCloud base = base_shape ? normalize_unit_sphere(*base_shape) : random_blob(spec.num_points, rng);

    GeneratedCase out;
    Eigen::Vector3d euler, trans;
    for (int d = 0; d < 3; ++d)
        euler[d] = rng.uniform(spec.rotation_lo_deg, spec.rotation_hi_deg) * deg2rad;
    for (int d = 0; d < 3; ++d) trans[d] = rng.uniform(spec.translation_lo, spec.translation_hi);
    out.truth = RigidMotion(EulerAngles(euler), trans);

    PointCloud target_full = transform_cloud(base, out.truth);
    if (spec.keep_fraction < 1.0) {
        const std::size_t m = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(spec.keep_fraction *
                                                     static_cast<double>(base.points.size()))));
        out.source = fps(base, m, rng.next_seed());
        out.target = fps(target_full, m, rng.next_seed());
    } else {
        out.source = std::move(base);
        out.target = std::move(target_full);
    }

    if (spec.noise_sigma > 0.0) {
        auto jitter = [&](PointCloud& cloud) {
            for (auto& p : cloud.points)
                for (int d = 0; d < 3; ++d)
                    p[d] += std::clamp(rng.normal() * spec.noise_sigma, -spec.noise_clip,
                                       spec.noise_clip);
        };
        jitter(out.source);
        jitter(out.target);
    }
    return out;
}

enum class PriorKind { kFixed, kCorrespondence };

struct CaseResult {
    int index = 0;
    std::uint64_t seed = 0;
    RigidMotion predicted;
    RigidMotion truth;
    TransformError error;
    double final_d_mc = 0.0;
    double runtime_sec = 0.0;
    bool failed = false;
    std::string message;
    bool prior_fallback = false;
};

struct BenchAggregate {
    // MAE is identical under pooled and per-case aggregation (equal component
    // counts); RMSE is reported both ways.
    double rmse_rotation_deg_pooled = 0.0;
    double rmse_rotation_deg_per_case = 0.0;
    double mae_rotation_deg = 0.0;
    double rmse_translation_pooled = 0.0;
    double rmse_translation_per_case = 0.0;
    double mae_translation = 0.0;
    double median_rotation_mae_deg = 0.0;
    double median_translation_mae = 0.0;
};

struct BenchReport {
    std::vector<CaseResult> cases;
    BenchAggregate aggregate;
    int failed_cases = 0;
};

namespace detail {

inline double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t mid = v.size() / 2;
    return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

inline BenchAggregate aggregate_results(const std::vector<CaseResult>& cases) {
    BenchAggregate agg;
    std::vector<double> rot_mae, trans_mae;
    double rot_ms = 0.0, rot_rmse = 0.0, trans_ms = 0.0, trans_rmse = 0.0;
    std::size_t n = 0;
    for (const auto& c : cases) {
        if (c.failed) continue;
        ++n;
        rot_ms += c.error.rmse_rotation_deg * c.error.rmse_rotation_deg;
        rot_rmse += c.error.rmse_rotation_deg;
        trans_ms += c.error.rmse_translation * c.error.rmse_translation;
        trans_rmse += c.error.rmse_translation;
        agg.mae_rotation_deg += c.error.mae_rotation_deg;
        agg.mae_translation += c.error.mae_translation;
        rot_mae.push_back(c.error.mae_rotation_deg);
        trans_mae.push_back(c.error.mae_translation);
    }
    if (n == 0) return agg;
    const double dn = static_cast<double>(n);
    agg.rmse_rotation_deg_pooled = std::sqrt(rot_ms / dn);
    agg.rmse_rotation_deg_per_case = rot_rmse / dn;
    agg.rmse_translation_pooled = std::sqrt(trans_ms / dn);
    agg.rmse_translation_per_case = trans_rmse / dn;
    agg.mae_rotation_deg /= dn;
    agg.mae_translation /= dn;
    agg.median_rotation_mae_deg = median(std::move(rot_mae));
    agg.median_translation_mae = median(std::move(trans_mae));
    return agg;
}

}  // namespace detail

// Runs every case through prior selection + CEM registration and aggregates
// the transform errors. Individual failures are recorded, not fatal.
inline BenchReport run_benchmark(const std::vector<CaseSpec>& specs, const CemConfig& cfg,
                                 PriorKind prior_kind,
                                 const CorrespondencePriorOptions& prior_opts = {}) {
    if (specs.empty()) throw std::invalid_argument("run_benchmark: need at least one case");
    BenchReport report;
    report.cases.resize(specs.size());
    for (std::size_t i = 0; i < specs.size(); ++i) {
        CaseResult& res = report.cases[i];
        res.index = static_cast<int>(i);
        res.seed = specs[i].seed;
        const auto start = std::chrono::steady_clock::now();
        try {
            const GeneratedCase gen = generate_case(specs[i]);
            res.truth = gen.truth;
            RegistrationState state = make_state(gen.source, gen.target);

            SamplingDistribution prior;
            if (prior_kind == PriorKind::kCorrespondence) {
                PriorResult pr = correspondence_prior(state, covariance_feature_fn(), prior_opts);
                prior = pr.dist;
                res.prior_fallback = pr.fallback;
            } else {
                prior = default_prior(cfg.sigma_floor);
            }

            CemConfig case_cfg = cfg;
            case_cfg.rng_seed = specs[i].seed;
            CemResult cem = cem_register(state, prior, case_cfg);
            res.predicted = cem.motion;
            res.error = transform_error(res.predicted, res.truth);
            res.final_d_mc = d_mc(apply_motion(state, res.predicted), RewardParams(cfg.epsilon));
        } catch (const std::exception& e) {
            res.failed = true;
            res.message = e.what();
            ++report.failed_cases;
        }
        res.runtime_sec =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    report.aggregate = detail::aggregate_results(report.cases);
    return report;
}

}  // namespace cemreg
