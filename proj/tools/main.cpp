#include <chrono>
#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cemreg/io.hpp"
#include "cemreg/selftest.hpp"

namespace {

using namespace cemreg;

// Shared normalization frame from the union of both clouds, so their relative
// pose is preserved.
Normalization joint_normalization(const PointCloud& a, const PointCloud& b) {
    PointCloud merged;
    merged.points.reserve(a.points.size() + b.points.size());
    merged.points.insert(merged.points.end(), a.points.begin(), a.points.end());
    merged.points.insert(merged.points.end(), b.points.begin(), b.points.end());
    return *normalize_unit_sphere(merged).normalization;
}

SamplingDistribution make_prior(const RunConfig& cfg, const RegistrationState& state,
                                bool& fallback) {
    fallback = false;
    if (cfg.prior == "correspondence") {
        CorrespondencePriorOptions opts;
        opts.sigma_scale_rotation = cfg.prior_sigma_scale_rotation;
        opts.sigma_scale_translation = cfg.prior_sigma_scale_translation;
        opts.sigma_floor = cfg.cem.sigma_floor;
        PriorResult pr =
            correspondence_prior(state, covariance_feature_fn(cfg.prior_logit_scale), opts);
        fallback = pr.fallback;
        return pr.dist;
    }
    return fixed_prior(cfg.prior_mu0, cfg.prior_sigma0, cfg.cem.sigma_floor);
}

int cmd_register(const std::string& source_path, const std::string& target_path,
                 const std::string& config_path, const std::string& out_path, bool final_icp_flag,
                 bool normalize_flag) {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
    if (final_icp_flag) cfg.final_icp = true;
    if (normalize_flag) cfg.normalize = true;

    PointCloud source = load_cloud(source_path);
    PointCloud target = load_cloud(target_path);
    if (cfg.normalize) {
        const Normalization norm = joint_normalization(source, target);
        source = apply_normalization(source, norm);
        target = apply_normalization(target, norm);
    }

    const auto start = std::chrono::steady_clock::now();
    RegistrationState state = make_state(std::move(source), std::move(target));

    RegistrationReport report;
    report.config = cfg;
    SamplingDistribution prior = make_prior(cfg, state, report.prior_fallback);

    CemResult result = cem_register(state, prior, cfg.cem);
    RigidMotion motion = result.motion;
    if (cfg.final_icp) {
        const IcpResult refined = icp(apply_motion(state, motion), cfg.cem.icp);
        motion = compose(refined.motion, motion);
    }

    const RegistrationState final_state = apply_motion(state, motion);
    report.predicted = motion;
    report.trace = std::move(result.trace);
    report.final_d_mc = d_mc(final_state, RewardParams(cfg.cem.epsilon));
    report.final_chamfer = chamfer(final_state);
    report.robust_loss = robust_alignment_loss(final_state, cfg.loss_mu);
    report.total_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const json j = report_to_json(report);
    if (out_path.empty())
        std::cout << j.dump(2) << "\n";
    else
        save_json(j, out_path);
    return 0;
}

int cmd_bench(int cases, std::uint64_t seed, const std::string& config_path, bool partial,
              bool noise, int num_points, const std::string& out_path) {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);

    CaseSpec base;
    base.num_points = num_points;
    base.keep_fraction = partial ? 0.75 : 1.0;
    base.noise_sigma = noise ? 0.01 : 0.0;
    base.noise_clip = noise ? 0.05 : 0.0;

    Rng seeder(seed);
    std::vector<CaseSpec> specs(static_cast<std::size_t>(cases), base);
    for (auto& s : specs) s.seed = seeder.next_seed();

    const PriorKind kind =
        cfg.prior == "correspondence" ? PriorKind::kCorrespondence : PriorKind::kFixed;
    CorrespondencePriorOptions opts;
    opts.sigma_scale_rotation = cfg.prior_sigma_scale_rotation;
    opts.sigma_scale_translation = cfg.prior_sigma_scale_translation;
    opts.sigma_floor = cfg.cem.sigma_floor;

    const BenchReport report = run_benchmark(specs, cfg.cem, kind, opts);
    const json j = bench_report_to_json(report, cfg, cases, seed, base);
    if (out_path.empty())
        std::cout << j.dump(2) << "\n";
    else
        save_json(j, out_path);
    return report.failed_cases == 0 ? 0 : 2;
}

int cmd_icp(const std::string& source_path, const std::string& target_path, int max_iters,
            double tol, bool normalize_flag, const std::string& out_path) {
    PointCloud source = load_cloud(source_path);
    PointCloud target = load_cloud(target_path);
    if (normalize_flag) {
        const Normalization norm = joint_normalization(source, target);
        source = apply_normalization(source, norm);
        target = apply_normalization(target, norm);
    }
    RegistrationState state = make_state(std::move(source), std::move(target));
    const IcpResult result = icp(state, IcpConfig(max_iters, tol));

    json j;
    j["tool"] = kToolName;
    j["version"] = kToolVersion;
    j["predicted"] = detail::motion_to_json(result.motion);
    j["final_mse"] = result.final_mse;
    j["iterations"] = result.mse_history.size();
    j["degenerate"] = result.degenerate;
    if (out_path.empty())
        std::cout << j.dump(2) << "\n";
    else
        save_json(j, out_path);
    return 0;
}

int cmd_selftest() {
    bool all_ok = true;
    for (const auto& suite : run_selftests()) {
        std::cout << suite.name << ": " << suite.passed << "/" << suite.total
                  << (suite.ok() ? " ok" : " FAILED") << "\n";
        all_ok = all_ok && suite.ok();
    }
    return all_ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Point cloud registration via sampling-distribution-guided cross-entropy search"};
    app.require_subcommand(1);

    std::string source_path, target_path, config_path, out_path;
    bool final_icp_flag = false, normalize_flag = false;
    auto* reg = app.add_subcommand("register", "Register a source cloud onto a target cloud");
    reg->add_option("--source", source_path, "Source cloud file (.ply ascii or .xyz)")->required();
    reg->add_option("--target", target_path, "Target cloud file (.ply ascii or .xyz)")->required();
    reg->add_option("--config", config_path, "JSON config file");
    reg->add_option("--out", out_path, "Write the report JSON here (default stdout)");
    reg->add_flag("--final-icp", final_icp_flag, "Refine the returned mean with ICP");
    reg->add_flag("--normalize", normalize_flag, "Jointly normalize both clouds to the unit sphere");

    int bench_cases = 10, bench_points = 1024;
    std::uint64_t bench_seed = 0;
    bool bench_partial = false, bench_noise = false;
    std::string bench_config, bench_out;
    auto* bench = app.add_subcommand("bench", "Run the synthetic benchmark suite");
    bench->add_option("--cases", bench_cases, "Number of cases")->required();
    bench->add_option("--seed", bench_seed, "Master seed")->required();
    bench->add_option("--config", bench_config, "JSON config file");
    bench->add_option("--points", bench_points, "Points per base cloud");
    bench->add_flag("--partial", bench_partial, "Subsample both clouds to 75% via FPS");
    bench->add_flag("--noise", bench_noise, "Add clipped Gaussian noise (sigma 0.01, clip 0.05)");
    bench->add_option("--out", bench_out, "Write the report JSON here (default stdout)");

    std::string icp_source, icp_target, icp_out;
    int icp_iters = 50;
    double icp_tol = 1e-12;
    bool icp_normalize = false;
    auto* icp_cmd = app.add_subcommand("icp", "Plain ICP baseline");
    icp_cmd->add_option("--source", icp_source, "Source cloud file")->required();
    icp_cmd->add_option("--target", icp_target, "Target cloud file")->required();
    icp_cmd->add_option("--max-iters", icp_iters, "Iteration cap");
    icp_cmd->add_option("--tol", icp_tol, "MSE improvement tolerance");
    icp_cmd->add_flag("--normalize", icp_normalize, "Jointly normalize both clouds");
    icp_cmd->add_option("--out", icp_out, "Write the result JSON here (default stdout)");

    auto* selftest = app.add_subcommand("selftest", "Run the built-in invariant suites");
    (void)selftest;

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand("register"))
            return cmd_register(source_path, target_path, config_path, out_path, final_icp_flag,
                                normalize_flag);
        if (app.got_subcommand("bench"))
            return cmd_bench(bench_cases, bench_seed, bench_config, bench_partial, bench_noise,
                             bench_points, bench_out);
        if (app.got_subcommand("icp"))
            return cmd_icp(icp_source, icp_target, icp_iters, icp_tol, icp_normalize, icp_out);
        if (app.got_subcommand("selftest")) return cmd_selftest();
    } catch (const cemreg::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const cemreg::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
