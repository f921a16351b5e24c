#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "dpsl/experiment.hpp"
#include "dpsl/report.hpp"
#include "dpsl/rng.hpp"
#include "dpsl/specfun.hpp"
#include "dpsl/upcycle.hpp"

namespace {

using dpsl::harness::ConfigError;
using dpsl::harness::NumericError;

int run_experiment(const std::string& config_path, const std::string& out_dir,
                   std::optional<std::uint64_t> seed_override, bool router) {
    auto cfg = dpsl::harness::parse_config_file(config_path);
    if (seed_override) {
        cfg.seed = *seed_override;
        cfg.echo["seed"] = *seed_override;
    }
    dpsl::harness::RunReport report =
        router ? dpsl::harness::run_router_sim(cfg) : dpsl::harness::run_shape_toy(cfg);
    const auto manifest = dpsl::harness::emit_report(report, out_dir);
    std::cout << "wrote " << manifest.size() << " files to " << out_dir
              << " (final loss " << report.loss_trace.back() << ")\n";
    return 0;
}

int run_upcycle_check(Eigen::Index granularity, Eigen::Index experts, double sigma,
                      std::uint64_t seed) {
    dpsl::SplitMix64 rng(seed);
    dpsl::GatedFFN dense;
    dense.act = dpsl::Nonlinearity::SiLU;
    const Eigen::Index d = 16, h = 32;
    dense.w_up.resize(d, h);
    dense.w_gate.resize(d, h);
    dense.w_down.resize(h, d);
    for (Eigen::Index r = 0; r < d; ++r)
        for (Eigen::Index c = 0; c < h; ++c) {
            dense.w_up(r, c) = 0.25 * rng.normal();
            dense.w_gate(r, c) = 0.25 * rng.normal();
        }
    for (Eigen::Index r = 0; r < h; ++r)
        for (Eigen::Index c = 0; c < d; ++c)
            dense.w_down(r, c) = 0.25 * rng.normal();

    dpsl::upcycle::UpcycleConfig cfg;
    cfg.n_experts = experts;
    cfg.granularity = granularity;
    cfg.noise_sigma = sigma;
    cfg.seed = seed + 1;
    const auto expert_set = granularity == 1 ? dpsl::upcycle::standard_upcycle(dense, cfg)
                                             : dpsl::upcycle::granular_upcycle(dense, cfg);
    const double dev = dpsl::upcycle::equivalence_check(dense, expert_set, cfg, 1000, seed + 2);
    std::cout << "experts=" << experts << " granularity=" << granularity
              << " sigma=" << sigma << " max_abs_deviation=" << dev << '\n';
    return 0;
}

int run_specfun_table(const std::string& out_path) {
    std::ofstream out(out_path);
    if (!out)
        throw std::runtime_error("cannot open output file: " + out_path);
    out << "x,a,b,pdf,cdf\n";
    const double shapes[] = {0.2, 0.5, 0.75, 1.0, 1.5, 3.0, 5.0};
    for (double a : shapes)
        for (double b : shapes) {
            const dpsl::specfun::BetaParams p{a, b};
            auto emit = [&](double x) {
                out << dpsl::harness::fmt17(x) << ',' << dpsl::harness::fmt17(a) << ','
                    << dpsl::harness::fmt17(b) << ','
                    << dpsl::harness::fmt17(dpsl::specfun::beta_pdf(x, p)) << ','
                    << dpsl::harness::fmt17(dpsl::specfun::beta_cdf(x, p)) << '\n';
            };
            emit(0.01);
            for (int i = 1; i <= 19; ++i)
                emit(0.05 * i);
            emit(0.99);
        }
    std::cout << "wrote " << out_path << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dirichlet-prior shaping experiments"};
    app.require_subcommand(1);

    std::string config_path, out_dir, table_out;
    std::optional<std::uint64_t> seed_override;
    Eigen::Index granularity = 1, experts = 4;
    double sigma = 0.0;
    std::uint64_t uc_seed = 0;

    auto* shape = app.add_subcommand("shape-toy", "probability shaping toy experiment");
    shape->add_option("--config", config_path)->required();
    shape->add_option("--out", out_dir)->required();
    shape->add_option("--seed", seed_override);

    auto* router = app.add_subcommand("router-sim", "MoE router distribution study");
    router->add_option("--config", config_path)->required();
    router->add_option("--out", out_dir)->required();
    router->add_option("--seed", seed_override);

    auto* upcheck = app.add_subcommand("upcycle-check", "dense/MoE equivalence check");
    upcheck->add_option("--granularity", granularity);
    upcheck->add_option("--experts", experts);
    upcheck->add_option("--sigma", sigma);
    upcheck->add_option("--seed", uc_seed);

    auto* table = app.add_subcommand("specfun-table", "dump Beta pdf/cdf regression grid");
    table->add_option("--out", table_out)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (shape->parsed())
            return run_experiment(config_path, out_dir, seed_override, false);
        if (router->parsed())
            return run_experiment(config_path, out_dir, seed_override, true);
        if (upcheck->parsed())
            return run_upcycle_check(granularity, experts, sigma, uc_seed);
        if (table->parsed())
            return run_specfun_table(table_out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
