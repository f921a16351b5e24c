#include "dpsl/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "dpsl/adam.hpp"
#include "dpsl/rng.hpp"

namespace dpsl::harness {

namespace {

using nlohmann::json;

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& ctx) {
    if (!j.is_object())
        throw ConfigError(ctx + ": expected an object");
    for (const auto& [key, _] : j.items()) {
        if (std::find_if(allowed.begin(), allowed.end(),
                         [&](const char* a) { return key == a; }) == allowed.end())
            throw ConfigError(ctx + ": unknown key '" + key + "'");
    }
}

template <typename T>
T require(const json& j, const char* key, const std::string& ctx) {
    if (!j.contains(key))
        throw ConfigError(ctx + ": missing key '" + std::string(key) + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(ctx + ": bad value for '" + std::string(key) + "'");
    }
}

template <typename T>
T optional_or(const json& j, const char* key, T fallback, const std::string& ctx) {
    if (!j.contains(key))
        return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(ctx + ": bad value for '" + std::string(key) + "'");
    }
}

DirichletPrior parse_prior(const json& j, const std::string& ctx) {
    try {
        if (j.is_array()) {
            Eigen::VectorXd alpha(static_cast<Eigen::Index>(j.size()));
            for (Eigen::Index i = 0; i < alpha.size(); ++i)
                alpha[i] = j.at(static_cast<std::size_t>(i)).get<double>();
            return DirichletPrior(std::move(alpha));
        }
        if (j.is_object() && j.contains("symmetric")) {
            check_keys(j, {"symmetric"}, ctx);
            const json& s = j.at("symmetric");
            check_keys(s, {"k", "alpha"}, ctx + ".symmetric");
            const auto k = require<Eigen::Index>(s, "k", ctx);
            const auto a = require<double>(s, "alpha", ctx);
            return DirichletPrior(Eigen::VectorXd::Constant(k, a));
        }
    } catch (const std::exception& e) {
        throw ConfigError(ctx + ": " + e.what());
    }
    throw ConfigError(ctx + ": prior must be an array or {\"symmetric\": {...}}");
}

shaping::ShapingConfig parse_shaping(const json& j) {
    check_keys(j, {"lambda", "clamp_eps", "priors", "layer_reduction"}, "shaping");
    shaping::ShapingConfig cfg;
    cfg.lambda = optional_or<double>(j, "lambda", 0.01, "shaping");
    cfg.clamp_eps = optional_or<double>(j, "clamp_eps", 1e-7, "shaping");
    if (cfg.lambda < 0.0)
        throw ConfigError("shaping: lambda must be nonnegative");
    if (!(cfg.clamp_eps > 0.0 && cfg.clamp_eps < 0.01))
        throw ConfigError("shaping: clamp_eps must lie in (0, 0.01)");
    const std::string red = optional_or<std::string>(j, "layer_reduction", "sum", "shaping");
    if (red == "sum")
        cfg.layer_reduction = shaping::LayerReduction::Sum;
    else if (red == "mean")
        cfg.layer_reduction = shaping::LayerReduction::Mean;
    else
        throw ConfigError("shaping: layer_reduction must be 'sum' or 'mean'");
    if (j.contains("priors")) {
        if (!j.at("priors").is_object())
            throw ConfigError("shaping.priors: expected an object keyed by source tag");
        for (const auto& [tag, spec] : j.at("priors").items())
            cfg.priors.emplace(tag, parse_prior(spec, "shaping.priors." + tag));
    }
    return cfg;
}

std::vector<SourceSpec> parse_sources(const json& j) {
    if (!j.is_array() || j.empty())
        throw ConfigError("sources: expected a non-empty array");
    std::vector<SourceSpec> out;
    for (const auto& s : j) {
        check_keys(s, {"tag", "count"}, "sources[]");
        SourceSpec spec;
        spec.tag = require<std::string>(s, "tag", "sources[]");
        spec.count = require<Eigen::Index>(s, "count", "sources[]");
        if (spec.count < 1)
            throw ConfigError("sources[]: count must be >= 1");
        out.push_back(std::move(spec));
    }
    return out;
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
    Eigen::MatrixXd probs(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const double m = logits.row(r).maxCoeff();
        Eigen::ArrayXd e = (logits.row(r).array() - m).exp();
        probs.row(r) = (e / e.sum()).matrix();
    }
    return probs;
}

void ensure_finite(double loss) {
    if (!std::isfinite(loss))
        throw NumericError("run: loss became non-finite");
}

std::vector<double> cvm_per_category(const shaping::ProbBatch& batch,
                                     const shaping::ShapingConfig& cfg,
                                     const std::string& tag) {
    auto it = cfg.priors.find(tag);
    if (it == cfg.priors.end())
        it = cfg.priors.find("default");
    std::vector<double> out;
    if (it == cfg.priors.end())
        return out;
    const DirichletPrior& prior = it->second;
    for (Eigen::Index k = 0; k < batch.probs.cols(); ++k) {
        std::vector<double> vals;
        for (Eigen::Index r = 0; r < batch.probs.rows(); ++r)
            if (batch.tags.empty() || batch.tags[static_cast<std::size_t>(r)] == tag)
                vals.push_back(std::clamp(batch.probs(r, k), cfg.clamp_eps, 1.0 - cfg.clamp_eps));
        Eigen::Map<Eigen::VectorXd> col(vals.data(), static_cast<Eigen::Index>(vals.size()));
        out.push_back(shaping::cvm_distance(col, prior.marginal(k)));
    }
    return out;
}

} // namespace

ExperimentConfig parse_config(const json& doc) {
    check_keys(doc,
               {"kind", "seed", "steps", "lr", "categories", "init_scale", "features",
                "expert_hidden", "noise_sigma", "moe", "regularizer", "regularizer_steps",
                "task", "shaping", "sources"},
               "config");
    ExperimentConfig cfg;
    const std::string kind = require<std::string>(doc, "kind", "config");
    if (kind == "shape-toy")
        cfg.kind = ExperimentKind::ShapeToy;
    else if (kind == "router-sim")
        cfg.kind = ExperimentKind::RouterSim;
    else if (kind == "upcycle-check")
        cfg.kind = ExperimentKind::UpcycleCheck;
    else
        throw ConfigError("config: unknown kind '" + kind + "'");

    cfg.seed = optional_or<std::uint64_t>(doc, "seed", 0, "config");
    cfg.steps = optional_or<long>(doc, "steps", 100, "config");
    if (cfg.steps < 1)
        throw ConfigError("config: steps must be >= 1");
    cfg.lr = optional_or<double>(doc, "lr", cfg.kind == ExperimentKind::ShapeToy ? 0.1 : 2e-3,
                                 "config");
    cfg.categories = optional_or<Eigen::Index>(doc, "categories", 3, "config");
    cfg.init_scale = optional_or<double>(doc, "init_scale", 0.1, "config");
    cfg.features = optional_or<Eigen::Index>(doc, "features", 16, "config");
    cfg.expert_hidden = optional_or<Eigen::Index>(doc, "expert_hidden", 32, "config");
    cfg.noise_sigma = optional_or<double>(doc, "noise_sigma", 0.01, "config");
    cfg.regularizer_steps = optional_or<long>(doc, "regularizer_steps", -1, "config");
    cfg.task = optional_or<bool>(doc, "task", false, "config");

    if (doc.contains("moe")) {
        const json& m = doc.at("moe");
        check_keys(m, {"n_experts", "top_k", "n_shared", "renormalize_gates"}, "moe");
        cfg.moe.n_experts = optional_or<Eigen::Index>(m, "n_experts", 4, "moe");
        cfg.moe.top_k = optional_or<Eigen::Index>(m, "top_k", 2, "moe");
        cfg.moe.n_shared = optional_or<Eigen::Index>(m, "n_shared", 0, "moe");
        cfg.moe.renormalize_gates = optional_or<bool>(m, "renormalize_gates", false, "moe");
        if (cfg.moe.top_k < 1 || cfg.moe.top_k > cfg.moe.n_experts || cfg.moe.n_shared < 0)
            throw ConfigError("moe: require 1 <= top_k <= n_experts and n_shared >= 0");
    }

    if (doc.contains("regularizer")) {
        const json& r = doc.at("regularizer");
        check_keys(r, {"kind", "weight", "update_rate"}, "regularizer");
        const std::string rk = require<std::string>(r, "kind", "regularizer");
        if (rk == "none") cfg.regularizer = RegularizerKind::None;
        else if (rk == "dpsl") cfg.regularizer = RegularizerKind::Dpsl;
        else if (rk == "load-balance") cfg.regularizer = RegularizerKind::LoadBalance;
        else if (rk == "z-loss") cfg.regularizer = RegularizerKind::ZLoss;
        else if (rk == "deepseek") cfg.regularizer = RegularizerKind::DeepSeek;
        else throw ConfigError("regularizer: unknown kind '" + rk + "'");
        cfg.regularizer_weight = optional_or<double>(
            r, "weight",
            cfg.regularizer == RegularizerKind::LoadBalance ? 0.01
            : cfg.regularizer == RegularizerKind::ZLoss    ? 0.001
                                                           : 1.0,
            "regularizer");
        cfg.deepseek_update_rate = optional_or<double>(r, "update_rate", 0.001, "regularizer");
    }

    if (doc.contains("shaping"))
        cfg.shaping = parse_shaping(doc.at("shaping"));
    if (doc.contains("sources"))
        cfg.sources = parse_sources(doc.at("sources"));

    cfg.echo = doc;
    return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file: " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    return parse_config(doc);
}

RunReport run_shape_toy(const ExperimentConfig& config) {
    if (config.kind != ExperimentKind::ShapeToy)
        throw ConfigError("run_shape_toy: config kind must be shape-toy");
    if (config.sources.empty())
        throw ConfigError("run_shape_toy: at least one source required");
    const Eigen::Index k = config.categories;
    if (k < 2)
        throw ConfigError("run_shape_toy: categories must be >= 2");

    Eigen::Index b = 0;
    std::vector<std::string> tags;
    for (const auto& s : config.sources) {
        b += s.count;
        tags.insert(tags.end(), static_cast<std::size_t>(s.count), s.tag);
        // fail fast on a missing or mismatched prior
        auto it = config.shaping.priors.find(s.tag);
        if (it == config.shaping.priors.end())
            it = config.shaping.priors.find("default");
        if (it == config.shaping.priors.end())
            throw ConfigError("run_shape_toy: no prior for source '" + s.tag + "'");
        if (it->second.size() != k)
            throw ConfigError("run_shape_toy: prior dimension mismatch for '" + s.tag + "'");
    }

    SplitMix64 rng(config.seed);
    Eigen::MatrixXd logits(b, k);
    for (Eigen::Index r = 0; r < b; ++r)
        for (Eigen::Index c = 0; c < k; ++c)
            logits(r, c) = config.init_scale * rng.normal();

    AdamState state = AdamState::for_shape(b, k, config.lr);
    RunReport report;
    report.config_echo = config.echo;

    shaping::ProbBatch batch;
    batch.tags = tags;
    for (long step = 0; step < config.steps; ++step) {
        batch.probs = softmax_rows(logits);
        const double loss = shaping::dpsl_loss(batch, config.shaping);
        ensure_finite(loss);
        report.loss_trace.push_back(loss);

        const Eigen::MatrixXd gprobs = shaping::dpsl_grad(batch, config.shaping);
        Eigen::MatrixXd glogits(b, k);
        for (Eigen::Index r = 0; r < b; ++r)
            glogits.row(r) =
                softmax_chain(batch.probs.row(r).transpose(), gprobs.row(r).transpose())
                    .transpose();
        adam_step(logits, glogits, state);
    }

    batch.probs = softmax_rows(logits);
    report.final_probs = batch;
    report.priors = config.shaping.priors;

    json mean_probs = json::object();
    json vertex_dist = json::object();
    for (const auto& s : config.sources) {
        report.cvm_final[s.tag] = cvm_per_category(batch, config.shaping, s.tag);
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(k);
        double dist = 0.0;
        Eigen::Index n = 0;
        for (Eigen::Index r = 0; r < b; ++r) {
            if (tags[static_cast<std::size_t>(r)] != s.tag)
                continue;
            mean += batch.probs.row(r).transpose();
            double best = std::numeric_limits<double>::infinity();
            for (Eigen::Index v = 0; v < k; ++v) {
                Eigen::VectorXd vert = Eigen::VectorXd::Zero(k);
                vert[v] = 1.0;
                best = std::min(best, (batch.probs.row(r).transpose() - vert).norm());
            }
            dist += best;
            ++n;
        }
        mean /= static_cast<double>(n);
        std::vector<double> mv(mean.data(), mean.data() + mean.size());
        mean_probs[s.tag] = mv;
        vertex_dist[s.tag] = dist / static_cast<double>(n);
    }
    report.summary["mean_probs"] = mean_probs;
    report.summary["mean_vertex_distance"] = vertex_dist;
    return report;
}

RunReport run_router_sim(const ExperimentConfig& config) {
    if (config.kind != ExperimentKind::RouterSim)
        throw ConfigError("run_router_sim: config kind must be router-sim");
    if (config.sources.empty())
        throw ConfigError("run_router_sim: at least one source required");
    const Eigen::Index n = config.moe.n_experts;
    const Eigen::Index d = config.features;
    if (config.regularizer == RegularizerKind::Dpsl) {
        if (config.shaping.priors.empty())
            throw ConfigError("run_router_sim: dpsl regularizer requires shaping priors");
        for (const auto& [tag, prior] : config.shaping.priors)
            if (prior.size() != n)
                throw ConfigError("run_router_sim: prior dimension must equal n_experts");
    }

    SplitMix64 rng(config.seed);

    // synthetic token clusters, one Gaussian per source
    Eigen::Index t_total = 0;
    for (const auto& s : config.sources)
        t_total += s.count;
    Eigen::MatrixXd tokens(t_total, d);
    Eigen::MatrixXd targets(t_total, d);
    std::vector<std::string> tags;
    tags.reserve(static_cast<std::size_t>(t_total));
    {
        Eigen::Index row = 0;
        for (const auto& s : config.sources) {
            Eigen::VectorXd mean(d), target(d);
            for (Eigen::Index i = 0; i < d; ++i) mean[i] = 2.0 * rng.normal();
            for (Eigen::Index i = 0; i < d; ++i) target[i] = rng.normal();
            for (Eigen::Index t = 0; t < s.count; ++t, ++row) {
                for (Eigen::Index i = 0; i < d; ++i)
                    tokens(row, i) = mean[i] + rng.normal();
                targets.row(row) = target.transpose();
                tags.push_back(s.tag);
            }
        }
    }

    // noise-upcycled experts on top of a random dense FFN; experts stay fixed,
    // only the router trains
    GatedFFN dense;
    dense.act = Nonlinearity::SiLU;
    const double w_scale = 1.0 / std::sqrt(static_cast<double>(d));
    dense.w_up.resize(d, config.expert_hidden);
    dense.w_gate.resize(d, config.expert_hidden);
    dense.w_down.resize(config.expert_hidden, d);
    for (Eigen::Index r = 0; r < d; ++r)
        for (Eigen::Index c = 0; c < config.expert_hidden; ++c) {
            dense.w_up(r, c) = w_scale * rng.normal();
            dense.w_gate(r, c) = w_scale * rng.normal();
        }
    for (Eigen::Index r = 0; r < config.expert_hidden; ++r)
        for (Eigen::Index c = 0; c < d; ++c)
            dense.w_down(r, c) = w_scale * rng.normal();

    upcycle::UpcycleConfig ucfg;
    ucfg.n_experts = n;
    ucfg.granularity = 1;
    ucfg.noise_sigma = config.noise_sigma;
    ucfg.seed = rng.next_u64();
    const ExpertSet experts = upcycle::standard_upcycle(dense, ucfg);
    std::vector<Eigen::MatrixXd> expert_out;
    if (config.task) {
        expert_out.reserve(experts.size());
        for (const auto& e : experts)
            expert_out.push_back(e.forward(tokens));
    }

    moe::RouterParams router;
    router.w_g.resize(d, n);
    for (Eigen::Index r = 0; r < d; ++r)
        for (Eigen::Index c = 0; c < n; ++c)
            router.w_g(r, c) = 0.01 * rng.normal();

    moe::DeepSeekBalancer balancer{Eigen::VectorXd::Zero(n), config.deepseek_update_rate};
    AdamState state = AdamState::for_shape(d, n, config.lr);

    const long reg_steps = config.regularizer_steps < 0 ? config.steps : config.regularizer_steps;
    const double tf = static_cast<double>(t_total);

    RunReport report;
    report.config_echo = config.echo;
    report.aux_names = {"task_loss", "regularizer_loss"};

    shaping::ProbBatch batch;
    batch.tags = tags;
    for (long step = 0; step < config.steps; ++step) {
        const moe::RouterOutput routed = moe::router_forward(tokens, router);
        batch.probs = routed.probs.probs;

        Eigen::MatrixXd gprobs = Eigen::MatrixXd::Zero(t_total, n);
        Eigen::MatrixXd glogits = Eigen::MatrixXd::Zero(t_total, n);
        double task_loss = 0.0;
        double reg_loss = 0.0;
        const bool apply_reg = step < reg_steps;

        if (config.task) {
            const Eigen::VectorXd* bias =
                config.regularizer == RegularizerKind::DeepSeek ? &balancer.biases : nullptr;
            for (Eigen::Index t = 0; t < t_total; ++t) {
                const auto [idx, gates] = moe::top_k_select(
                    batch.probs.row(t).transpose(), config.moe.top_k,
                    config.moe.renormalize_gates,
                    bias ? *bias : Eigen::VectorXd());
                Eigen::VectorXd y = Eigen::VectorXd::Zero(d);
                for (Eigen::Index i = 0; i < config.moe.top_k; ++i)
                    y += gates[i] *
                         expert_out[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])]
                             .row(t)
                             .transpose();
                const Eigen::VectorXd resid = y - targets.row(t).transpose();
                task_loss += resid.squaredNorm() / tf;
                for (Eigen::Index i = 0; i < config.moe.top_k; ++i) {
                    const auto e = static_cast<std::size_t>(idx[static_cast<std::size_t>(i)]);
                    gprobs(t, idx[static_cast<std::size_t>(i)]) +=
                        (2.0 / tf) * resid.dot(expert_out[e].row(t).transpose());
                }
            }
        }

        if (apply_reg) {
            switch (config.regularizer) {
                case RegularizerKind::None:
                    break;
                case RegularizerKind::Dpsl:
                    reg_loss = shaping::dpsl_loss(batch, config.shaping);
                    gprobs += shaping::dpsl_grad(batch, config.shaping);
                    break;
                case RegularizerKind::LoadBalance: {
                    const auto stats = moe::compute_load_stats(batch, config.moe);
                    reg_loss = config.regularizer_weight *
                               moe::load_balancing_loss(stats, config.moe.top_k);
                    // gradient flows through the mean-probability factor only
                    const double scale = config.regularizer_weight * static_cast<double>(n) /
                                         (static_cast<double>(config.moe.top_k) * tf);
                    for (Eigen::Index t = 0; t < t_total; ++t)
                        gprobs.row(t) += scale * stats.f.transpose();
                    break;
                }
                case RegularizerKind::ZLoss: {
                    reg_loss = config.regularizer_weight * moe::z_loss(routed.logits);
                    for (Eigen::Index t = 0; t < t_total; ++t) {
                        const double m = routed.logits.row(t).maxCoeff();
                        const double lse =
                            m + std::log((routed.logits.row(t).array() - m).exp().sum());
                        glogits.row(t) += config.regularizer_weight * (2.0 * lse / tf) *
                                          batch.probs.row(t);
                    }
                    break;
                }
                case RegularizerKind::DeepSeek: {
                    const auto stats =
                        moe::compute_load_stats(batch, config.moe, balancer.biases);
                    balancer = moe::deepseek_update(balancer, stats);
                    break;
                }
            }
        }

        const double loss = task_loss + reg_loss;
        ensure_finite(loss);
        report.loss_trace.push_back(loss);
        report.aux_trace.push_back({task_loss, reg_loss});

        for (Eigen::Index t = 0; t < t_total; ++t)
            glogits.row(t) +=
                softmax_chain(batch.probs.row(t).transpose(), gprobs.row(t).transpose())
                    .transpose();
        Eigen::MatrixXd grad_w = tokens.transpose() * glogits;
        adam_step(router.w_g, grad_w, state);
    }

    const moe::RouterOutput routed = moe::router_forward(tokens, router);
    batch.probs = routed.probs.probs;
    report.final_probs = batch;
    report.priors = config.shaping.priors;

    const auto stats = moe::compute_load_stats(
        batch, config.moe,
        config.regularizer == RegularizerKind::DeepSeek ? balancer.biases
                                                        : Eigen::VectorXd());
    report.cov_per_layer = {moe::cov(stats.loads)};

    // summary statistics used by the routing-distribution analysis
    double max_mean = 0.0, max_sq = 0.0;
    Eigen::Index near_uniform = 0;
    for (Eigen::Index t = 0; t < t_total; ++t) {
        const double mx = batch.probs.row(t).maxCoeff();
        max_mean += mx;
        max_sq += mx * mx;
        for (Eigen::Index i = 0; i < n; ++i)
            if (std::fabs(batch.probs(t, i) - 1.0 / static_cast<double>(n)) <= 0.05)
                ++near_uniform;
    }
    max_mean /= tf;
    report.summary["max_prob_mean"] = max_mean;
    report.summary["max_prob_std"] = std::sqrt(std::max(0.0, max_sq / tf - max_mean * max_mean));
    report.summary["uniform_fraction"] =
        static_cast<double>(near_uniform) / (tf * static_cast<double>(n));
    report.summary["final_cov"] = report.cov_per_layer[0];

    json spec_matrix = json::object();
    for (const auto& s : config.sources) {
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
        Eigen::Index cnt = 0;
        for (Eigen::Index t = 0; t < t_total; ++t)
            if (tags[static_cast<std::size_t>(t)] == s.tag) {
                mean += batch.probs.row(t).transpose();
                ++cnt;
            }
        mean /= static_cast<double>(cnt);
        spec_matrix[s.tag] = std::vector<double>(mean.data(), mean.data() + mean.size());
        if (config.regularizer == RegularizerKind::Dpsl)
            report.cvm_final[s.tag] = cvm_per_category(batch, config.shaping, s.tag);
    }
    report.summary["specialization"] = spec_matrix;
    return report;
}

} // namespace dpsl::harness
