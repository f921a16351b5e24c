#include "dpsl/upcycle.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace dpsl::upcycle {

namespace {

void add_noise(Eigen::MatrixXd& w, double sigma, SplitMix64& rng) {
    for (Eigen::Index r = 0; r < w.rows(); ++r)
        for (Eigen::Index c = 0; c < w.cols(); ++c)
            w(r, c) += sigma * rng.normal();
}

void reinit_entries(Eigen::MatrixXd& w, double ratio, SplitMix64& rng) {
    const double n = static_cast<double>(w.size());
    const double std_dev = std::sqrt((w.array() - w.mean()).square().sum() / n);
    for (Eigen::Index r = 0; r < w.rows(); ++r)
        for (Eigen::Index c = 0; c < w.cols(); ++c)
            if (rng.next_double() < ratio)
                w(r, c) = std_dev * rng.normal();
}

void perturb(GatedFFN& e, const UpcycleConfig& config, SplitMix64& rng) {
    if (config.reinit_ratio > 0.0) {
        reinit_entries(e.w_up, config.reinit_ratio, rng);
        reinit_entries(e.w_gate, config.reinit_ratio, rng);
        reinit_entries(e.w_down, config.reinit_ratio, rng);
    }
    if (config.noise_sigma > 0.0) {
        add_noise(e.w_up, config.noise_sigma, rng);
        add_noise(e.w_gate, config.noise_sigma, rng);
        add_noise(e.w_down, config.noise_sigma, rng);
    }
}

GatedFFN take_shard(const GatedFFN& ffn, Eigen::Index shard, Eigen::Index g, bool strided) {
    const Eigen::Index h = ffn.hidden_dim();
    const Eigen::Index hs = h / g;
    GatedFFN out;
    out.act = ffn.act;
    out.w_up.resize(ffn.model_dim(), hs);
    out.w_gate.resize(ffn.model_dim(), hs);
    out.w_down.resize(hs, ffn.model_dim());
    for (Eigen::Index j = 0; j < hs; ++j) {
        const Eigen::Index src = strided ? shard + j * g : shard * hs + j;
        out.w_up.col(j) = ffn.w_up.col(src);
        out.w_gate.col(j) = ffn.w_gate.col(src);
        out.w_down.row(j) = ffn.w_down.row(src);
    }
    return out;
}

} // namespace

ExpertSet standard_upcycle(const GatedFFN& ffn, const UpcycleConfig& config) {
    if (config.granularity != 1)
        throw std::invalid_argument("standard_upcycle: requires granularity 1");
    SplitMix64 base(config.seed);
    ExpertSet experts;
    experts.reserve(static_cast<std::size_t>(config.n_experts));
    for (Eigen::Index i = 0; i < config.n_experts; ++i) {
        SplitMix64 rng = base.split();
        GatedFFN e = ffn;
        perturb(e, config, rng);
        experts.push_back(std::move(e));
    }
    return experts;
}

ExpertSet granular_upcycle(const GatedFFN& ffn, const UpcycleConfig& config) {
    const Eigen::Index g = config.granularity;
    if (g < 1 || ffn.hidden_dim() % g != 0)
        throw std::invalid_argument("granular_upcycle: hidden dim not divisible by granularity");
    if (config.n_experts % g != 0)
        throw std::invalid_argument("granular_upcycle: expert count not divisible by granularity");
    const Eigen::Index replicas = config.n_experts / g;
    SplitMix64 base(config.seed);
    ExpertSet experts;
    experts.reserve(static_cast<std::size_t>(config.n_experts));
    for (Eigen::Index r = 0; r < replicas; ++r) {
        for (Eigen::Index s = 0; s < g; ++s) {
            SplitMix64 rng = base.split();
            GatedFFN e = take_shard(ffn, s, g, config.strided_shards);
            perturb(e, config, rng);
            experts.push_back(std::move(e));
        }
    }
    return experts;
}

double equivalence_check(const GatedFFN& dense, const ExpertSet& experts,
                         const UpcycleConfig& config, Eigen::Index n_inputs,
                         std::uint64_t input_seed) {
    SplitMix64 rng(input_seed);
    Eigen::MatrixXd x(n_inputs, dense.model_dim());
    for (Eigen::Index r = 0; r < x.rows(); ++r)
        for (Eigen::Index c = 0; c < x.cols(); ++c)
            x(r, c) = rng.normal();

    const Eigen::MatrixXd ref = dense.forward(x);
    Eigen::MatrixXd y;
    if (config.granularity == 1) {
        // identical replicas under renormalized gates reproduce the dense FFN
        moe::RouterParams router;
        router.w_g.resize(dense.model_dim(), config.n_experts);
        for (Eigen::Index r = 0; r < router.w_g.rows(); ++r)
            for (Eigen::Index c = 0; c < router.w_g.cols(); ++c)
                router.w_g(r, c) = 0.1 * rng.normal();
        moe::MoEConfig mc;
        mc.n_experts = config.n_experts;
        mc.top_k = std::min<Eigen::Index>(2, config.n_experts);
        mc.renormalize_gates = true;
        y = moe::moe_forward(x, experts, {}, router, mc);
    } else {
        // one replica's G shards, unit gates, must sum to the dense output
        if (static_cast<Eigen::Index>(experts.size()) < config.granularity)
            throw std::invalid_argument("equivalence_check: fewer experts than shards");
        y = Eigen::MatrixXd::Zero(x.rows(), x.cols());
        for (Eigen::Index s = 0; s < config.granularity; ++s)
            y += experts[static_cast<std::size_t>(s)].forward(x);
    }
    return (y - ref).cwiseAbs().maxCoeff();
}

namespace {

void write_u32(std::ofstream& out, std::uint32_t v) {
    unsigned char buf[4];
    for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(buf), 4);
}

std::uint32_t read_u32(std::ifstream& in) {
    unsigned char buf[4];
    in.read(reinterpret_cast<char*>(buf), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
    return v;
}

void write_matrix(std::ofstream& out, const Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            const double v = m(r, c);
            std::uint64_t bits;
            std::memcpy(&bits, &v, 8);
            unsigned char buf[8];
            for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
            out.write(reinterpret_cast<const char*>(buf), 8);
        }
}

void read_matrix(std::ifstream& in, Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            unsigned char buf[8];
            in.read(reinterpret_cast<char*>(buf), 8);
            std::uint64_t bits = 0;
            for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
            double v;
            std::memcpy(&v, &bits, 8);
            m(r, c) = v;
        }
}

constexpr char kMagic[4] = {'D', 'P', 'E', 'X'};
constexpr std::uint32_t kVersion = 1;

} // namespace

void save_expert_set(const std::string& path, const ExpertSet& experts,
                     Eigen::Index granularity) {
    if (experts.empty())
        throw std::invalid_argument("save_expert_set: empty expert set");
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("save_expert_set: cannot open " + path);
    out.write(kMagic, 4);
    write_u32(out, kVersion);
    write_u32(out, static_cast<std::uint32_t>(experts.size()));
    write_u32(out, static_cast<std::uint32_t>(granularity));
    write_u32(out, static_cast<std::uint32_t>(experts[0].model_dim()));
    write_u32(out, static_cast<std::uint32_t>(experts[0].hidden_dim()));
    write_u32(out, static_cast<std::uint32_t>(experts[0].act));
    for (const auto& e : experts) {
        write_matrix(out, e.w_up);
        write_matrix(out, e.w_gate);
        write_matrix(out, e.w_down);
    }
    if (!out)
        throw std::runtime_error("save_expert_set: write failed for " + path);
}

ExpertSet load_expert_set(const std::string& path, Eigen::Index* granularity) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("load_expert_set: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("load_expert_set: bad magic in " + path);
    if (read_u32(in) != kVersion)
        throw std::runtime_error("load_expert_set: unsupported version in " + path);
    const auto n = static_cast<Eigen::Index>(read_u32(in));
    const auto g = static_cast<Eigen::Index>(read_u32(in));
    const auto d = static_cast<Eigen::Index>(read_u32(in));
    const auto h = static_cast<Eigen::Index>(read_u32(in));
    const auto act = static_cast<Nonlinearity>(read_u32(in));
    if (granularity) *granularity = g;
    ExpertSet experts(static_cast<std::size_t>(n));
    for (auto& e : experts) {
        e.act = act;
        e.w_up.resize(d, h);
        e.w_gate.resize(d, h);
        e.w_down.resize(h, d);
        read_matrix(in, e.w_up);
        read_matrix(in, e.w_gate);
        read_matrix(in, e.w_down);
    }
    if (!in)
        throw std::runtime_error("load_expert_set: truncated file " + path);
    return experts;
}

} // namespace dpsl::upcycle
