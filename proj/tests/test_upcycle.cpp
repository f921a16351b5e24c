#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "dpsl/rng.hpp"
#include "dpsl/upcycle.hpp"

using namespace dpsl;
using namespace dpsl::upcycle;

namespace {

GatedFFN random_ffn(Eigen::Index d, Eigen::Index h, std::uint64_t seed) {
    SplitMix64 rng(seed);
    GatedFFN f;
    f.act = Nonlinearity::SiLU;
    f.w_up.resize(d, h);
    f.w_gate.resize(d, h);
    f.w_down.resize(h, d);
    for (Eigen::Index r = 0; r < d; ++r)
        for (Eigen::Index c = 0; c < h; ++c) {
            f.w_up(r, c) = 0.3 * rng.normal();
            f.w_gate(r, c) = 0.3 * rng.normal();
        }
    for (Eigen::Index r = 0; r < h; ++r)
        for (Eigen::Index c = 0; c < d; ++c)
            f.w_down(r, c) = 0.3 * rng.normal();
    return f;
}

bool same_weights(const GatedFFN& a, const GatedFFN& b) {
    return a.w_up == b.w_up && a.w_gate == b.w_gate && a.w_down == b.w_down;
}

} // namespace

TEST_CASE("standard upcycle with zero noise copies the FFN exactly") {
    const GatedFFN dense = random_ffn(8, 16, 1);
    UpcycleConfig cfg{4, 1, 0.0, 7};
    const ExpertSet experts = standard_upcycle(dense, cfg);
    REQUIRE(experts.size() == 4);
    for (const auto& e : experts)
        CHECK(same_weights(e, dense));
}

TEST_CASE("noise makes experts pairwise distinct but deterministic") {
    const GatedFFN dense = random_ffn(8, 16, 2);
    UpcycleConfig cfg{4, 1, 0.01, 99};
    const ExpertSet a = standard_upcycle(dense, cfg);
    const ExpertSet b = standard_upcycle(dense, cfg);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(same_weights(a[i], b[i])); // bit-exact reproducibility
        CHECK_FALSE(same_weights(a[i], dense));
        for (std::size_t j = i + 1; j < a.size(); ++j)
            CHECK_FALSE(same_weights(a[i], a[j]));
    }
}

TEST_CASE("standard upcycle rejects granularity != 1") {
    const GatedFFN dense = random_ffn(4, 8, 3);
    UpcycleConfig cfg{4, 2, 0.0, 0};
    CHECK_THROWS_AS(standard_upcycle(dense, cfg), std::invalid_argument);
}

TEST_CASE("granular shard shapes and hidden-dim partition") {
    const GatedFFN dense = random_ffn(4, 8, 4);
    UpcycleConfig cfg{4, 4, 0.0, 0};
    const ExpertSet shards = granular_upcycle(dense, cfg);
    REQUIRE(shards.size() == 4);
    for (const auto& s : shards) {
        CHECK(s.hidden_dim() == 2);
        CHECK(s.model_dim() == 4);
    }
    // contiguous slices reassemble the original tensors
    for (Eigen::Index j = 0; j < 8; ++j) {
        const auto s = static_cast<std::size_t>(j / 2);
        CHECK(shards[s].w_up.col(j % 2) == dense.w_up.col(j));
        CHECK(shards[s].w_down.row(j % 2) == dense.w_down.row(j));
    }
}

TEST_CASE("granularity 1 granular upcycle reduces to standard") {
    const GatedFFN dense = random_ffn(6, 12, 5);
    UpcycleConfig cfg{4, 1, 0.01, 11};
    const ExpertSet a = granular_upcycle(dense, cfg);
    const ExpertSet b = standard_upcycle(dense, cfg);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(same_weights(a[i], b[i]));
}

TEST_CASE("shards sum to the dense output") {
    const GatedFFN dense = random_ffn(10, 24, 6);
    for (Eigen::Index g : {Eigen::Index{2}, Eigen::Index{4}}) {
        UpcycleConfig cfg{g, g, 0.0, 0};
        const ExpertSet shards = granular_upcycle(dense, cfg);
        SplitMix64 rng(77);
        Eigen::MatrixXd x(1000, 10);
        for (Eigen::Index r = 0; r < x.rows(); ++r)
            for (Eigen::Index c = 0; c < x.cols(); ++c)
                x(r, c) = rng.normal();
        Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(1000, 10);
        for (const auto& s : shards)
            sum += s.forward(x);
        CHECK((sum - dense.forward(x)).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("strided shards also sum to the dense output") {
    const GatedFFN dense = random_ffn(6, 12, 8);
    UpcycleConfig cfg{3, 3, 0.0, 0};
    cfg.strided_shards = true;
    const ExpertSet shards = granular_upcycle(dense, cfg);
    SplitMix64 rng(78);
    Eigen::MatrixXd x(100, 6);
    for (Eigen::Index r = 0; r < x.rows(); ++r)
        for (Eigen::Index c = 0; c < x.cols(); ++c)
            x(r, c) = rng.normal();
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(100, 6);
    for (const auto& s : shards)
        sum += s.forward(x);
    CHECK((sum - dense.forward(x)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("granular upcycle divisibility errors") {
    const GatedFFN dense = random_ffn(4, 9, 9);
    UpcycleConfig cfg{4, 2, 0.0, 0};
    CHECK_THROWS_AS(granular_upcycle(dense, cfg), std::invalid_argument);
    const GatedFFN dense2 = random_ffn(4, 8, 9);
    UpcycleConfig cfg2{5, 2, 0.0, 0}; // 5 experts not divisible by G=2
    CHECK_THROWS_AS(granular_upcycle(dense2, cfg2), std::invalid_argument);
}

TEST_CASE("equivalence_check") {
    const GatedFFN dense = random_ffn(8, 16, 10);
    {
        UpcycleConfig cfg{4, 1, 0.0, 0};
        const auto experts = standard_upcycle(dense, cfg);
        CHECK(equivalence_check(dense, experts, cfg, 200, 1) < 1e-6);
    }
    {
        UpcycleConfig cfg{4, 4, 0.0, 0};
        const auto shards = granular_upcycle(dense, cfg);
        CHECK(equivalence_check(dense, shards, cfg, 200, 1) < 1e-6);
    }
    {
        UpcycleConfig cfg{4, 1, 0.01, 5};
        const auto experts = standard_upcycle(dense, cfg);
        CHECK(equivalence_check(dense, experts, cfg, 200, 1) > 0.0);
    }
}

TEST_CASE("drop-upcycling reinit changes roughly the requested fraction") {
    const GatedFFN dense = random_ffn(16, 64, 12);
    UpcycleConfig cfg{2, 1, 0.0, 13};
    cfg.reinit_ratio = 0.5;
    const ExpertSet experts = standard_upcycle(dense, cfg);
    Eigen::Index changed = 0, total = 0;
    for (const auto& e : experts) {
        changed += (e.w_up.array() != dense.w_up.array()).count();
        total += dense.w_up.size();
    }
    const double frac = static_cast<double>(changed) / static_cast<double>(total);
    CHECK(frac > 0.4);
    CHECK(frac < 0.6);
}

TEST_CASE("expert set binary round trip") {
    const GatedFFN dense = random_ffn(6, 12, 14);
    UpcycleConfig cfg{4, 1, 0.01, 15};
    const ExpertSet experts = standard_upcycle(dense, cfg);
    const auto path = std::filesystem::temp_directory_path() / "dpsl_experts_test.bin";
    save_expert_set(path.string(), experts, 1);
    Eigen::Index g = 0;
    const ExpertSet loaded = load_expert_set(path.string(), &g);
    CHECK(g == 1);
    REQUIRE(loaded.size() == experts.size());
    for (std::size_t i = 0; i < experts.size(); ++i) {
        CHECK(same_weights(loaded[i], experts[i])); // bit-exact
        CHECK(loaded[i].act == experts[i].act);
    }
    std::filesystem::remove(path);
    CHECK_THROWS(load_expert_set("/nonexistent/experts.bin"));
}
