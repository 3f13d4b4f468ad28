#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "lime/eval.hpp"
#include "lime/model.hpp"

using namespace lime;
using limetest::random_input;
using limetest::reference_forward_logits;
using limetest::tiny_config;

namespace {

// Randomize every table, including the metadata tables that init_params
// deliberately leaves at zero, so fusion arithmetic is actually exercised.
void randomize_all(ModelParams<double>& p, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 0.05);
    auto fill = [&](auto& t) {
        for (Eigen::Index r = 0; r < t.rows(); ++r) {
            for (Eigen::Index c = 0; c < t.cols(); ++c) {
                t(r, c) = dist(rng);
            }
        }
    };
    fill(p.embed.token);
    for (auto& d : p.embed.domain) {
        fill(d);
    }
    for (auto& l : p.layers) {
        fill(l.wq);
        fill(l.wk);
        fill(l.wv);
        fill(l.wo);
        fill(l.w_up);
        fill(l.w_down);
        for (Eigen::Index c = 0; c < l.attn_norm.cols(); ++c) {
            l.attn_norm(0, c) = 1.0 + dist(rng);
            l.mlp_norm(0, c) = 1.0 + dist(rng);
        }
    }
    for (Eigen::Index c = 0; c < p.final_norm.cols(); ++c) {
        p.final_norm(0, c) = 1.0 + dist(rng);
    }
    if (p.w_meta.size() > 0) {
        fill(p.w_meta);
    }
}

double loss_of(const ModelConfig& cfg, const ModelParams<double>& p, const ModelInput& in) {
    Activations<double> acts;
    forward(cfg, p, in, acts);
    double total = lm_loss(acts.logits, in.targets);
    if (cfg.metadata_head.enabled() && !in.meta_targets.empty()) {
        // backward optimizes lm + weight * meta; reproduce that objective
        std::vector<uint32_t> meta(in.meta_targets.begin(), in.meta_targets.end());
        total += cfg.metadata_head.loss_weight * lm_loss(acts.meta_logits, meta);
    }
    return total;
}

}  // namespace

TEST_CASE("forward matches a straight-line scalar reference in all fusion modes") {
    for (const auto mode : {FusionMode::BASE, FusionMode::LIME, FusionMode::LIME_PLUS_ONE}) {
        const auto cfg = tiny_config(mode);
        auto params = init_params<double>(cfg, 3);
        randomize_all(params, 13);
        const auto in = random_input(cfg, 2, 8, 21);

        Activations<double> acts;
        forward(cfg, params, in, acts);
        const auto ref = reference_forward_logits(cfg, params, in);

        REQUIRE(acts.logits.rows() == 16);
        REQUIRE(acts.logits.cols() == cfg.vocab_size);
        double worst = 0.0;
        for (Eigen::Index r = 0; r < acts.logits.rows(); ++r) {
            for (Eigen::Index c = 0; c < acts.logits.cols(); ++c) {
                const double a = acts.logits(r, c);
                const double b = ref[static_cast<size_t>(r) * cfg.vocab_size + c];
                worst = std::max(worst, std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}));
            }
        }
        CHECK(worst < 1e-10);
    }
}

TEST_CASE("language model loss matches a hand-computed value") {
    MatX<double> logits(2, 3);
    logits << 1.0, 2.0, 3.0,
              0.5, 0.5, 0.5;
    const std::vector<uint32_t> targets = {2, 0};
    // row 0: lse = log(e^1 + e^2 + e^3), nll = lse - 3
    // row 1: uniform, nll = log(3)
    const double lse0 = std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0));
    const double expect = ((lse0 - 3.0) + std::log(3.0)) / 2.0;
    CHECK(lm_loss(logits, targets) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("uniform logits give perplexity exactly equal to vocabulary size") {
    // zero-initialized parameters produce identical logits at every position
    const auto cfg = tiny_config(FusionMode::BASE, 50);
    const auto params = ModelParams<double>::shaped(cfg);
    const auto in = random_input(cfg, 2, 8, 5);

    PackedBatch batch;
    batch.batch = 2;
    batch.seq_len = 8;
    batch.inputs = in.tokens;
    batch.targets = in.targets;
    const auto report = evaluate(cfg, params, {batch});
    CHECK(std::abs(report.perplexity - cfg.vocab_size) / cfg.vocab_size < 1e-6);
    CHECK(report.token_count == 16);
}

TEST_CASE("analytic gradients match central finite differences for every parameter group") {
    auto cfg = tiny_config(FusionMode::LIME_PLUS_ONE);
    cfg.metadata_head.domain = 0;
    cfg.metadata_head.loss_weight = 0.7;
    cfg.validate();
    auto params = init_params<double>(cfg, 7);
    randomize_all(params, 29);
    auto in = random_input(cfg, 2, 8, 31);
    std::mt19937_64 meta_rng(83);
    for (int i = 0; i < in.positions(); ++i) {
        in.meta_targets.push_back(static_cast<uint16_t>(meta_rng() % cfg.domains[0].size()));
    }

    Activations<double> acts;
    auto grads = ModelParams<double>::shaped(cfg);
    forward(cfg, params, in, acts);
    grads.set_zero();
    backward(cfg, params, in, acts, grads, false);

    const auto prefs = tensor_refs(params, cfg);
    auto gref_params = tensor_refs(grads, cfg);
    std::mt19937_64 pick(47);
    const double h = 1e-6;
    for (size_t g = 0; g < prefs.size(); ++g) {
        double worst = 0.0;
        const Eigen::Index size = prefs[g].size();
        for (int probe = 0; probe < 6; ++probe) {
            const Eigen::Index idx = static_cast<Eigen::Index>(pick() % size);
            double* slot = prefs[g].data + idx;
            const double save = *slot;
            *slot = save + h;
            const double lp = loss_of(cfg, params, in);
            *slot = save - h;
            const double lm = loss_of(cfg, params, in);
            *slot = save;
            const double fd = (lp - lm) / (2 * h);
            const double an = gref_params[g].data[idx];
            const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8});
            worst = std::max(worst, rel);
        }
        INFO("group ", prefs[g].name);
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("fuse gradients match finite differences") {
    const auto da = limetest::tiny_domain_a();
    const auto db = limetest::tiny_domain_b();
    EmbeddingTables<double> tables;
    tables.token = MatX<double>::Random(10, 6);
    tables.domain = {MatX<double>::Random(da.size(), 6), MatX<double>::Random(db.size(), 6)};
    tables.weights = {1.0, 0.5};

    const std::vector<uint32_t> ids = {1, 4, 4, 9};
    const std::vector<std::vector<uint16_t>> classes = {{0, 1, 1, 3}, {2, 0, 1, 1}};
    const MatX<double> upstream = MatX<double>::Random(4, 6);

    auto objective = [&] {
        const auto out = fuse(ids, classes, tables, FusionMode::LIME);
        return (out.array() * upstream.array()).sum();
    };

    EmbeddingTables<double> grads;
    grads.token = MatX<double>::Zero(10, 6);
    grads.domain = {MatX<double>::Zero(da.size(), 6), MatX<double>::Zero(db.size(), 6)};
    grads.weights = tables.weights;
    fuse_backward(upstream, ids, classes, tables, FusionMode::LIME, grads, false);

    const double h = 1e-7;
    auto check_table = [&](MatX<double>& table, const MatX<double>& grad) {
        std::mt19937_64 pick(3);
        for (int probe = 0; probe < 8; ++probe) {
            const Eigen::Index r = static_cast<Eigen::Index>(pick() % table.rows());
            const Eigen::Index c = static_cast<Eigen::Index>(pick() % table.cols());
            const double save = table(r, c);
            table(r, c) = save + h;
            const double lp = objective();
            table(r, c) = save - h;
            const double lm = objective();
            table(r, c) = save;
            const double fd = (lp - lm) / (2 * h);
            CHECK(std::abs(fd - grad(r, c)) < 1e-6 * std::max(1.0, std::abs(fd)));
        }
    };
    check_table(tables.token, grads.token);
    check_table(tables.domain[0], grads.domain[0]);
    check_table(tables.domain[1], grads.domain[1]);
}

TEST_CASE("zero metadata tables make fusion modes emit logits bit-identical to base") {
    const auto base_cfg = tiny_config(FusionMode::BASE);
    for (const auto mode : {FusionMode::LIME, FusionMode::LIME_PLUS_ONE}) {
        auto cfg = base_cfg;
        cfg.mode = mode;
        // identical seed: same token table; metadata tables start at zero
        const auto base_params = init_params<float>(base_cfg, 11);
        const auto lime_params = init_params<float>(cfg, 11);

        for (int trial = 0; trial < 20; ++trial) {
            const auto in = random_input(cfg, 2, 8, 100 + trial);
            Activations<float> acts_base, acts_lime;
            forward(base_cfg, base_params, in, acts_base);
            forward(cfg, lime_params, in, acts_lime);
            REQUIRE(acts_base.logits.rows() == acts_lime.logits.rows());
            bool identical = true;
            for (Eigen::Index r = 0; r < acts_base.logits.rows() && identical; ++r) {
                for (Eigen::Index c = 0; c < acts_base.logits.cols(); ++c) {
                    if (acts_base.logits(r, c) != acts_lime.logits(r, c)) {
                        identical = false;
                        break;
                    }
                }
            }
            CHECK(identical);
        }
    }
}

TEST_CASE("logits at a position never depend on later tokens or classes") {
    const auto cfg = tiny_config(FusionMode::LIME);
    auto params = init_params<double>(cfg, 17);
    randomize_all(params, 19);

    const int B = 2, S = 8, cut = 5;
    const auto in = random_input(cfg, B, S, 55);
    auto mutated = in;
    std::mt19937_64 rng(77);
    for (int b = 0; b < B; ++b) {
        for (int p = cut; p < S; ++p) {
            const size_t i = static_cast<size_t>(b) * S + p;
            mutated.tokens[i] = static_cast<uint32_t>(rng() % cfg.vocab_size);
            for (size_t d = 0; d < cfg.domains.size(); ++d) {
                mutated.classes[d][i] = static_cast<uint16_t>(rng() % cfg.domains[d].size());
            }
        }
    }

    Activations<double> a1, a2;
    forward(cfg, params, in, a1);
    forward(cfg, params, mutated, a2);
    for (int b = 0; b < B; ++b) {
        for (int p = 0; p < cut; ++p) {
            const Eigen::Index r = static_cast<Eigen::Index>(b) * S + p;
            for (Eigen::Index c = 0; c < a1.logits.cols(); ++c) {
                REQUIRE(a1.logits(r, c) == a2.logits(r, c));
            }
        }
    }
}

TEST_CASE("metadata tables are a sub-percent fraction of the trained-scale parameter count") {
    ModelConfig cfg;  // trained-scale defaults
    cfg.vocab_size = 4096;
    cfg.mode = FusionMode::LIME_PLUS_ONE;
    cfg.domains = {pos_schema(), ner_schema()};
    cfg.validate();
    const auto params = ModelParams<float>::shaped(cfg);
    const double ratio = static_cast<double>(params.metadata_parameter_count()) /
                         static_cast<double>(params.parameter_count());
    CHECK(params.metadata_parameter_count() ==
          static_cast<size_t>((51 + 20) * cfg.hidden));
    CHECK(ratio < 0.01);
}

TEST_CASE("metadata head top-k scores count gold classes inside the k best logits") {
    MatX<double> ml(3, 4);
    ml << 0.1, 0.9, 0.5, 0.2,   // ranks: 1, 2, 3, 0
          2.0, 1.0, 0.0, -1.0,  // ranks: 0, 1, 2, 3
          0.0, 0.0, 3.0, 0.0;   // top is 2
    const std::vector<uint16_t> gold = {1, 3, 2};
    CHECK(metadata_head_topk(ml, gold, 1) == doctest::Approx(2.0 / 3.0));
    CHECK(metadata_head_topk(ml, gold, 4) == doctest::Approx(1.0));
}
