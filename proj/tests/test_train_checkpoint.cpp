#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <fstream>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "lime/eval.hpp"
#include "lime/model.hpp"

using namespace lime;
using limetest::random_input;
using limetest::tiny_config;

namespace {

OptimConfig tiny_optim(int64_t steps) {
    OptimConfig o;
    o.total_steps = steps;
    return o;
}

bool params_equal(const ModelConfig& cfg, ModelParams<float>& a, ModelParams<float>& b) {
    return params_fingerprint(cfg, a) == params_fingerprint(cfg, b);
}

}  // namespace

TEST_CASE("learning rate schedule warms up linearly and decays to the floor") {
    OptimConfig o = tiny_optim(1000);
    o.peak_lr = 1e-2;
    o.min_lr = 1e-3;
    o.warmup_frac = 0.1;  // 100 warmup steps

    CHECK(schedule_lr(o, 0) == doctest::Approx(1e-2 / 100));
    CHECK(schedule_lr(o, 99) == doctest::Approx(1e-2));
    CHECK(schedule_lr(o, 100) == doctest::Approx(1e-2));
    CHECK(schedule_lr(o, 1000) == doctest::Approx(1e-3));
    CHECK(schedule_lr(o, 5000) == doctest::Approx(1e-3));

    double prev = schedule_lr(o, 100);
    for (int64_t s = 150; s < 1000; s += 50) {
        const double lr = schedule_lr(o, s);
        CHECK(lr <= prev + 1e-15);
        CHECK(lr >= o.min_lr - 1e-15);
        prev = lr;
    }
}

TEST_CASE("a zero learning rate leaves every parameter untouched") {
    const auto cfg = tiny_config(FusionMode::LIME);
    OptimConfig o = tiny_optim(10);
    o.peak_lr = 0.0;
    o.min_lr = 0.0;
    auto state = init_train_state<float>(cfg, o, 42, 0);
    const auto before = params_fingerprint(cfg, state.params);

    const auto in = random_input(cfg, 2, 8, 9);
    for (int i = 0; i < 3; ++i) {
        train_step(state, in);
    }
    CHECK(params_fingerprint(cfg, state.params) == before);
    CHECK(state.step == 3);
}

TEST_CASE("repeated steps on one batch drive the loss down monotonically in trend") {
    const auto cfg = tiny_config(FusionMode::LIME_PLUS_ONE);
    auto state = init_train_state<float>(cfg, tiny_optim(300), 1, 0);
    const auto in = random_input(cfg, 2, 8, 33);

    std::vector<double> losses;
    for (int s = 0; s < 300; ++s) {
        losses.push_back(train_step(state, in).total);
    }
    CHECK(losses.front() > std::log(10.0));  // near log(50) at start
    CHECK(losses.back() < 0.5 * losses.front());
    // trend check over 50-step windows tolerates local optimizer wobble
    for (size_t w = 50; w < losses.size(); w += 50) {
        CHECK(losses[w] < losses[w - 50] + 0.05);
    }
}

TEST_CASE("a memorizing model reaches near-perfect accuracy on its training batch") {
    const auto cfg = tiny_config(FusionMode::BASE, 50, 32, 2, 16);
    OptimConfig o = tiny_optim(500);
    o.peak_lr = 5e-3;
    o.weight_decay = 0.0;
    auto state = init_train_state<float>(cfg, o, 2, 0);
    auto in = random_input(cfg, 2, 12, 77);
    // distinct row-leading tokens guarantee no two rows share a prefix, so
    // every target is reachable by memorization
    in.tokens[0] = 1;
    in.tokens[12] = 2;

    for (int s = 0; s < 500; ++s) {
        train_step(state, in);
    }

    PackedBatch pb;
    pb.batch = static_cast<uint32_t>(in.batch);
    pb.seq_len = static_cast<uint32_t>(in.seq);
    pb.inputs = in.tokens;
    pb.targets = in.targets;
    pb.classes = in.classes;
    const auto report = evaluate(cfg, state.params, {pb});
    CHECK(report.next_token_accuracy >= 0.99);
    CHECK(report.perplexity <= 1.05);
}

TEST_CASE("train_step rejects non-finite losses instead of corrupting the state") {
    const auto cfg = tiny_config(FusionMode::BASE);
    auto state = init_train_state<float>(cfg, tiny_optim(10), 3, 0);
    state.params.embed.token.setConstant(1e20f);
    const auto in = random_input(cfg, 1, 4, 5);
    CHECK_THROWS_AS(train_step(state, in), Error);
}

TEST_CASE("checkpoints restore forward behavior bit for bit") {
    const auto cfg = tiny_config(FusionMode::LIME_PLUS_ONE);
    auto state = init_train_state<float>(cfg, tiny_optim(50), 4, 0xABCD);
    const auto in = random_input(cfg, 2, 8, 21);
    for (int s = 0; s < 10; ++s) {
        train_step(state, in);
    }

    const auto path = limetest::temp_path("ckpt.bin").string();
    save_checkpoint(state, path);
    auto loaded = load_checkpoint(path, 0xABCD);
    CHECK(loaded.step == state.step);
    CHECK(loaded.vocab_fingerprint == state.vocab_fingerprint);
    CHECK(loaded.config.mode == cfg.mode);
    REQUIRE(loaded.config.domains.size() == cfg.domains.size());
    CHECK(loaded.config.domains[0].classes == cfg.domains[0].classes);

    Activations<float> a1, a2;
    forward(cfg, state.params, in, a1);
    forward(loaded.config, loaded.params, in, a2);
    REQUIRE(a1.logits.rows() == a2.logits.rows());
    for (Eigen::Index r = 0; r < a1.logits.rows(); ++r) {
        for (Eigen::Index c = 0; c < a1.logits.cols(); ++c) {
            REQUIRE(a1.logits(r, c) == a2.logits(r, c));
        }
    }
    std::filesystem::remove(path);
}

TEST_CASE("resuming from a checkpoint reproduces uninterrupted training exactly") {
    const auto cfg = tiny_config(FusionMode::LIME);
    const auto in1 = random_input(cfg, 2, 8, 1);
    const auto in2 = random_input(cfg, 2, 8, 2);

    auto full = init_train_state<float>(cfg, tiny_optim(20), 9, 7);
    auto half = init_train_state<float>(cfg, tiny_optim(20), 9, 7);
    for (int s = 0; s < 5; ++s) {
        train_step(full, s % 2 == 0 ? in1 : in2);
        train_step(half, s % 2 == 0 ? in1 : in2);
    }
    const auto path = limetest::temp_path("resume.bin").string();
    save_checkpoint(half, path);
    auto resumed = load_checkpoint(path);
    for (int s = 5; s < 12; ++s) {
        train_step(full, s % 2 == 0 ? in1 : in2);
        train_step(resumed, s % 2 == 0 ? in1 : in2);
    }
    CHECK(resumed.step == full.step);
    CHECK(params_equal(cfg, full.params, resumed.params));
    CHECK(params_fingerprint(cfg, full.m) == params_fingerprint(cfg, resumed.m));
    CHECK(params_fingerprint(cfg, full.v) == params_fingerprint(cfg, resumed.v));
    std::filesystem::remove(path);
}

TEST_CASE("checkpoints refuse a mismatched vocabulary fingerprint") {
    const auto cfg = tiny_config(FusionMode::BASE);
    auto state = init_train_state<float>(cfg, tiny_optim(10), 5, 0x1111);
    const auto path = limetest::temp_path("fp.bin").string();
    save_checkpoint(state, path);

    CHECK_NOTHROW(load_checkpoint(path, 0x1111));
    try {
        load_checkpoint(path, 0x2222);
        FAIL("fingerprint mismatch should refuse the checkpoint");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("fingerprint") != std::string::npos);
    }
    std::filesystem::remove(path);
}

TEST_CASE("truncated checkpoints fail with the file named in the error") {
    const auto cfg = tiny_config(FusionMode::BASE);
    auto state = init_train_state<float>(cfg, tiny_optim(10), 6, 0);
    const auto path = limetest::temp_path("trunc.bin").string();
    save_checkpoint(state, path);

    std::vector<char> bytes(std::filesystem::file_size(path) / 2);
    {
        std::ifstream inF(path, std::ios::binary);
        inF.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    const auto cut = limetest::temp_path("cut.bin").string();
    {
        std::ofstream outF(cut, std::ios::binary);
        outF.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    try {
        load_checkpoint(cut);
        FAIL("truncated checkpoint should fail");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("cut.bin") != std::string::npos);
    }
    std::filesystem::remove(path);
    std::filesystem::remove(cut);
}

TEST_CASE("greedy generation is deterministic and respects its stopping rules") {
    const auto cfg = tiny_config(FusionMode::LIME_PLUS_ONE);
    auto state = init_train_state<float>(cfg, tiny_optim(60), 12, 0);
    const auto in = random_input(cfg, 2, 8, 3);
    for (int s = 0; s < 60; ++s) {
        train_step(state, in);
    }

    const Relabeler relabel = [&](const std::vector<uint32_t>& ids) {
        std::vector<Annotation> ann(cfg.domains.size());
        for (size_t d = 0; d < ann.size(); ++d) {
            ann[d].assign(ids.size(), static_cast<uint16_t>(d));
        }
        return ann;
    };

    GenerateOptions opts;
    opts.max_steps = 12;
    opts.stop_at_separator = false;
    const std::vector<uint32_t> prompt = {in.tokens[0], in.tokens[1]};
    const auto out1 = generate_greedy(cfg, state.params, prompt, relabel, opts);
    const auto out2 = generate_greedy(cfg, state.params, prompt, relabel, opts);
    CHECK(out1 == out2);
    CHECK(out1.size() == 12);

    GenerateOptions stop = opts;
    stop.stop_at_separator = true;
    const auto out3 = generate_greedy(cfg, state.params, prompt, relabel, stop);
    CHECK(out3.size() <= 12);
    for (const auto id : out3) {
        CHECK(id != 0);
    }

    GenerateOptions steered = opts;
    steered.steer = {1, -1};
    CHECK_NOTHROW(generate_greedy(cfg, state.params, prompt, relabel, steered));
    GenerateOptions bad = opts;
    bad.steer = {1};
    CHECK_THROWS_AS(generate_greedy(cfg, state.params, prompt, relabel, bad), Error);
}
