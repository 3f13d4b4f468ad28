#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdlib>
#include <fstream>
#include <string>

#include "doctest.h"
#include "helpers.hpp"
#include "lime/common.hpp"
#include "lime/config.hpp"

using namespace lime;

TEST_CASE("parsing flattens sections and ignores comments and blank lines") {
    const auto cfg = parse_config(
        "# leading comment\n"
        "[run]\n"
        "seed = 42\n"
        "\n"
        "[train]\n"
        "# steps for the short run\n"
        "steps = 10\n"
        "peak_lr = 3e-3\n"
        "resume = yes\n");
    CHECK(cfg.get_i64("run.seed") == 42);
    CHECK(cfg.get_i64("train.steps") == 10);
    CHECK(cfg.get_f64("train.peak_lr") == doctest::Approx(3e-3));
    CHECK(cfg.get_bool("train.resume"));
    CHECK(cfg.has("run.seed"));
    CHECK(!cfg.has("run.missing"));
}

TEST_CASE("typed getters name the offending key") {
    RunConfig cfg;
    cfg.set("train.steps", "soon");
    try {
        cfg.get_i64("train.steps");
        FAIL("a non-numeric value should be rejected");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("train.steps") != std::string::npos);
    }
    try {
        cfg.get_str("absent.key");
        FAIL("a missing key should be rejected");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("absent.key") != std::string::npos);
    }
    cfg.set("eval.flag", "maybe");
    CHECK_THROWS_AS(cfg.get_bool("eval.flag"), Error);
    cfg.set("eval.rate", "fast");
    CHECK_THROWS_AS(cfg.get_f64("eval.rate"), Error);
}

TEST_CASE("validation materializes defaults and rejects unknown keys") {
    RunConfig raw;
    const auto full = validate_config(raw);
    for (const auto& d : known_config_keys()) {
        REQUIRE(full.has(d.key));
        CHECK(full.get_str(d.key) == d.value);
    }

    RunConfig bad;
    bad.set("train.stepz", "10");
    try {
        validate_config(bad);
        FAIL("an unknown key should be rejected");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("train.stepz") != std::string::npos);
    }

    // explicit values survive validation
    RunConfig some;
    some.set("train.steps", "77");
    const auto kept = validate_config(some);
    CHECK(kept.get_i64("train.steps") == 77);
    CHECK(some.values.size() == 1);  // the input is untouched
}

TEST_CASE("the seed environment override wins over the file value") {
    RunConfig raw;
    raw.set("run.seed", "1");
    setenv("LIME_SEED", "999", 1);
    const auto overridden = validate_config(raw);
    CHECK(overridden.get_i64("run.seed") == 999);
    unsetenv("LIME_SEED");
    const auto plain = validate_config(raw);
    CHECK(plain.get_i64("run.seed") == 1);
}

TEST_CASE("dumping and reparsing is a fixpoint") {
    RunConfig cfg;
    cfg.set("train.steps", "10");
    cfg.set("train.peak_lr", "0.003");
    cfg.set("run.seed", "7");
    cfg.set("vocab.path", "/tmp/v.bin");

    const std::string text = dump_config(cfg);
    const auto reparsed = parse_config(text);
    CHECK(reparsed.values == cfg.values);
    CHECK(dump_config(reparsed) == text);

    // sections appear sorted exactly once
    CHECK(text.find("[run]") != std::string::npos);
    CHECK(text.find("[train]") != std::string::npos);
    CHECK(text.find("[run]") < text.find("[train]"));
    CHECK(text.find("[train]") < text.find("[vocab]"));
}

TEST_CASE("configs round trip through disk") {
    RunConfig cfg;
    cfg.set("run.seed", "13");
    cfg.set("corpus.synthetic_documents", "100");
    const auto path = limetest::temp_path("run_cfg.ini");
    {
        std::ofstream out(path);
        out << dump_config(cfg);
    }
    const auto loaded = load_config(path);
    CHECK(loaded.values == cfg.values);
    std::filesystem::remove(path);

    CHECK_THROWS_AS(load_config(limetest::temp_path("missing_cfg.ini")), Error);
}
