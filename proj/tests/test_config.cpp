#include <doctest.h>

#include "fanet/config.hpp"

using namespace fanet;

TEST_CASE("parses keys, values, comments and blank lines") {
    Config cfg = Config::from_string(
        "# a comment\n"
        "train.lr = 1e-4\n"
        "\n"
        "model.channels=16, 32,48 ,64\n"
        "name = spaced value # trailing note\n",
        "inline");
    CHECK(cfg.get_double("train.lr", 0.0) == doctest::Approx(1e-4));
    CHECK(cfg.get_string("name", "") == "spaced value");
    const std::vector<int> ch = cfg.get_int_list("model.channels", {});
    REQUIRE(ch.size() == 4);
    CHECK(ch[0] == 16);
    CHECK(ch[1] == 32);
    CHECK(ch[2] == 48);
    CHECK(ch[3] == 64);
}

TEST_CASE("first equals sign splits; later ones belong to the value") {
    Config cfg = Config::from_string("expr=a=b=c\n", "inline");
    CHECK(cfg.get_string("expr", "") == "a=b=c");
}

TEST_CASE("missing keys fall back to defaults") {
    Config cfg = Config::from_string("", "inline");
    CHECK(cfg.get_int("nope", 42) == 42);
    CHECK(cfg.get_double("nope", 2.5) == 2.5);
    CHECK(cfg.get_bool("nope", true) == true);
    CHECK(cfg.get_string("nope", "d") == "d");
    CHECK_FALSE(cfg.has("nope"));
}

TEST_CASE("boolean spellings") {
    Config cfg = Config::from_string(
        "a=true\nb=1\nc=yes\nd=on\ne=false\nf=0\ng=no\nh=off\n", "inline");
    for (const char* k : {"a", "b", "c", "d"}) CHECK(cfg.get_bool(k, false));
    for (const char* k : {"e", "f", "g", "h"}) CHECK_FALSE(cfg.get_bool(k, true));
}

TEST_CASE("malformed lines raise a ConfigError naming origin and line") {
    try {
        Config::from_string("ok=1\nthis has no equals\n", "myfile");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("myfile:2") != std::string::npos);
    }
}

TEST_CASE("typed getter failures name the key") {
    Config cfg = Config::from_string("k=notanumber\nb=maybe\n", "inline");
    try {
        cfg.get_double("k", 0.0);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("k") != std::string::npos);
    }
    CHECK_THROWS_AS(cfg.get_int("k", 0), ConfigError);
    CHECK_THROWS_AS(cfg.get_bool("b", false), ConfigError);
    CHECK_THROWS_AS(cfg.get_int_list("k", {}), ConfigError);
}

TEST_CASE("serialize round-trips through the parser") {
    Config cfg = Config::from_string("z.last=3\na.first=hello world\nmid=1e-4\n", "inline");
    Config back = Config::from_string(cfg.serialize(), "roundtrip");
    CHECK(back.get_string("a.first", "") == "hello world");
    CHECK(back.get_string("mid", "") == cfg.get_string("mid", ""));
    CHECK(back.get_int("z.last", 0) == 3);
    // serialization is sorted, hence canonical
    CHECK(back.serialize() == cfg.serialize());
}

TEST_CASE("set overrides previous values") {
    Config cfg = Config::from_string("train.seed=1\n", "inline");
    cfg.set("train.seed", "9");
    CHECK(cfg.get_int("train.seed", 0) == 9);
}

TEST_CASE("missing config file raises IoError") {
    CHECK_THROWS_AS(Config::from_file("/definitely/not/here.cfg"), IoError);
}
