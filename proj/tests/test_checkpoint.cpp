#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "jem/checkpoint.hpp"
#include "jem/config.hpp"
#include "jem/serialize.hpp"
#include "test_util.hpp"

using namespace jem;
using namespace jemtest;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

Checkpoint sample_checkpoint(std::uint64_t seed) {
    Checkpoint c;
    c.snapshot.net = random_mlp(seed, 2, 3, 2, 4, LayerDesc::Relu);
    c.snapshot.state.epoch = 17;
    c.snapshot.state.step = 4242;
    c.snapshot.state.restarts = 2;
    c.snapshot.state.lr_recover_scale = 0.25;
    c.snapshot.state.eta_recover_scale = 4;
    c.snapshot.state.seed = 0xDEADBEEFull;
    c.snapshot.state.rng = Rng(seed + 1);
    c.snapshot.state.rng.gaussian();  // advance away from the initial state
    c.snapshot.state.gap_window = {0.5, 1.25, -3.0};
    AdamState& ad = c.snapshot.state.adam;
    ad.t = 99;
    Rng rng(seed + 2);
    for (const auto& p : c.snapshot.net.params) {
        Tensor m(p.shape), v(p.shape);
        for (auto& x : m.data) x = rng.gaussian();
        for (auto& x : v.data) x = rng.uniform();
        ad.m.push_back(m);
        ad.v.push_back(v);
    }
    c.snapshot.buffer = ReplayBuffer(8);
    c.snapshot.buffer.write_cursor = 3;
    c.snapshot.buffer.transition_counter = 512;
    for (int i = 0; i < 5; ++i) {
        Tensor s({2});
        for (auto& x : s.data) x = rng.uniform(-1, 1);
        c.snapshot.buffer.slots.push_back(s);
    }
    c.dataset_hash = fnv1a("dataset-stamp");
    return c;
}

}  // namespace

TEST_CASE("scalar serialization round-trips through a stream") {
    std::stringstream ss;
    io::put_u32(ss, 0xDEADBEEFu);
    io::put_u64(ss, 0x0123456789ABCDEFull);
    io::put_i32(ss, -42);
    io::put_i64(ss, -(1ll << 40));
    io::put_f64(ss, -0.1);
    io::put_f64(ss, 1e308);
    CHECK(io::get_u32(ss) == 0xDEADBEEFu);
    CHECK(io::get_u64(ss) == 0x0123456789ABCDEFull);
    CHECK(io::get_i32(ss) == -42);
    CHECK(io::get_i64(ss) == -(1ll << 40));
    CHECK(io::get_f64(ss) == -0.1);
    CHECK(io::get_f64(ss) == 1e308);
    CHECK_THROWS_AS(io::get_u32(ss), io::SerializeError);  // exhausted
}

TEST_CASE("serialization is little-endian on the wire") {
    std::stringstream ss;
    io::put_u32(ss, 0x01020304u);
    std::string bytes = ss.str();
    REQUIRE(bytes.size() == 4);
    CHECK((unsigned char)bytes[0] == 0x04);
    CHECK((unsigned char)bytes[3] == 0x01);
}

TEST_CASE("rng state save/restore replays the stream exactly") {
    Rng rng(321);
    rng.gaussian();
    rng.uniform();
    auto st = rng.state();
    double a1 = rng.gaussian(), a2 = rng.uniform(), a3 = rng.gaussian();
    rng.set_state(st);
    CHECK(rng.gaussian() == a1);
    CHECK(rng.uniform() == a2);
    CHECK(rng.gaussian() == a3);
}

TEST_CASE("checkpoint round-trip is bit-exact") {
    Checkpoint c = sample_checkpoint(1);
    std::string path = temp_path("jem_test_ckpt.jemc");
    save_checkpoint(c, path);
    CHECK_FALSE(std::filesystem::exists(path + ".tmp"));

    Checkpoint back = load_checkpoint(path);
    CHECK(back.dataset_hash == c.dataset_hash);

    const Network& n0 = c.snapshot.net;
    const Network& n1 = back.snapshot.net;
    CHECK(n1.input_dim == n0.input_dim);
    CHECK(n1.num_classes == n0.num_classes);
    REQUIRE(n1.layers.size() == n0.layers.size());
    for (std::size_t i = 0; i < n0.layers.size(); ++i) {
        CHECK(n1.layers[i].kind == n0.layers[i].kind);
        CHECK(n1.layers[i].in == n0.layers[i].in);
        CHECK(n1.layers[i].out == n0.layers[i].out);
    }
    REQUIRE(n1.params.size() == n0.params.size());
    for (std::size_t i = 0; i < n0.params.size(); ++i)
        CHECK(n1.params[i] == n0.params[i]);

    const TrainState& s0 = c.snapshot.state;
    TrainState& s1 = back.snapshot.state;
    CHECK(s1.epoch == s0.epoch);
    CHECK(s1.step == s0.step);
    CHECK(s1.restarts == s0.restarts);
    CHECK(s1.lr_recover_scale == s0.lr_recover_scale);
    CHECK(s1.eta_recover_scale == s0.eta_recover_scale);
    CHECK(s1.seed == s0.seed);
    CHECK(s1.gap_window == s0.gap_window);
    CHECK(s1.adam.t == s0.adam.t);
    REQUIRE(s1.adam.m.size() == s0.adam.m.size());
    for (std::size_t i = 0; i < s0.adam.m.size(); ++i) {
        CHECK(s1.adam.m[i] == s0.adam.m[i]);
        CHECK(s1.adam.v[i] == s0.adam.v[i]);
    }
    CHECK(s1.rng.state() == s0.rng.state());
    // the restored rng continues the stream identically
    Rng r0 = s0.rng, r1 = s1.rng;
    CHECK(r1.gaussian() == r0.gaussian());

    const ReplayBuffer& b0 = c.snapshot.buffer;
    const ReplayBuffer& b1 = back.snapshot.buffer;
    CHECK(b1.capacity == b0.capacity);
    CHECK(b1.write_cursor == b0.write_cursor);
    CHECK(b1.transition_counter == b0.transition_counter);
    REQUIRE(b1.size() == b0.size());
    for (std::size_t i = 0; i < b0.size(); ++i) CHECK(b1.slots[i] == b0.slots[i]);

    // a second save of the reloaded checkpoint produces identical bytes
    std::string path2 = temp_path("jem_test_ckpt2.jemc");
    save_checkpoint(back, path2);
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    std::stringstream a, b;
    a << f1.rdbuf();
    b << f2.rdbuf();
    std::string sa = a.str(), sb = b.str();
    CHECK(sa.size() == sb.size());
    std::size_t first_diff = sa.size();
    for (std::size_t i = 0; i < std::min(sa.size(), sb.size()); ++i)
        if (sa[i] != sb[i]) {
            first_diff = i;
            break;
        }
    CAPTURE(first_diff);
    CHECK(sa == sb);
    std::remove(path.c_str());
    std::remove(path2.c_str());
}

TEST_CASE("checkpoint loader rejects corruption") {
    std::string path = temp_path("jem_test_ckpt_bad.jemc");
    {
        std::ofstream f(path, std::ios::binary);
        f << "NOPErest";
    }
    CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);

    Checkpoint c = sample_checkpoint(2);
    save_checkpoint(c, path);
    // future version
    {
        std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
        f.seekp(4);
        io::put_u32(f, 99);
    }
    CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
    // truncation
    save_checkpoint(c, path);
    std::filesystem::resize_file(path, 40);
    CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
    std::remove(path.c_str());
    CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
}

TEST_CASE("fnv1a matches published vectors") {
    CHECK(fnv1a("") == 0xcbf29ce484222325ull);
    CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cull);
    CHECK(fnv1a("foobar") == 0x85944171f73967e8ull);
    CHECK(fnv1a("x") != fnv1a("y"));
}

TEST_CASE("run config parses values, comments and lists") {
    RunConfig c = RunConfig::from_string(
        "seed = 42          # trailing comment\n"
        "\n"
        "# full-line comment\n"
        "train.lr = 1e-4\n"
        "net.widths = 16, 32,64\n"
        "train.renoise = true\n"
        "dataset.name=rings\n"
        "scores = logp, maxprob\n");
    CHECK(c.get_u64("seed") == 42);
    CHECK(c.get_double("train.lr") == doctest::Approx(1e-4));
    CHECK(c.get_int_list("net.widths") == std::vector<int>{16, 32, 64});
    CHECK(c.get_bool("train.renoise"));
    CHECK(c.get_str("dataset.name") == "rings");
    CHECK(c.get_str_list("scores") ==
          std::vector<std::string>{"logp", "maxprob"});
    CHECK_NOTHROW(c.reject_unknown());
}

TEST_CASE("run config fallbacks apply only for absent keys") {
    RunConfig c = RunConfig::from_string("a = 3\n");
    CHECK(c.get_int("a", 7) == 3);
    CHECK(c.get_int("b", 7) == 7);
    CHECK(c.get_double("c", 0.5) == 0.5);
    CHECK(c.get_str("d", "x") == "x");
    CHECK(c.get_bool("e", false) == false);
}

TEST_CASE("run config errors name the offending key") {
    RunConfig c = RunConfig::from_string("a = xyz\n");
    CHECK_THROWS_WITH_AS(c.get_int("missing"), "missing config key: missing",
                         ConfigError);
    CHECK_THROWS_AS(c.get_int("a"), ConfigError);
    CHECK_THROWS_AS(c.get_bool("a"), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_string("novalue\n"), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_string("a=1\na=2\n"), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_string("=1\n"), ConfigError);
    CHECK_THROWS_AS(RunConfig::load(temp_path("jem_no_such.cfg")), ConfigError);
}

TEST_CASE("unconsumed keys are rejected, consumed and set keys pass") {
    RunConfig c = RunConfig::from_string("a = 1\nb = 2\n");
    (void)c.get_int("a");
    CHECK_THROWS_WITH_AS(c.reject_unknown(), "unknown config key: b", ConfigError);
    (void)c.get_int("b");
    CHECK_NOTHROW(c.reject_unknown());
    c.set("c", "3");
    CHECK_NOTHROW(c.reject_unknown());
    CHECK(c.get_int("c") == 3);
}

TEST_CASE("resolved dump echoes sorted key=value lines") {
    RunConfig c = RunConfig::from_string("b = 2\na = 1\n");
    CHECK(c.resolved() == "a = 1\nb = 2\n");
    // the dump reloads to an equivalent config
    RunConfig back = RunConfig::from_string(c.resolved());
    CHECK(back.get_int("a") == 1);
    CHECK(back.get_int("b") == 2);
}
