#include "jem/checkpoint.hpp"

#include <cstdio>
#include <fstream>

#include "jem/serialize.hpp"

namespace jem {

namespace {

using namespace jem::io;

void put_tensor(std::ostream& s, const Tensor& t) {
    put_u32(s, std::uint32_t(t.rank()));
    for (auto d : t.shape) put_u64(s, d);
    for (double v : t.data) put_f64(s, v);
}

Tensor get_tensor(std::istream& s) {
    std::uint32_t rank = get_u32(s);
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = std::size_t(get_u64(s));
    Tensor t(shape);
    for (auto& v : t.data) v = get_f64(s);
    return t;
}

void put_network(std::ostream& s, const Network& net) {
    put_u64(s, net.input_dim);
    put_u64(s, net.num_classes);
    put_u32(s, std::uint32_t(net.layers.size()));
    for (const auto& l : net.layers) {
        put_u32(s, std::uint32_t(l.kind));
        put_u64(s, l.in);
        put_u64(s, l.out);
    }
    put_u32(s, std::uint32_t(net.params.size()));
    for (const auto& p : net.params) put_tensor(s, p);
}

Network get_network(std::istream& s) {
    Network net;
    net.input_dim = std::size_t(get_u64(s));
    net.num_classes = std::size_t(get_u64(s));
    std::uint32_t nl = get_u32(s);
    for (std::uint32_t i = 0; i < nl; ++i) {
        LayerDesc l;
        std::uint32_t kind = get_u32(s);
        if (kind > LayerDesc::Softplus)
            throw CheckpointError("JEMC: bad layer kind");
        l.kind = LayerDesc::Kind(kind);
        l.in = std::size_t(get_u64(s));
        l.out = std::size_t(get_u64(s));
        net.layers.push_back(l);
    }
    std::uint32_t np = get_u32(s);
    for (std::uint32_t i = 0; i < np; ++i) net.params.push_back(get_tensor(s));
    return net;
}

void put_rng(std::ostream& s, const Rng& rng) {
    for (auto w : rng.state()) put_u64(s, w);
}

Rng get_rng(std::istream& s) {
    std::array<std::uint64_t, 4> st;
    for (auto& w : st) w = get_u64(s);
    Rng r;
    r.set_state(st);
    return r;
}

void put_state(std::ostream& s, const TrainState& st) {
    put_i32(s, st.epoch);
    put_i64(s, st.step);
    put_i64(s, st.adam.t);
    put_u32(s, std::uint32_t(st.adam.m.size()));
    for (const auto& t : st.adam.m) put_tensor(s, t);
    for (const auto& t : st.adam.v) put_tensor(s, t);
    put_u32(s, std::uint32_t(st.gap_window.size()));
    for (double g : st.gap_window) put_f64(s, g);
    put_i32(s, st.restarts);
    put_f64(s, st.lr_recover_scale);
    put_i32(s, st.eta_recover_scale);
    put_u64(s, st.seed);
    put_rng(s, st.rng);
}

TrainState get_state(std::istream& s) {
    TrainState st;
    st.epoch = get_i32(s);
    st.step = get_i64(s);
    st.adam.t = get_i64(s);
    std::uint32_t np = get_u32(s);
    for (std::uint32_t i = 0; i < np; ++i) st.adam.m.push_back(get_tensor(s));
    for (std::uint32_t i = 0; i < np; ++i) st.adam.v.push_back(get_tensor(s));
    std::uint32_t ng = get_u32(s);
    for (std::uint32_t i = 0; i < ng; ++i) st.gap_window.push_back(get_f64(s));
    st.restarts = get_i32(s);
    st.lr_recover_scale = get_f64(s);
    st.eta_recover_scale = get_i32(s);
    st.seed = get_u64(s);
    st.rng = get_rng(s);
    return st;
}

void put_buffer(std::ostream& s, const ReplayBuffer& b) {
    put_u64(s, b.capacity);
    put_u64(s, b.write_cursor);
    put_u64(s, b.transition_counter);
    put_u32(s, std::uint32_t(b.slots.size()));
    for (const auto& t : b.slots) put_tensor(s, t);
}

ReplayBuffer get_buffer(std::istream& s) {
    ReplayBuffer b(std::size_t(get_u64(s)));
    b.write_cursor = std::size_t(get_u64(s));
    b.transition_counter = get_u64(s);
    std::uint32_t n = get_u32(s);
    for (std::uint32_t i = 0; i < n; ++i) b.slots.push_back(get_tensor(s));
    return b;
}

}  // namespace

void save_checkpoint(const Checkpoint& c, const std::string& path) {
    // atomic: write to a temp file, then rename into place
    std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw CheckpointError("JEMC: cannot open " + tmp + " for writing");
        f.write("JEMC", 4);
        io::put_u32(f, Checkpoint::kVersion);
        put_network(f, c.snapshot.net);
        put_state(f, c.snapshot.state);
        put_buffer(f, c.snapshot.buffer);
        io::put_u64(f, c.dataset_hash);
        if (!f) throw CheckpointError("JEMC: write failed to " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw CheckpointError("JEMC: rename failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CheckpointError("JEMC: cannot open " + path);
    char magic[4];
    if (!f.read(magic, 4) || std::string(magic, 4) != "JEMC")
        throw CheckpointError("JEMC: bad magic in " + path);
    std::uint32_t version = io::get_u32(f);
    if (version != Checkpoint::kVersion)
        throw CheckpointError("JEMC: unsupported version " +
                              std::to_string(version));
    Checkpoint c;
    try {
        c.snapshot.net = get_network(f);
        c.snapshot.state = get_state(f);
        c.snapshot.buffer = get_buffer(f);
        c.dataset_hash = io::get_u64(f);
    } catch (const io::SerializeError& e) {
        throw CheckpointError(std::string("JEMC: ") + e.what());
    }
    return c;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace jem
