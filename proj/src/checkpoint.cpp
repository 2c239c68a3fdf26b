#include "fanet/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace fanet {

namespace {

constexpr char kMagic[4] = {'F', 'C', 'K', 'P'};
constexpr std::uint16_t kVersion = 1;

template <typename T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::ifstream& in, const std::string& path) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw IoError("truncated checkpoint: " + path);
    return v;
}

void put_blob(std::ofstream& out, const std::string& s) {
    put(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string take_blob(std::ifstream& in, const std::string& path) {
    const auto len = take<std::uint32_t>(in, path);
    std::string s(len, '\0');
    in.read(s.data(), static_cast<std::streamsize>(len));
    if (!in) throw IoError("truncated checkpoint: " + path);
    return s;
}

void put_floats(std::ofstream& out, const float* data, std::size_t count) {
    put(out, static_cast<std::uint64_t>(count));
    out.write(reinterpret_cast<const char*>(data),
              static_cast<std::streamsize>(sizeof(float) * count));
}

std::vector<float> take_floats(std::ifstream& in, const std::string& path) {
    const auto count = take<std::uint64_t>(in, path);
    if (count > (1ull << 32)) throw IoError("implausible buffer size in checkpoint: " + path);
    std::vector<float> v(static_cast<std::size_t>(count));
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(sizeof(float) * v.size()));
    if (!in) throw IoError("truncated checkpoint: " + path);
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(kMagic, 4);
    put(out, kVersion);
    put_blob(out, ck.config.serialize());
    put(out, static_cast<std::uint32_t>(ck.epoch));
    put_blob(out, ck.rng_state);
    put(out, static_cast<std::int64_t>(ck.adam_step));
    put(out, static_cast<std::uint32_t>(ck.names.size()));
    for (std::size_t i = 0; i < ck.names.size(); ++i) {
        put_blob(out, ck.names[i]);
        const Shape s = ck.values[i].shape();
        for (int d : {s.b, s.c, s.h, s.w}) put(out, static_cast<std::uint32_t>(d));
        put_floats(out, ck.values[i].data().data(),
                   static_cast<std::size_t>(ck.values[i].numel()));
        put_floats(out, ck.m1[i].data(), ck.m1[i].size());
        put_floats(out, ck.m2[i].data(), ck.m2[i].size());
    }
    if (!out) throw IoError("short write: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw IoError("not a checkpoint file (bad magic): " + path);
    }
    const auto version = take<std::uint16_t>(in, path);
    if (version != kVersion) {
        throw IoError("unsupported checkpoint version " + std::to_string(version) + ": " + path);
    }
    Checkpoint ck;
    ck.config = Config::from_string(take_blob(in, path));
    ck.epoch = static_cast<int>(take<std::uint32_t>(in, path));
    ck.rng_state = take_blob(in, path);
    ck.adam_step = take<std::int64_t>(in, path);
    const auto count = take<std::uint32_t>(in, path);
    for (std::uint32_t i = 0; i < count; ++i) {
        ck.names.push_back(take_blob(in, path));
        int dims[4];
        for (int& d : dims) d = static_cast<int>(take<std::uint32_t>(in, path));
        std::vector<float> vals = take_floats(in, path);
        const Shape s{dims[0], dims[1], dims[2], dims[3]};
        if (s.numel() != static_cast<std::int64_t>(vals.size())) {
            throw IoError("checkpoint tensor size mismatch for " + ck.names.back());
        }
        ck.values.push_back(Tensor::from(s, std::move(vals)));
        ck.m1.push_back(take_floats(in, path));
        ck.m2.push_back(take_floats(in, path));
    }
    return ck;
}

Checkpoint snapshot(const Config& config, Adam<float>& opt, int epoch, const std::mt19937& rng) {
    Checkpoint ck;
    ck.config = config;
    ck.epoch = epoch;
    std::ostringstream ss;
    ss << rng;
    ck.rng_state = ss.str();
    ck.adam_step = opt.step_count();
    const ParamList<float>& params = opt.params();
    for (std::size_t i = 0; i < params.size(); ++i) {
        ck.names.push_back(params[i].name);
        ck.values.push_back(params[i].tensor.clone());
        ck.m1.push_back(opt.moments1()[i]);
        ck.m2.push_back(opt.moments2()[i]);
    }
    return ck;
}

void restore(const Checkpoint& ck, FanetModel<float>& model, Adam<float>& opt, std::mt19937& rng) {
    ParamList<float> params = model.params();
    if (params.size() != ck.names.size()) {
        throw ValidationError("checkpoint holds " + std::to_string(ck.names.size()) +
                              " tensors but the model has " + std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].name != ck.names[i]) {
            throw ValidationError("checkpoint tensor " + ck.names[i] +
                                  " does not match model parameter " + params[i].name);
        }
        if (!(params[i].tensor.shape() == ck.values[i].shape())) {
            throw ValidationError("checkpoint shape mismatch for " + ck.names[i]);
        }
        std::copy(ck.values[i].data().begin(), ck.values[i].data().end(),
                  params[i].tensor.data().begin());
    }
    opt = Adam<float>(model.params());
    opt.set_step_count(ck.adam_step);
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (ck.m1[i].size() != opt.moments1()[i].size() ||
            ck.m2[i].size() != opt.moments2()[i].size()) {
            throw ValidationError("checkpoint optimizer state size mismatch for " + ck.names[i]);
        }
        opt.moments1()[i] = ck.m1[i];
        opt.moments2()[i] = ck.m2[i];
    }
    if (!ck.rng_state.empty()) {
        std::istringstream ss(ck.rng_state);
        ss >> rng;
        if (!ss) throw IoError("corrupt RNG state in checkpoint");
    }
}

}  // namespace fanet
