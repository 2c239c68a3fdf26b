#pragma once

#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace fanet {

// Error taxonomy. exit_code() maps onto the CLI contract:
// 1 usage/config, 2 numerical failure, 3 I/O.
class FanetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const { return 1; }
};

class UsageError : public FanetError {
public:
    using FanetError::FanetError;
};

class ConfigError : public FanetError {
public:
    using FanetError::FanetError;
};

class ShapeError : public FanetError {
public:
    using FanetError::FanetError;
};

class ValidationError : public FanetError {
public:
    using FanetError::FanetError;
};

class NumericError : public FanetError {
public:
    using FanetError::FanetError;
    int exit_code() const override { return 2; }
};

class IoError : public FanetError {
public:
    using FanetError::FanetError;
    int exit_code() const override { return 3; }
};

// (batch, channels, height, width)
struct Shape {
    int b = 0;
    int c = 0;
    int h = 0;
    int w = 0;

    std::int64_t numel() const {
        return static_cast<std::int64_t>(b) * c * static_cast<std::int64_t>(h) * w;
    }
    bool operator==(const Shape&) const = default;

    std::string str() const {
        return "(" + std::to_string(b) + "," + std::to_string(c) + "," +
               std::to_string(h) + "," + std::to_string(w) + ")";
    }
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Stable stream derivation: seeds for sub-streams (per module, per epoch,
// per sample) are mixed so that consumers never share state.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ splitmix64(b + 0x632be59bd9b4e019ULL));
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Worker cap for the few loops that may run in parallel. FANET_THREADS
// overrides; results are bit-identical for any thread count because all
// parallel loops write disjoint outputs with fixed per-element reduction
// order.
inline int worker_thread_count() {
    if (const char* env = std::getenv("FANET_THREADS")) {
        int v = std::atoi(env);
        if (v >= 1) return v;
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

template <typename F>
void parallel_for(std::int64_t n, F&& fn) {
    int threads = worker_thread_count();
    if (threads <= 1 || n <= 1) {
        for (std::int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    if (static_cast<std::int64_t>(threads) > n) threads = static_cast<int>(n);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    const std::int64_t chunk = (n + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
        const std::int64_t lo = t * chunk;
        const std::int64_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn]() {
            for (std::int64_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace fanet
