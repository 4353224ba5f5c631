#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace auf {

// xoshiro256++ seeded through splitmix64. All samplers are implemented in
// terms of next() so results are identical across platforms and library
// versions. Distinct pipeline stages draw from named substreams derived
// from one master seed (see stream()), which keeps parallel execution
// order-independent.
class Rng {
public:
    explicit Rng(uint64_t seed);

    uint64_t next();
    double uniform();                       // [0, 1)
    double uniform(double lo, double hi);   // [lo, hi)
    double normal();                        // standard normal (polar method)
    double exponential(double rate);
    double gamma(double shape);             // unit scale, shape > 0
    double beta(double a, double b);
    uint64_t below(uint64_t n);             // unbiased uniform in [0, n)
    std::vector<size_t> permutation(size_t n);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t s_[4];
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Stable 64-bit tag hash (FNV-1a).
uint64_t hash_tag(std::string_view tag);

// Derives a substream seed from (master, tag, a, b) by chaining splitmix64.
uint64_t mix_seed(uint64_t master, uint64_t a, uint64_t b = 0, uint64_t c = 0);

// Named substream: stream(master, "flows", task_id, node_id).
Rng stream(uint64_t master, std::string_view tag, uint64_t a = 0, uint64_t b = 0);

}  // namespace auf
