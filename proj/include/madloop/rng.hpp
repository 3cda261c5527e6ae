#pragma once

// Deterministic random streams.
//
// Every stochastic operation takes an explicit Rng. Streams are derived from a
// 64-bit master seed and a path of integers (trial index, generation, purpose)
// so that parallel work can be scheduled in any order without changing the
// numbers each unit of work sees.
//
// Derivation, bit-exact:
//
//   mix64(z):  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9
//              z = (z ^ (z >> 27)) * 0x94d049bb133111eb
//              return z ^ (z >> 31)
//
//   h = mix64(master ^ 0x6a09e667f3bcc909)
//   for e in path:  h = mix64((h ^ mix64(e + 0x9e3779b97f4a7c15)) + 0x9e3779b97f4a7c15)
//   engine = std::mt19937_64(h)
//
// Variates (all arithmetic mod 2^64 / IEEE double):
//   uniform()  = (engine() >> 11) * 2^-53
//   normal()   = Marsaglia polar method on u = 2*uniform()-1, v = 2*uniform()-1,
//                rejecting s = u^2+v^2 outside (0, 1); returns u*f, then caches v*f
//                with f = sqrt(-2 ln(s) / s)
//   index(n)   = rejection sampling on engine() with limit = 2^64 - (2^64 mod n)

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <vector>

namespace madloop {

using SeedPath = std::vector<std::uint64_t>;

std::uint64_t mix64(std::uint64_t z) noexcept;
std::uint64_t stream_seed(std::uint64_t master, std::span<const std::uint64_t> path) noexcept;

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }
    double uniform();
    double normal();
    std::uint64_t index(std::uint64_t n);

private:
    std::mt19937_64 engine_;
    double cached_normal_ = 0.0;
    bool has_cached_ = false;
};

Rng derive_stream(std::uint64_t master, std::span<const std::uint64_t> path);
Rng derive_stream(std::uint64_t master, std::initializer_list<std::uint64_t> path);

/// A master seed plus a path; cheap to copy and extend.
struct StreamKey {
    std::uint64_t master = 0;
    SeedPath path;

    [[nodiscard]] StreamKey child(std::uint64_t element) const;
    [[nodiscard]] StreamKey child(std::initializer_list<std::uint64_t> elements) const;
    [[nodiscard]] Rng rng() const { return derive_stream(master, path); }
    [[nodiscard]] std::uint64_t seed() const { return stream_seed(master, path); }
};

} // namespace madloop
