#include "madloop/rng.hpp"

#include <cmath>

namespace madloop {

namespace {
constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kMasterSalt = 0x6a09e667f3bcc909ULL;
} // namespace

std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t stream_seed(std::uint64_t master, std::span<const std::uint64_t> path) noexcept {
    std::uint64_t h = mix64(master ^ kMasterSalt);
    for (std::uint64_t e : path) {
        h = mix64((h ^ mix64(e + kGolden)) + kGolden);
    }
    return h;
}

double Rng::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
    if (has_cached_) {
        has_cached_ = false;
        return cached_normal_;
    }
    double u = 0.0;
    double v = 0.0;
    double s = 0.0;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    cached_normal_ = v * f;
    has_cached_ = true;
    return u * f;
}

std::uint64_t Rng::index(std::uint64_t n) {
    if (n <= 1) {
        return 0;
    }
    // 2^64 mod n computed without overflow.
    const std::uint64_t rem = (0 - n) % n;
    for (;;) {
        const std::uint64_t x = engine_();
        if (rem == 0 || x < 0 - rem) {
            return x % n;
        }
    }
}

Rng derive_stream(std::uint64_t master, std::span<const std::uint64_t> path) {
    return Rng(stream_seed(master, path));
}

Rng derive_stream(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
    return Rng(stream_seed(master, std::span<const std::uint64_t>(path.begin(), path.size())));
}

StreamKey StreamKey::child(std::uint64_t element) const {
    StreamKey out = *this;
    out.path.push_back(element);
    return out;
}

StreamKey StreamKey::child(std::initializer_list<std::uint64_t> elements) const {
    StreamKey out = *this;
    out.path.insert(out.path.end(), elements.begin(), elements.end());
    return out;
}

} // namespace madloop
