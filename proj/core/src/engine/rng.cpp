#include "refcolor/engine/rng.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace refcolor {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

std::uint64_t Rng::next_u64() { return engine_(); }

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = 0.0;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
    if (hi < lo) throw std::invalid_argument("uniform_int: hi < lo");
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    // Rejection sampling to avoid modulo bias.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t v = 0;
    do {
        v = next_u64();
    } while (v >= limit);
    return lo + static_cast<std::int64_t>(v % span);
}

Rng Rng::fork(std::uint64_t stream) const {
    return Rng(splitmix64(seed_ ^ splitmix64(stream + 0x1234abcd5678ef01ULL)));
}

std::string Rng::serialize() const {
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os << seed_ << ' ' << engine_ << ' ' << (has_spare_ ? 1 : 0);
    if (has_spare_) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), " %a", spare_);
        os << buf;
    }
    return os.str();
}

Rng Rng::deserialize(const std::string& blob) {
    std::istringstream is(blob);
    is.imbue(std::locale::classic());
    Rng r;
    int spare_flag = 0;
    is >> r.seed_ >> r.engine_ >> spare_flag;
    if (!is) throw std::runtime_error("Rng::deserialize: malformed state blob");
    r.has_spare_ = spare_flag != 0;
    if (r.has_spare_) {
        std::string hex;
        is >> hex;
        if (hex.empty()) throw std::runtime_error("Rng::deserialize: missing spare value");
        r.spare_ = std::strtod(hex.c_str(), nullptr);
    }
    return r;
}

} // namespace refcolor
