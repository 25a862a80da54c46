#include "isac/rng.hpp"
#include "isac/common.hpp"

#include <cmath>

namespace isac {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
    std::uint64_t h = splitmix64(seed);
    for (auto t : tags) h = splitmix64(h ^ splitmix64(t + 0x632be59bd9b4e019ULL));
    return h;
}

Rng make_rng(std::uint64_t seed, Stream stream, std::initializer_list<std::uint64_t> tags) {
    std::uint64_t h = derive_seed(seed, {static_cast<std::uint64_t>(stream)});
    h = derive_seed(h, tags);
    std::seed_seq seq{static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
    return Rng(seq);
}

double wrap_angle(double rad) {
    double a = std::remainder(rad, 2.0 * kPi);
    if (a <= -kPi) a += 2.0 * kPi;
    return a;
}

std::string to_string(TargetClass c) {
    return c == TargetClass::pedestrian ? "pedestrian" : "vehicle";
}

TargetClass target_class_from_string(const std::string& s) {
    if (s == "pedestrian") return TargetClass::pedestrian;
    if (s == "vehicle") return TargetClass::vehicle;
    throw ConfigError("unknown target class '" + s + "'");
}

}  // namespace isac
