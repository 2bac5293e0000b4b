#pragma once

#include <cstdint>
#include <random>

namespace fedcni {

// splitmix64 finalizer; good avalanche, cheap, stable across platforms.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derives an independent stream seed from a base seed plus up to three
// stream coordinates (e.g. purpose tag, client id, round). Client streams
// depend only on their coordinates, never on execution order.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a = 0,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t s = mix64(base);
    s = mix64(s ^ mix64(a * 0xa24baed4963ee407ULL + 1));
    s = mix64(s ^ mix64(b * 0x9fb21c651e98df25ULL + 2));
    s = mix64(s ^ mix64(c * 0xd6e8feb86659fd93ULL + 3));
    return s;
}

// Fixed purpose tags so data generation, model init and per-client training
// never share a stream.
namespace stream {
inline constexpr std::uint64_t kBlobs = 0x01;
inline constexpr std::uint64_t kPartition = 0x02;
inline constexpr std::uint64_t kNoiseLevels = 0x03;
inline constexpr std::uint64_t kCorrupt = 0x04;
inline constexpr std::uint64_t kModelInit = 0x05;
inline constexpr std::uint64_t kClientRound = 0x06;
}  // namespace stream

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

}  // namespace fedcni
