#include "edrloop/rng.hpp"

namespace edrloop {

std::uint64_t derive_seed(std::uint64_t master, std::string_view label) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : label) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    h ^= master + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    // One splitmix64 round so adjacent labels do not yield adjacent streams.
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
    h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
    return h ^ (h >> 31);
}

} // namespace edrloop
