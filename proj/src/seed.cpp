#include "deplen/seed.hpp"

namespace deplen {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = mix64(base);
  for (std::uint64_t coord : path) {
    h = mix64(h ^ mix64(coord + 0x632be59bd9b4e019ULL));
  }
  return h;
}

Rng make_stream(std::uint64_t session_seed, Stream stream) {
  return Rng(derive_seed(session_seed, {static_cast<std::uint64_t>(stream)}));
}

}  // namespace deplen
