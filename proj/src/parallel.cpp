#include "squeezelab/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>

namespace squeezelab {

std::size_t worker_count() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SQUEEZELAB_THREADS")) {
    try {
      const long cap = std::stol(env);
      if (cap >= 1) n = std::min(n, static_cast<std::size_t>(cap));
    } catch (const std::exception&) {
      // Unparseable caps are ignored.
    }
  }
  return n;
}

}  // namespace squeezelab
