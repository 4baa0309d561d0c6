#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <sstream>
#include <string>

#include "genclust/error.hpp"

namespace genclust {

// Seeded random stream with algorithms pinned for cross-machine agreement:
// mt19937_64 for bits, 53-bit mantissa mapping for uniforms, polar
// Box-Muller for normals, rejection sampling for bounded integers.
// Identified as "mt19937_64/boxmuller-v1" in run manifests.
class Rng {
 public:
  static constexpr const char* kAlgorithm = "mt19937_64/boxmuller-v1";

  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }

  // Uniform on [0, 1) with 53 random mantissa bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Standard normal via polar Box-Muller; one draw is cached between calls.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform01() - 1.0;
      v = 2.0 * uniform01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    have_spare_ = true;
    return u * m;
  }

  // Uniform integer on [lo, hi], inclusive, bias-free.
  int uniform_int(int lo, int hi) {
    if (hi < lo) throw ValueError("Rng::uniform_int: empty range");
    const std::uint64_t r = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
    const std::uint64_t bound = (~std::uint64_t(0) / r) * r;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= bound);
    return lo + static_cast<int>(x % r);
  }

  // State round-trips losslessly; the engine uses the standard's text
  // format and the Box-Muller spare is kept as a hex float.
  std::string save_state() const {
    std::ostringstream os;
    os << engine_ << " " << (have_spare_ ? 1 : 0);
    if (have_spare_) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), " %a", spare_);
      os << buf;
    }
    return os.str();
  }

  void load_state(const std::string& s) {
    std::istringstream is(s);
    is >> engine_;
    int flag = 0;
    is >> flag;
    if (!is) throw FormatError("Rng::load_state: malformed state string");
    have_spare_ = flag != 0;
    spare_ = 0.0;
    if (have_spare_) {
      std::string tok;
      is >> tok;
      if (tok.empty()) throw FormatError("Rng::load_state: missing spare value");
      spare_ = std::strtod(tok.c_str(), nullptr);
    }
  }

  bool operator==(const Rng& o) const {
    return engine_ == o.engine_ && have_spare_ == o.have_spare_ &&
           (!have_spare_ || spare_ == o.spare_);
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace genclust
