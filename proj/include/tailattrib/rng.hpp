#pragma once

#include <cmath>
#include <cstdint>

namespace tailattrib {

// Counter-based generator keyed by (seed, stream_id). Identical keys replay
// the same sequence; distinct stream_ids give independent substreams, so
// parallel workers can each own one without coordination.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint32_t stream_id = 0)
      : seed_(seed), stream_id_(stream_id), key_(make_key(seed, stream_id)) {}

  std::uint64_t seed() const { return seed_; }
  std::uint32_t stream_id() const { return stream_id_; }

  // Fresh stream sharing the seed; used to partition work across workers.
  RngStream substream(std::uint32_t id) const {
    return RngStream(seed_, stream_id_ ^ (0x9E370001u * (id + 1)));
  }

  std::uint64_t next_u64() {
    std::uint64_t z = key_ + counter_++ * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform on (0,1); never returns an exact endpoint.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1p-53;
  }

  double exponential() { return -std::log(uniform()); }

  double gauss() {
    double u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925287 * u2);
  }

 private:
  static std::uint64_t make_key(std::uint64_t seed, std::uint32_t stream_id) {
    std::uint64_t z = seed + 0xD1B54A32D192ED03ULL *
                                 (static_cast<std::uint64_t>(stream_id) + 1);
    z = (z ^ (z >> 33)) * 0xFF51AFD7ED558CCDULL;
    z = (z ^ (z >> 33)) * 0xC4CEB9FE1A85EC53ULL;
    return z ^ (z >> 33);
  }

  std::uint64_t seed_;
  std::uint32_t stream_id_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace tailattrib
