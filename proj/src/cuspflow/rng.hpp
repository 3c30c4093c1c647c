#pragma once

#include <array>
#include <cstdint>

namespace cuspflow {

// Philox4x32-10 block function. Stateless: output depends only on (key, counter).
std::array<uint32_t, 4> philox4x32(std::array<uint32_t, 4> counter, std::array<uint32_t, 2> key);

// Counter-based stream. The draw sequence of sample `index` in stream `stream`
// is a pure function of (seed, stream, index), so any partition of samples over
// workers reproduces the same numbers.
class CounterRng {
 public:
  CounterRng(uint64_t seed, uint32_t stream, uint64_t index);

  uint32_t next_u32();
  uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform on {lo, ..., hi}; unbiased by rejection.
  int64_t uniform_int(int64_t lo, int64_t hi);
  double normal();

 private:
  void refill();

  std::array<uint32_t, 2> key_;
  std::array<uint32_t, 4> counter_;
  std::array<uint32_t, 4> block_{};
  int cursor_ = 4;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

// Stream ids used across the library. Keeping them in one place avoids two
// estimators silently sharing randomness.
namespace streams {
inline constexpr uint32_t lattice_sample = 1;
inline constexpr uint32_t haar_modular = 2;
inline constexpr uint32_t haar_reference = 3;
inline constexpr uint32_t folner_atoms = 4;
inline constexpr uint32_t folner_defect = 5;
inline constexpr uint32_t tc_profile = 6;
inline constexpr uint32_t group_sample = 7;
inline constexpr uint32_t word_corpus = 8;
inline constexpr uint32_t sumset_sets = 9;
inline constexpr uint32_t starts = 10;
inline constexpr uint32_t pipeline = 11;
inline constexpr uint32_t chi_segments = 12;
inline constexpr uint32_t replicate_base = 1000;
}  // namespace streams

}  // namespace cuspflow
