#pragma once

// Philox4x32-10 counter-based generator, as in Random123.
//
// Every draw is a pure function of (key, counter), so a trial's random numbers do not
// depend on which thread runs it or in what order.

#include <array>
#include <cstdint>

namespace pooltest {

class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter block(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
};

// Uniform doubles addressed by (seed, trial, stream, index).
class TrialStream {
 public:
  TrialStream(std::uint64_t seed, std::uint64_t trial, std::uint32_t stream)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        trial_(trial),
        stream_(stream) {}

  // Uniform in [0, 1) with 53 random bits.
  double uniform(std::uint32_t index) const {
    const auto out = Philox4x32::block({index, stream_, static_cast<std::uint32_t>(trial_),
                                        static_cast<std::uint32_t>(trial_ >> 32)},
                                       key_);
    const std::uint64_t bits = (static_cast<std::uint64_t>(out[0]) << 21) ^ (out[1] >> 11);
    return static_cast<double>(bits) * 0x1.0p-53;
  }

 private:
  Philox4x32::Key key_;
  std::uint64_t trial_;
  std::uint32_t stream_;
};

}  // namespace pooltest
