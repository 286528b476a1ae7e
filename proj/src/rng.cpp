#include "flowlab/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace flowlab {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) noexcept {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(product >> 32);
  lo = static_cast<std::uint32_t>(product);
}

inline double to_unit53(std::uint32_t hi, std::uint32_t lo) noexcept {
  const std::uint64_t bits = (static_cast<std::uint64_t>(hi >> 5) << 26) | (lo >> 6);
  return static_cast<double>(bits) * 0x1.0p-53;
}

}  // namespace

Philox4x32::Counter Philox4x32::generate(Counter ctr, Key key) noexcept {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

GaussianStream::GaussianStream(std::uint64_t seed, std::uint64_t stream) noexcept
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      stream_lo_(static_cast<std::uint32_t>(stream)),
      stream_hi_(static_cast<std::uint32_t>(stream >> 32)) {}

void GaussianStream::fill(std::uint64_t step, std::span<double> out) const {
  if (step > 0xFFFFFFFFull) throw std::out_of_range("GaussianStream: step index exceeds 2^32");
  const auto step32 = static_cast<std::uint32_t>(step);
  // Each Philox block yields two 53-bit uniforms and one Box-Muller pair.
  for (std::size_t i = 0; i < out.size(); i += 2) {
    const auto block = static_cast<std::uint32_t>(i / 2);
    const auto r = Philox4x32::generate({step32, block, stream_lo_, stream_hi_}, key_);
    const double u1 = 1.0 - to_unit53(r[0], r[1]);  // (0, 1]
    const double u2 = to_unit53(r[2], r[3]);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    if (i + 1 < out.size()) {
      out[i] = radius * std::cos(angle);
      out[i + 1] = radius * std::sin(angle);
    } else {
      out[i] = radius * std::cos(angle);  // odd tail: the sine is never used
    }
  }
}

double GaussianStream::uniform(std::uint64_t step, std::uint32_t slot) const noexcept {
  // Slots live above the normal blocks so they never alias increments.
  const auto r = Philox4x32::generate({static_cast<std::uint32_t>(step), 0x80000000u | slot, stream_lo_, stream_hi_}, key_);
  return to_unit53(r[0], r[1]);
}

}  // namespace flowlab
