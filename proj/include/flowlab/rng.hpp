#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace flowlab {

/// Philox4x32-10 counter-based block cipher (Salmon et al., SC'11).
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter counter, Key key) noexcept;
};

/// Standard normal variates addressed by (seed, stream, step).
///
/// Every value is a pure function of its address, so a path's increments
/// never depend on scheduling or on how many other paths were drawn.
class GaussianStream {
 public:
  GaussianStream(std::uint64_t seed, std::uint64_t stream) noexcept;

  /// Writes `out.size()` standard normals for grid step `step`.
  void fill(std::uint64_t step, std::span<double> out) const;

  /// Uniform in [0,1) with 53-bit resolution, addressed like `fill`.
  double uniform(std::uint64_t step, std::uint32_t slot) const noexcept;

 private:
  Philox4x32::Key key_;
  std::uint32_t stream_lo_;
  std::uint32_t stream_hi_;
};

}  // namespace flowlab
