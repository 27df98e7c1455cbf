#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>

namespace qac {

// Uniform saturating mid-rise quantizer shared by every agent. A frame is the
// triple (bit budget, step size, midpoint); the representable values are
//   midpoint + step * l,   l = -(2^(bits-1)-1) .. +(2^(bits-1)-1),
// i.e. 2^bits - 1 levels placed symmetrically around the midpoint. Inputs
// outside the covered interval saturate to the extreme levels.
struct QuantizerFrame {
  int bits = 8;
  double step = 1.0;
  double midpoint = 0.0;

  void validate() const {
    if (bits < 2 || bits > 53)
      throw std::invalid_argument("quantizer: bits must lie in [2, 53]");
    if (!std::isfinite(step) || step <= 0.0)
      throw std::invalid_argument("quantizer: step must be positive and finite");
    if (!std::isfinite(midpoint))
      throw std::invalid_argument("quantizer: midpoint must be finite");
  }

  // Largest level index, 2^(bits-1) - 1.
  std::int64_t max_level() const { return (std::int64_t{1} << (bits - 1)) - 1; }

  // Half-width of the covered input interval, step * (2^(bits-1) - 1/2).
  double half_range() const {
    return (static_cast<double>(max_level()) + 0.5) * step;
  }

  bool operator==(const QuantizerFrame&) const = default;
};

// Wire code for one quantized value: bits-wide unsigned level offset.
// Valid codes are 0 .. 2^bits - 2; the all-ones word never occurs.
struct QuantCode {
  std::uint64_t code = 0;
  bool operator==(const QuantCode&) const = default;
};

// Saturation thresholds (lower, upper). Values above the upper threshold
// clip to +max_level, values at or below the lower one clip to -max_level.
inline std::pair<double, double> frame_limits(const QuantizerFrame& f) {
  const double h = f.half_range();
  return {f.midpoint - h, f.midpoint + h};
}

// Level index for x: nearest level inside the frame, extreme level outside.
inline std::int64_t quantize_level(double x, const QuantizerFrame& f) {
  if (!std::isfinite(x))
    throw std::invalid_argument("quantizer: input must be finite");
  const std::int64_t lmax = f.max_level();
  const auto [lo, hi] = frame_limits(f);
  if (x > hi) return lmax;
  if (x <= lo) return -lmax;
  const double l = std::floor((x - f.midpoint) / f.step + 0.5);
  const double bound = static_cast<double>(lmax);
  if (l >= bound) return lmax;
  if (l <= -bound) return -lmax;
  return static_cast<std::int64_t>(l);
}

inline double level_value(std::int64_t level, const QuantizerFrame& f) {
  return f.midpoint + f.step * static_cast<double>(level);
}

// Nearest representable value. Idempotent: quantize(quantize(x)) == quantize(x).
inline double quantize(double x, const QuantizerFrame& f) {
  return level_value(quantize_level(x, f), f);
}

inline QuantCode encode(double x, const QuantizerFrame& f) {
  return {static_cast<std::uint64_t>(quantize_level(x, f) + f.max_level())};
}

// Inverse of encode. Rejects the unused all-ones word and anything wider
// than the frame's bit budget; decode(encode(x)) == quantize(x) exactly.
inline double decode(QuantCode c, const QuantizerFrame& f) {
  const std::uint64_t top = 2 * static_cast<std::uint64_t>(f.max_level());
  if (c.code > top)
    throw std::invalid_argument("quantizer: code outside the valid range");
  return level_value(static_cast<std::int64_t>(c.code) - f.max_level(), f);
}

// Step-size update: vote +1 widens the grid by (1+a), vote -1 tightens it
// by the same factor, vote 0 leaves it unchanged. Midpoint is not touched.
inline QuantizerFrame zoom(const QuantizerFrame& f, int vote, double zoom_factor) {
  if (!std::isfinite(zoom_factor) || zoom_factor <= 0.0)
    throw std::invalid_argument("zoom: factor must be positive and finite");
  QuantizerFrame out = f;
  switch (vote) {
    case 1: out.step = f.step * (1.0 + zoom_factor); break;
    case -1: out.step = f.step / (1.0 + zoom_factor); break;
    case 0: break;
    default: throw std::invalid_argument("zoom: vote must be -1, 0, or 1");
  }
  if (!(out.step > 0.0) || !std::isfinite(out.step))
    throw std::overflow_error("zoom: step size left the representable range");
  return out;
}

}  // namespace qac
