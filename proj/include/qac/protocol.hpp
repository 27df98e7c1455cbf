#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>

#include "qac/quantizer.hpp"

namespace qac {

// How agents seed their coordination variables at round zero: FromState
// derives the region vote and window from the initial value, Zeros starts
// everything at zero.
enum class CoordInit { FromState, Zeros };

struct ProtocolParams {
  double surplus_gain = 0.1;  // fraction of stored surplus folded back per round
  double zoom_factor = 0.2;   // relative step change applied on a zoom
  int bits = 8;               // per-value wire width
  int sync_period = 1;        // rounds between frame updates; must bound the diameter
  std::optional<double> epsilon;  // accuracy target enabling the stop rule
  CoordInit coord_init = CoordInit::FromState;
  double step0 = 1.0;
  double midpoint0 = 0.0;

  void validate() const {
    if (!(surplus_gain > 0.0) || !std::isfinite(surplus_gain))
      throw std::invalid_argument("protocol: surplus gain must be positive");
    if (!(zoom_factor > 0.0) || !std::isfinite(zoom_factor))
      throw std::invalid_argument("protocol: zoom factor must be positive");
    if (sync_period < 1)
      throw std::invalid_argument("protocol: sync period must be at least 1");
    if (epsilon && !(*epsilon > 0.0))
      throw std::invalid_argument("protocol: accuracy target must be positive");
    initial_frame().validate();
  }

  QuantizerFrame initial_frame() const { return {bits, step0, midpoint0}; }

  // Frame updates happen at positive multiples of the sync period.
  bool is_sync_instant(long k) const { return k > 0 && k % sync_period == 0; }
};

struct AgentState {
  double value = 0.0;    // running consensus estimate
  double surplus = 0.0;  // mass not yet folded into the estimate
  int vote = 0;          // region vote, advanced by max-consensus
  double qmax = 0.0;     // largest quantized value seen this window (max-consensus)
  double qmin = 0.0;     // smallest quantized value seen this window (min-consensus)
  bool stopped = false;

  bool operator==(const AgentState&) const = default;
};

// One broadcast: four codes under the agreed frame plus the 2-bit vote,
// 4 * bits + 2 wire bits in total.
struct RoundMessage {
  QuantCode value_code;    // estimate, frame (bits, step, midpoint)
  QuantCode surplus_code;  // surplus, frame (bits, step, 0)
  int vote = 0;
  QuantCode qmax_code;
  QuantCode qmin_code;

  bool operator==(const RoundMessage&) const = default;
};

// Outcome of one frame update; identical at every agent on the same round.
struct FrameDecision {
  int vote = 0;            // network vote that was applied
  QuantizerFrame frame;    // frame for the next window
  bool stop = false;       // stop rule fired before the frame changed

  bool operator==(const FrameDecision&) const = default;
};

// A received pair after decoding: estimate and surplus values.
struct DecodedPair {
  double value = 0.0;
  double surplus = 0.0;
};

// Coordination fields of a received message after decoding.
struct CoordValues {
  int vote = 0;
  double qmax = 0.0;
  double qmin = 0.0;
};

// Surpluses travel under the same bit budget and step but centered at zero,
// since surplus mass shrinks toward zero rather than toward the estimate.
inline QuantizerFrame surplus_frame(const QuantizerFrame& f) {
  return {f.bits, f.step, 0.0};
}

// Region vote for a value against a frame covering [midpoint - h, midpoint + h]:
//   +1  outside the covered interval (grid must widen),
//   -1  strictly inside the shrunken interval h / (1 + zoom_factor) (grid may
//       tighten without losing the value),
//    0  in the guard band between the two.
// Both comparisons are strict so boundary values land in the guard band.
inline int classify_region(double x, const QuantizerFrame& f, double zoom_factor) {
  if (!(zoom_factor > 0.0))
    throw std::invalid_argument("classify_region: zoom factor must be positive");
  const double dist = std::abs(x - f.midpoint);
  const double h = f.half_range();
  if (dist > h) return 1;
  if (dist < h / (1.0 + zoom_factor)) return -1;
  return 0;
}

inline AgentState init_agent(double x0, const ProtocolParams& p,
                             const QuantizerFrame& frame0) {
  if (!std::isfinite(x0))
    throw std::invalid_argument("init_agent: initial value must be finite");
  AgentState a;
  a.value = x0;
  a.surplus = 0.0;
  if (p.coord_init == CoordInit::FromState) {
    a.vote = classify_region(x0, frame0, p.zoom_factor);
    a.qmax = a.qmin = quantize(x0, frame0);
  }
  return a;
}

inline RoundMessage make_message(const AgentState& a, const QuantizerFrame& f) {
  if (a.stopped)
    throw std::logic_error("make_message: stopped agents transmit nothing");
  const QuantizerFrame fs = surplus_frame(f);
  return {encode(a.value, f), encode(a.surplus, fs), a.vote,
          encode(a.qmax, f), encode(a.qmin, f)};
}

// One synchronous estimate/surplus update. received holds the agent's own
// decoded pair at index 0 followed by its in-neighbors' pairs; pull_w and
// push_w are the matching averaging and splitting weights. The difference
// between the true and transmitted values re-enters locally, so the network
// sum of value + surplus is preserved exactly in real arithmetic.
inline AgentState state_update(const AgentState& a, double surplus_gain,
                               std::span<const DecodedPair> received,
                               std::span<const double> pull_w,
                               std::span<const double> push_w) {
  if (received.empty())
    throw std::invalid_argument("state_update: received list must include the agent itself");
  if (received.size() != pull_w.size() || received.size() != push_w.size())
    throw std::invalid_argument("state_update: weights must match the received list");
  double mixed_value = 0.0;
  double mixed_surplus = 0.0;
  for (std::size_t i = 0; i < received.size(); ++i) {
    mixed_value += pull_w[i] * received[i].value;
    mixed_surplus += push_w[i] * received[i].surplus;
  }
  AgentState out = a;
  out.value = mixed_value + surplus_gain * a.surplus + (a.value - received[0].value);
  out.surplus = mixed_surplus + (a.value - out.value) + (a.surplus - received[0].surplus);
  return out;
}

// Coordination flooding: vote and window maximum advance by max, window
// minimum by min, over the agent's own fields and everything received this
// round. After sync_period consecutive rounds every agent holds the
// network-wide extrema.
inline AgentState merge_coordination(const AgentState& a,
                                     std::span<const CoordValues> received) {
  AgentState out = a;
  for (const auto& c : received) {
    out.vote = std::max(out.vote, c.vote);
    out.qmax = std::max(out.qmax, c.qmax);
    out.qmin = std::min(out.qmin, c.qmin);
  }
  return out;
}

// Frame update at a sync instant. The stop rule is evaluated against the
// step size of the window that just closed, before any zoom: once the
// flooded window satisfies qmax - qmin <= epsilon - step, every estimate is
// within epsilon of the exact average and the run may halt with the frame
// unchanged. Otherwise the network vote scales the step, the midpoint
// recenters on the window, and the agent reseeds vote and window from its
// own value under the new frame.
inline std::pair<AgentState, FrameDecision> sync_update(const AgentState& a,
                                                        const QuantizerFrame& f,
                                                        const ProtocolParams& p) {
  FrameDecision d;
  d.vote = a.vote;
  d.stop = p.epsilon.has_value() && (a.qmax - a.qmin <= *p.epsilon - f.step);
  if (d.stop) {
    d.frame = f;
    AgentState out = a;
    out.stopped = true;
    return {out, d};
  }
  d.frame = zoom(f, a.vote, p.zoom_factor);
  d.frame.midpoint = 0.5 * (a.qmax + a.qmin);
  AgentState out = a;
  out.vote = classify_region(a.value, d.frame, p.zoom_factor);
  out.qmax = out.qmin = quantize(a.value, d.frame);
  return {out, d};
}

}  // namespace qac
