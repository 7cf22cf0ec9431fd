#pragma once

// Visual-token accounting for the slow/fast frame representation
// (T frames, M tokens per unpooled frame, strike rate s, pooling stride p).

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "vidforge/util.hpp"

namespace vidforge::repplan {

/// literal: per-frame counts floor(M/p^2) and floor(M/(4p^2)).
/// grid:    2-D pooling on a sqrt(M) x sqrt(M) token grid, giving
///          floor(sqrt(M)/p)^2 and floor(sqrt(M)/(2p))^2.
enum class Convention { Literal, Grid };

inline std::string_view convention_name(Convention c) { return c == Convention::Grid ? "grid" : "literal"; }

inline Convention parse_convention(std::string_view s) {
  if (s == "grid") return Convention::Grid;
  if (s == "literal") return Convention::Literal;
  throw Error("unknown token convention '" + std::string(s) + "' (expected grid or literal)");
}

struct RepConfig {
  std::int64_t frames = 1;           // T
  std::int64_t tokens_per_frame = 1; // M
  std::int64_t strike = 1;           // s
  std::int64_t pool = 1;             // p
};

inline std::int64_t isqrt(std::int64_t n) {
  auto r = static_cast<std::int64_t>(std::sqrt(static_cast<double>(n)));
  while (r * r > n) --r;
  while ((r + 1) * (r + 1) <= n) ++r;
  return r;
}

inline void validate(const RepConfig& c, Convention conv) {
  if (c.frames < 1 || c.tokens_per_frame < 1 || c.strike < 1 || c.pool < 1)
    throw Error("RepConfig: T, M, s, p must all be >= 1");
  if (conv == Convention::Grid) {
    std::int64_t side = isqrt(c.tokens_per_frame);
    if (side * side != c.tokens_per_frame)
      throw Error("RepConfig: grid convention needs a square M, got " + std::to_string(c.tokens_per_frame));
    if (side < 2 * c.pool) throw Error("RepConfig: grid convention needs sqrt(M) >= 2p");
  }
}

struct PerFrameTokens {
  std::int64_t slow = 0;
  std::int64_t fast = 0;
};

inline PerFrameTokens per_frame_tokens(std::int64_t M, std::int64_t p, Convention conv) {
  if (conv == Convention::Grid) {
    std::int64_t side = isqrt(M);
    std::int64_t a = side / p, b = side / (2 * p);
    return {a * a, b * b};
  }
  return {M / (p * p), M / (4 * p * p)};
}

inline std::int64_t slow_count(std::int64_t T, std::int64_t s) { return T / s; }

inline std::int64_t token_count(const RepConfig& c, Convention conv = Convention::Grid) {
  validate(c, conv);
  auto per = per_frame_tokens(c.tokens_per_frame, c.pool, conv);
  std::int64_t n_slow = slow_count(c.frames, c.strike);
  return n_slow * per.slow + (c.frames - n_slow) * per.fast;
}

struct TokenPlan {
  std::vector<std::int64_t> slow_indices;
  std::vector<std::int64_t> fast_indices;
  std::int64_t tokens_slow = 0;
  std::int64_t tokens_fast = 0;
  std::int64_t total = 0;
  Convention convention = Convention::Grid;
};

/// Slow frames are 0, s, 2s, ... limited to floor(T/s) of them; everything
/// else is fast. With s = 1 every frame is slow.
inline TokenPlan build_plan(const RepConfig& c, Convention conv = Convention::Grid) {
  validate(c, conv);
  TokenPlan plan;
  plan.convention = conv;
  auto per = per_frame_tokens(c.tokens_per_frame, c.pool, conv);
  plan.tokens_slow = per.slow;
  plan.tokens_fast = per.fast;
  std::int64_t n_slow = slow_count(c.frames, c.strike);
  for (std::int64_t i = 0; i < c.frames; ++i) {
    bool slow = i % c.strike == 0 && i / c.strike < n_slow;
    (slow ? plan.slow_indices : plan.fast_indices).push_back(i);
  }
  plan.total = static_cast<std::int64_t>(plan.slow_indices.size()) * plan.tokens_slow +
               static_cast<std::int64_t>(plan.fast_indices.size()) * plan.tokens_fast;
  return plan;
}

/// Largest T with token_count((T, M, s, p)) <= budget. token_count is
/// nondecreasing in T, so an exponential probe followed by bisection is exact.
inline std::int64_t max_frames_under_budget(std::int64_t M, std::int64_t s, std::int64_t p, std::int64_t budget,
                                            Convention conv = Convention::Grid) {
  RepConfig c{1, M, s, p};
  std::int64_t one = token_count(c, conv);
  if (budget < one)
    throw Error("budget " + std::to_string(budget) + " is below the " + std::to_string(one) + " tokens of one frame");
  auto per = per_frame_tokens(M, p, conv);
  if (per.slow == 0) throw Error("per-frame token count is zero; every frame count fits the budget");
  auto cost = [&](std::int64_t T) {
    c.frames = T;
    return token_count(c, conv);
  };
  std::int64_t lo = 1, hi = 2;
  while (cost(hi) <= budget) {
    lo = hi;
    hi *= 2;
  }
  // cost(lo) <= budget < cost(hi)
  while (hi - lo > 1) {
    std::int64_t mid = lo + (hi - lo) / 2;
    if (cost(mid) <= budget)
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

inline json to_json(const TokenPlan& p) {
  return {{"convention", convention_name(p.convention)},
          {"slow_indices", p.slow_indices},
          {"fast_indices", p.fast_indices},
          {"tokens_slow", p.tokens_slow},
          {"tokens_fast", p.tokens_fast},
          {"total", p.total}};
}

}  // namespace vidforge::repplan
