#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "knockoff/mlp.hpp"

namespace knockoff {

// What the victim does to its posterior before answering a query.
struct DefensePolicy {
  enum class Kind { none, topk, rounding, argmax };
  Kind kind = Kind::none;
  std::size_t k = 0;   // topk: entries kept
  int decimals = 0;    // rounding: digits kept

  bool operator==(const DefensePolicy&) const = default;
};

// Grammar: "none" | "topk:<k>" | "round:<r>" | "argmax"
inline DefensePolicy parse_defense(const std::string& text) {
  DefensePolicy p;
  if (text == "none") return p;
  if (text == "argmax") {
    p.kind = DefensePolicy::Kind::argmax;
    return p;
  }
  auto colon = text.find(':');
  std::string head = text.substr(0, colon);
  std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  try {
    if (head == "topk") {
      p.kind = DefensePolicy::Kind::topk;
      std::size_t used = 0;
      long v = std::stol(arg, &used);
      if (used != arg.size() || v < 1) throw std::invalid_argument("");
      p.k = static_cast<std::size_t>(v);
      return p;
    }
    if (head == "round") {
      p.kind = DefensePolicy::Kind::rounding;
      std::size_t used = 0;
      long v = std::stol(arg, &used);
      if (used != arg.size() || v < 0 || v > 12) throw std::invalid_argument("");
      p.decimals = static_cast<int>(v);
      return p;
    }
  } catch (const std::exception&) {
    throw std::invalid_argument("parse_defense: bad defense '" + text + "'");
  }
  throw std::invalid_argument("parse_defense: unknown defense '" + text + "'");
}

inline std::string format_defense(const DefensePolicy& p) {
  switch (p.kind) {
    case DefensePolicy::Kind::none: return "none";
    case DefensePolicy::Kind::argmax: return "argmax";
    case DefensePolicy::Kind::topk: return "topk:" + std::to_string(p.k);
    case DefensePolicy::Kind::rounding: return "round:" + std::to_string(p.decimals);
  }
  throw std::invalid_argument("format_defense: bad kind");
}

// Applies the defense. Outputs may be unnormalized (topk) or carry less mass
// than 1; they are never renormalized, that information loss is the point.
// The original argmax always still attains the maximum of the output.
inline std::vector<double> truncate(std::span<const double> posterior, const DefensePolicy& policy) {
  if (posterior.empty()) throw std::invalid_argument("truncate: empty posterior");
  for (double v : posterior)
    if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("truncate: bad posterior entry");

  std::vector<double> out(posterior.begin(), posterior.end());
  switch (policy.kind) {
    case DefensePolicy::Kind::none:
      return out;

    case DefensePolicy::Kind::topk: {
      if (policy.k == 0 || policy.k > posterior.size())
        throw std::invalid_argument("truncate: topk k out of range");
      std::vector<std::size_t> idx(posterior.size());
      std::iota(idx.begin(), idx.end(), 0);
      // ties at the k-th value keep the smallest indices
      std::stable_sort(idx.begin(), idx.end(),
                       [&](std::size_t a, std::size_t b) { return posterior[a] > posterior[b]; });
      std::fill(out.begin(), out.end(), 0.0);
      for (std::size_t r = 0; r < policy.k; ++r) out[idx[r]] = posterior[idx[r]];
      return out;
    }

    case DefensePolicy::Kind::rounding: {
      double scale = std::pow(10.0, policy.decimals);
      for (double& v : out) v = std::round(v * scale) / scale;  // half away from zero
      return out;
    }

    case DefensePolicy::Kind::argmax: {
      std::size_t best = static_cast<std::size_t>(argmax_index(posterior));
      std::fill(out.begin(), out.end(), 0.0);
      out[best] = 1.0;
      return out;
    }
  }
  throw std::invalid_argument("truncate: bad defense kind");
}

}  // namespace knockoff
