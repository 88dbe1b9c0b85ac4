#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace distinct {

enum class PassRule { single_draw, all_replicates, majority };

/// How draws at different sizes relate. Independent redraws a fresh
/// subsample per size; nested reuses one per-stratum ordering, so a smaller
/// subsample is always contained in a larger one for the same seed.
enum class Nesting { independent, nested };

struct AlignmentConfig {
  double alpha = 0.05;
  int permutations = 999;
  bool use_wasserstein = true;
  bool use_ks = true;
  std::uint64_t seed = 0;
  int replicates = 1;
  PassRule pass_rule = PassRule::single_draw;
  Nesting nesting = Nesting::independent;

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
    if (permutations < 1) throw std::invalid_argument("permutations must be >= 1");
    if (replicates < 1) throw std::invalid_argument("replicates must be >= 1");
    if (!use_wasserstein && !use_ks) throw std::invalid_argument("at least one test method is required");
  }
};

inline std::string to_string(PassRule r) {
  switch (r) {
    case PassRule::single_draw: return "single_draw";
    case PassRule::all_replicates: return "all_replicates";
    case PassRule::majority: return "majority";
  }
  return "?";
}

inline PassRule parse_pass_rule(const std::string& s) {
  if (s == "single_draw") return PassRule::single_draw;
  if (s == "all_replicates") return PassRule::all_replicates;
  if (s == "majority") return PassRule::majority;
  throw std::invalid_argument("unknown pass rule '" + s + "'");
}

inline std::string to_string(Nesting n) { return n == Nesting::nested ? "nested" : "independent"; }

}  // namespace distinct
