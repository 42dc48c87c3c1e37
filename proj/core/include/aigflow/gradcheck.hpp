#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace aigflow {

struct GradCheckEntry {
  std::string name;
  double rel_err = 0.0;
  std::size_t elements = 0;  // perturbed input elements
  double kink_margin = 0.0;  // distance of the evaluation point to the nearest kink
};

/// Central-difference checks of every tensor op and every composed model
/// block (small model, random circuit) for one seed. Model parameters are
/// re-drawn until no relu input or L1 residual lies within 10 steps of zero.
std::vector<GradCheckEntry> gradcheck_suite(std::uint64_t seed);

}  // namespace aigflow
