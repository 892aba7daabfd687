#pragma once

#include <filesystem>
#include <string>

#include "ddc/dp_solver.hpp"
#include "ddc/first_stage.hpp"
#include "ddc/model.hpp"
#include "ddc/panel.hpp"

namespace ddc::test {

/// One state, one self-looping action, u = -theta.
inline ModelSpec self_loop(double beta = 0.9, double theta = 1.0) {
  ModelSpec::Builder b("loop", 1, 1, beta, Theta({"c"}, {theta}));
  b.utility(0, 0, 0.0, {-1.0}).transition(0, 0, 0, 1.0);
  return std::move(b).build();
}

inline FoodChoiceModel food_1a() { return FoodChoiceModel(FoodChoiceConfig{}); }

/// First stage estimated from a DP-generated panel.
inline FirstStage estimated_first_stage(const ModelSpec& m, std::size_t agents,
                                        std::size_t periods, std::uint64_t seed = 11) {
  const RealTable ccps = ccps_from_fixed_point(m, m.reference_theta());
  return estimate_first_stage(generate_panel(m, ccps, seed, agents, periods));
}

inline FirstStage exact_first_stage(const ModelSpec& m) {
  return FirstStage::exact(m, ccps_from_fixed_point(m, m.reference_theta()));
}

/// Fresh scratch directory under the system temp dir.
inline std::string scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("ddc_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace ddc::test
