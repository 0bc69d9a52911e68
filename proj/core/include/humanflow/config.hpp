#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace hf {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Flat run configuration. File format: one `dotted.key = value` per line,
/// `#` comments, blank lines ignored. Unknown keys are rejected.
struct RunConfig {
  uint64_t seed = 0;

  long corpus_sequences = 64;
  long corpus_frames = 48;
  double fps = 10.0;

  std::string track_protocol = "occ10";  // occ10 | occl
  double track_noise = 3.0;
  long track_sequences = 16;
  long track_samples = 5;

  long codec_iters = 1500;
  long diffusion_iters = 1500;
  long policy_iters = 8000;
  long batch = 16;
  long policy_batch = 64;
  double codec_lr = 1e-3;
  double diffusion_lr = 1e-3;
  double policy_lr = 4e-5;

  long dataset_records = 2000;
  long dataset_scenarios = 10;
  double annulus_min = 1.5;
  double annulus_max = 4.0;
  double gen_safety_margin = 0.15;  // added to safety_dist when generating

  long nav_episodes = 50;
  double goal_radius = 0.2;
  double episode_cap = 15.0;  // seconds
  std::vector<double> nav_noise = {0.0, 5.0};
  long forecast_samples = 10;

  long mav_horizon = 20;
  double mav_dt = 0.1;
  double safety_dist = 0.5;
  int flow_steps = 10;

  /// Set one key; throws ConfigError for unknown keys or bad values.
  void apply(const std::string& key, const std::string& value);
  /// Parse a config file and apply every line.
  void load_file(const std::string& path);
  /// Apply `key=value` override strings (CLI plumbing).
  void apply_overrides(const std::vector<std::string>& overrides);
};

}  // namespace hf
