#include "humanflow/config.hpp"

#include <fstream>
#include <sstream>

namespace hf {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

long parse_long(const std::string& key, const std::string& v) {
  size_t pos = 0;
  long out;
  try {
    out = std::stol(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer for " + key + ": '" + v + "'");
  }
  if (pos != v.size())
    throw ConfigError("config: bad integer for " + key + ": '" + v + "'");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  size_t pos = 0;
  double out;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError("config: bad number for " + key + ": '" + v + "'");
  }
  if (pos != v.size())
    throw ConfigError("config: bad number for " + key + ": '" + v + "'");
  return out;
}

std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(key, trim(item)));
  if (out.empty()) throw ConfigError("config: empty list for " + key);
  return out;
}

}  // namespace

void RunConfig::apply(const std::string& key, const std::string& value) {
  if (key == "seed") seed = static_cast<uint64_t>(parse_long(key, value));
  else if (key == "corpus.sequences") corpus_sequences = parse_long(key, value);
  else if (key == "corpus.frames") corpus_frames = parse_long(key, value);
  else if (key == "corpus.fps") fps = parse_double(key, value);
  else if (key == "track.protocol") {
    if (value != "occ10" && value != "occl")
      throw ConfigError("config: track.protocol must be occ10 or occl");
    track_protocol = value;
  }
  else if (key == "track.noise") track_noise = parse_double(key, value);
  else if (key == "track.sequences") track_sequences = parse_long(key, value);
  else if (key == "track.samples") track_samples = parse_long(key, value);
  else if (key == "train.codec_iters") codec_iters = parse_long(key, value);
  else if (key == "train.diffusion_iters") diffusion_iters = parse_long(key, value);
  else if (key == "train.policy_iters") policy_iters = parse_long(key, value);
  else if (key == "train.batch") batch = parse_long(key, value);
  else if (key == "train.policy_batch") policy_batch = parse_long(key, value);
  else if (key == "train.codec_lr") codec_lr = parse_double(key, value);
  else if (key == "train.diffusion_lr") diffusion_lr = parse_double(key, value);
  else if (key == "train.policy_lr") policy_lr = parse_double(key, value);
  else if (key == "dataset.records") dataset_records = parse_long(key, value);
  else if (key == "dataset.scenarios") dataset_scenarios = parse_long(key, value);
  else if (key == "dataset.annulus_min") annulus_min = parse_double(key, value);
  else if (key == "dataset.annulus_max") annulus_max = parse_double(key, value);
  else if (key == "dataset.safety_margin") gen_safety_margin = parse_double(key, value);
  else if (key == "nav.episodes") nav_episodes = parse_long(key, value);
  else if (key == "nav.goal_radius") goal_radius = parse_double(key, value);
  else if (key == "nav.episode_cap") episode_cap = parse_double(key, value);
  else if (key == "nav.noise") nav_noise = parse_list(key, value);
  else if (key == "nav.forecast_samples") forecast_samples = parse_long(key, value);
  else if (key == "mav.horizon") mav_horizon = parse_long(key, value);
  else if (key == "mav.dt") mav_dt = parse_double(key, value);
  else if (key == "mav.safety_dist") safety_dist = parse_double(key, value);
  else if (key == "policy.flow_steps") flow_steps = static_cast<int>(parse_long(key, value));
  else throw ConfigError("config: unknown key '" + key + "'");
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: missing '=' at " + path + ":" +
                        std::to_string(lineno));
    apply(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void RunConfig::apply_overrides(const std::vector<std::string>& overrides) {
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: override must be key=value, got '" + ov + "'");
    std::string k = ov.substr(0, eq), v = ov.substr(eq + 1);
    apply(k, v);
  }
}

}  // namespace hf
