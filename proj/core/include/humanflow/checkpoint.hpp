#pragma once

#include <map>
#include <string>

#include "humanflow/nn.hpp"

namespace hf {

class CheckpointError : public std::runtime_error {
 public:
  explicit CheckpointError(const std::string& what)
      : std::runtime_error(what) {}
};

/// Writes `manifest.txt` (format version, hyperparameters, per-tensor
/// name/shape/offset) plus `params.bin` (little-endian f32) under `dir`.
void save_checkpoint(const std::string& dir, const ParamStore& params,
                     const std::map<std::string, std::string>& hyper = {});

/// Restores every tensor into an already-constructed model. Shape or name
/// mismatches are reported with the offending tensor name.
std::map<std::string, std::string> load_checkpoint(const std::string& dir,
                                                   ParamStore& params);

/// Reads just the hyperparameter block, for constructing the model first.
std::map<std::string, std::string> read_checkpoint_hyper(
    const std::string& dir);

}  // namespace hf
