#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "rsam/optim.hpp"

namespace rsam {

struct CheckpointEntry {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  bool stiefel = false;
  Matrix value;
};

struct Checkpoint {
  std::string experiment;
  std::size_t step = 0;
  std::vector<CheckpointEntry> entries;
};

/// Writes `<stem>.bin` (little-endian float64, groups in order) and
/// `<stem>.meta.json` (names, shapes, manifolds).
void save_checkpoint(const std::filesystem::path& stem, const std::string& experiment,
                     std::size_t step, const std::vector<ParamGroup>& groups);

/// Accepts either the stem, the .bin or the .meta.json path. Throws
/// FormatError / LengthError on malformed input.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies checkpoint values into `groups`, matching by name. Throws
/// ConfigError on a missing group or a shape/manifold mismatch and
/// NumericError when a Stiefel value is off the manifold.
void restore_groups(const Checkpoint& ckpt, std::vector<ParamGroup>& groups);

}  // namespace rsam
