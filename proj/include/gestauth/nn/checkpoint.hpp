#pragma once

#include <filesystem>
#include <string>

#include "gestauth/nn/layers.hpp"

namespace gestauth::nn {

/// Checkpoint layout: `<stem>.json` holds {"format", "arch", "seed",
/// "layers": [spec...], "params": [{"name", "shape", "offset"}...],
/// "extra"}; `<stem>.bin` holds every parameter value as little-endian
/// IEEE-754 float64, concatenated in manifest order. `offset` counts values,
/// not bytes.
void save_checkpoint(const std::filesystem::path& stem, Module& model, const std::string& arch,
                     const std::string& extra_json = "{}");

/// Reads the "arch" and "extra" entries of a manifest without touching a model.
std::string checkpoint_arch(const std::filesystem::path& stem);
std::string checkpoint_extra(const std::filesystem::path& stem);

/// Loads values into a model built with the same architecture; names and
/// shapes must match exactly.
void load_checkpoint(const std::filesystem::path& stem, Module& model, const std::string& expected_arch);

}  // namespace gestauth::nn
