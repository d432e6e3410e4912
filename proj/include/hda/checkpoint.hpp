#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "hda/models.hpp"
#include "hda/nn.hpp"

namespace hda {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint16_t kHdacVersion = 1;

/// "HDAC", u16 version, u32 name length + bytes, u32 entry count, then per
/// entry u32 name length + bytes, u32 rank, u32 extents, f32 LE values.
/// With `with_optimizer`, an "ADAM" tagged section follows: i64 step, u32
/// count, then per trainable entry u32 length and f32 first/second moments.
void save_checkpoint(const std::filesystem::path& path, const Network& network, bool with_optimizer = true);

/// Validates the whole file against `network` (name, entry names, shapes)
/// before writing any value.
void load_checkpoint(const std::filesystem::path& path, Network& network);

/// <dir>/<network name>.hdac for each of the six trained networks.
void save_bundle(const std::filesystem::path& dir, const ModelBundle& bundle);
void load_bundle(const std::filesystem::path& dir, ModelBundle& bundle);

}  // namespace hda
