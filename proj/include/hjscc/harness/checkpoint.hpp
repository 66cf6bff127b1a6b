#pragma once

#include <filesystem>
#include <stdexcept>

#include "hjscc/harness/config.hpp"
#include "hjscc/harness/optimizer.hpp"

namespace hjscc::harness {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Raised for a foreign file, an unknown format version or a parameter layout that does
/// not match the configured model.
class CheckpointVersionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  RunConfig config;
  long step = 0;
  std::vector<std::pair<std::string, Tensor>> params;
  AdamState optimizer;
};

/// Binary layout: magic "HJSCCKPT", u32 version, config JSON, i64 step, named parameter
/// arrays with shapes, then the optimizer moments in parameter order.
void save_checkpoint(const std::filesystem::path& path, const RunConfig& config, long step,
                     const nn::ParamStore& params, const AdamState& optimizer);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Copies the stored weights into `params`; names and shapes must match exactly.
void restore_params(const Checkpoint& ckpt, nn::ParamStore& params);

}  // namespace hjscc::harness
