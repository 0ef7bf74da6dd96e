#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dnmx/core/jsonl.hpp"
#include "dnmx/nn/tensor.hpp"

namespace dnmx::nn {

/// Binary layout: "DNMXCKPT", u32 version, u64 header length, JSON header,
/// u64 tensor count, then per tensor u32 name length, name, u32 rank (2),
/// u64 rows, u64 cols and rows·cols little-endian f64 values. Integers are
/// little-endian.
struct Checkpoint {
    Json header;
    std::vector<std::pair<std::string, Matrix>> tensors;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const Json& header, const std::vector<Param*>& params);
Checkpoint decode_checkpoint(const std::string& bytes, const std::string& origin = "checkpoint");

void save_checkpoint(const std::filesystem::path& path, const Json& header, const std::vector<Param*>& params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies tensors into params by name. DataError on a missing name or a
/// shape mismatch.
void restore_params(const Checkpoint& ckpt, const std::vector<Param*>& params);

} // namespace dnmx::nn
