#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "e2e/training/training.hpp"

namespace e2e::eval {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Layout: 8-byte magic "E2ECKPT\0", u32 version, u32 byte-order mark
/// 0x01020304, u64 manifest length, manifest JSON (config, config hash,
/// train state, tensor table with name/partition/shape/offset), then raw
/// little-endian doubles. All integers are little-endian.
void save_checkpoint(const train::Model& model, std::ostream& os);
train::Model load_checkpoint(std::istream& is);

void save_checkpoint(const train::Model& model, const std::filesystem::path& path);
train::Model load_checkpoint(const std::filesystem::path& path);

/// FNV-1a of a file's bytes.
std::uint64_t file_hash(const std::filesystem::path& path);

/// FNV-1a over names and value bytes of one partition, in storage order.
std::uint64_t partition_hash(const ad::ParameterSet& params, ad::Partition partition);

}  // namespace e2e::eval
