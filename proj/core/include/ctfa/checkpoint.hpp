#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ctfa/tensor.hpp"

namespace ctfa {

// Binary checkpoint layout (all integers and floats little-endian):
//
//   char[8]  magic "CTFACKPT"
//   u32      format version (currently 1)
//   u32      metadata byte length, then the metadata bytes (free text)
//   u32      entry count
//   per entry:
//     u32    name byte length, then the name bytes
//     u32    rank, then rank x u64 dimensions
//     f64    real plane, numel values, row-major
//     f64    imaginary plane, numel values, row-major
//
// Values are written bit-for-bit, so save followed by load is exact.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointEntry {
    std::string name;
    ComplexTensor tensor;
};

struct Checkpoint {
    std::string metadata;
    std::vector<CheckpointEntry> entries;

    const ComplexTensor* find(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint parse_checkpoint(const std::string& bytes);

}  // namespace ctfa
