#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fsad/encoder.hpp"
#include "fsad/features.hpp"
#include "fsad/method.hpp"

namespace fsad {

// Reference vectors of the one-class detector.
struct OneClassPayload {
  std::uint32_t k_nn = 5;
  std::vector<SparseFeatures> references;

  bool operator==(const OneClassPayload&) const = default;
};

struct Checkpoint {
  static constexpr std::uint32_t kFormatVersion = 1;

  std::uint32_t format_version = kFormatVersion;
  Method method = Method::kPrototypical;
  // Empty for meta-learned models; the target domain for per-domain models.
  std::string domain;
  FeatureConfig features;
  EncoderParams params;  // shape lives inside; empty for the one-class model
  OneClassPayload oneclass;
  // Serialized JSON object with the run configuration that produced this
  // checkpoint (keys sorted).
  std::string config_snapshot = "{}";
  std::uint64_t seed = 0;

  bool operator==(const Checkpoint&) const = default;
};

// Container layout (all integers little-endian):
//   8 bytes   magic "FSADCKPT"
//   u32       format version
//   u64       header length N
//   N bytes   UTF-8 JSON header (method, domain, features, shape, seed,
//             config, tensor table)
//   tensors   in header order; f64 tensors as IEEE-754 binary64, u32
//             tensors as 32-bit unsigned
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(const std::string& bytes);

}  // namespace fsad
