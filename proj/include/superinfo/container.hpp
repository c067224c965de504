#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "superinfo/io.hpp"
#include "superinfo/tensor.hpp"

namespace superinfo {

/// One persisted dataset: n samples of either flat vectors (n x D) or
/// channel-major images (n x C*H*W), optionally labeled.
///
/// Binary layout (all integers little-endian):
///   magic "SIDS" | u32 version=1 | u64 n_samples | u8 shape_kind
///   | vector: u32 n_dims / image: u32 c, u32 h, u32 w
///   | u8 has_labels | f32 payload row-major | u32 labels (if labeled)
struct DatasetContainer {
  enum class ShapeKind : uint8_t { Vector = 0, Image = 1 };

  Tensor<float> samples;               // n x flattened-dim
  ShapeKind kind = ShapeKind::Vector;
  std::array<uint32_t, 3> chw{0, 0, 0};  // populated for images
  std::vector<uint32_t> labels;        // empty when unlabeled
  uint32_t version = kVersion;

  static constexpr uint32_t kVersion = 1;

  size_t size() const { return samples.shape[0]; }
  size_t dim() const { return samples.shape[1]; }
  bool has_labels() const { return !labels.empty(); }

  void validate() const {
    if (samples.rank() != 2) throw ValidationError("dataset samples must be 2-D");
    if (!labels.empty() && labels.size() != samples.shape[0]) {
      throw ValidationError("dataset has " + std::to_string(samples.shape[0]) +
                            " samples but " + std::to_string(labels.size()) + " labels");
    }
    if (kind == ShapeKind::Image &&
        static_cast<size_t>(chw[0]) * chw[1] * chw[2] != samples.shape[1]) {
      throw ValidationError("image dims do not match sample width");
    }
  }
};

inline void save_container(const DatasetContainer& ds, const std::filesystem::path& path) {
  ds.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open '" + path.string() + "' for writing");
  io::write_magic(out, "SIDS");
  io::write_le<uint32_t>(out, DatasetContainer::kVersion);
  io::write_le<uint64_t>(out, ds.size());
  io::write_le<uint8_t>(out, static_cast<uint8_t>(ds.kind));
  if (ds.kind == DatasetContainer::ShapeKind::Vector) {
    io::write_le<uint32_t>(out, static_cast<uint32_t>(ds.dim()));
  } else {
    for (uint32_t d : ds.chw) io::write_le<uint32_t>(out, d);
  }
  io::write_le<uint8_t>(out, ds.has_labels() ? 1 : 0);
  for (float v : ds.samples.data) io::write_le<float>(out, v);
  for (uint32_t l : ds.labels) io::write_le<uint32_t>(out, l);
  if (!out) throw ValidationError("write failed for '" + path.string() + "'");
}

inline DatasetContainer load_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError(FormatError::Code::TruncatedPayload,
                      "cannot open '" + path.string() + "' for reading");
  }
  io::expect_magic(in, "SIDS");
  const uint32_t version = io::read_le<uint32_t>(in, "dataset version");
  if (version != DatasetContainer::kVersion) {
    throw FormatError(FormatError::Code::VersionMismatch,
                      "dataset version " + std::to_string(version) + ", expected 1");
  }
  const uint64_t n = io::read_le<uint64_t>(in, "sample count");
  const uint8_t kind_byte = io::read_le<uint8_t>(in, "shape kind");
  if (kind_byte > 1) {
    throw FormatError(FormatError::Code::Corrupt,
                      "unknown shape kind " + std::to_string(kind_byte));
  }
  DatasetContainer ds;
  ds.kind = static_cast<DatasetContainer::ShapeKind>(kind_byte);
  uint64_t dim = 0;
  if (ds.kind == DatasetContainer::ShapeKind::Vector) {
    dim = io::read_le<uint32_t>(in, "sample dim");
  } else {
    for (auto& d : ds.chw) d = io::read_le<uint32_t>(in, "image dim");
    dim = static_cast<uint64_t>(ds.chw[0]) * ds.chw[1] * ds.chw[2];
  }
  if (dim == 0 || n > (uint64_t(1) << 40) || dim > (uint64_t(1) << 32)) {
    throw FormatError(FormatError::Code::Corrupt, "implausible dataset dimensions");
  }
  const uint8_t has_labels = io::read_le<uint8_t>(in, "label flag");
  if (has_labels > 1) {
    throw FormatError(FormatError::Code::Corrupt,
                      "label flag must be 0 or 1, got " + std::to_string(has_labels));
  }
  ds.samples = Tensor<float>({static_cast<size_t>(n), static_cast<size_t>(dim)});
  io::read_bytes(in, ds.samples.data.data(), ds.samples.data.size() * sizeof(float),
                 "sample payload");
  if constexpr (std::endian::native == std::endian::big) {
    for (auto& v : ds.samples.data) v = io::byteswap_if_big(v);
  }
  if (has_labels) {
    ds.labels.resize(n);
    for (auto& l : ds.labels) l = io::read_le<uint32_t>(in, "labels");
  }
  ds.version = version;
  ds.validate();
  return ds;
}

}  // namespace superinfo
