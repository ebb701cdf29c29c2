#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace nuc {

using PointId = std::int64_t;
using ClassId = std::int32_t;

/// Dense row-major float matrix as stored in a "NUCR" file.
struct FloatMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  std::span<const float> row(std::size_t i) const {
    return {data.data() + i * cols, cols};
  }
  std::span<float> row(std::size_t i) { return {data.data() + i * cols, cols}; }
};

/// Representation vectors of a labeled split together with what the upstream
/// classifier predicted for each point. Row order is canonical everywhere.
struct ReprSet {
  std::size_t dim = 0;
  std::vector<float> vectors;  // count x dim, row-major
  std::vector<PointId> ids;
  std::vector<ClassId> labels;
  std::vector<ClassId> pred_labels;
  std::vector<double> confidences;  // upstream max-softmax s(y_hat)

  std::size_t count() const { return ids.size(); }
  std::span<const float> row(std::size_t i) const {
    return {vectors.data() + i * dim, dim};
  }

  /// Throws ConsistencyError / DataError when an invariant is broken.
  void validate() const;

  /// Rows selected by index, in the given order.
  ReprSet subset(std::span<const std::size_t> rows) const;
};

/// flag[i] = 1 iff labels[i] == pred_labels[i].
std::vector<std::uint8_t> correctness_labels(const ReprSet& set);

// Vector file: "NUCR", u16 version = 1, u32 dim, u64 count, count*dim f32,
// all little-endian.
void write_matrix(const std::filesystem::path& path, const FloatMatrix& m);
FloatMatrix read_matrix(const std::filesystem::path& path);

// Metadata CSV with header `id,label,pred_label,confidence`.
void write_repr_set(const ReprSet& set, const std::filesystem::path& vectors_path,
                    const std::filesystem::path& meta_path);
/// Metadata CSV only; the returned set has dim 0 and no vectors.
ReprSet load_metadata(const std::filesystem::path& meta_path);
ReprSet load_repr_set(const std::filesystem::path& vectors_path,
                      const std::filesystem::path& meta_path);

/// Writes through a temporary sibling file and renames it into place.
void write_file_atomic(const std::filesystem::path& path,
                       std::span<const char> bytes);

}  // namespace nuc
