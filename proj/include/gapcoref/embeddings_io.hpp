#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "gapcoref/nn.hpp"

namespace gapcoref {

using FloatMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Precomputed token states keyed by example key, e.g. token vectors produced
// by an external pretrained model for the exact wordpiece inputs this toolkit
// builds.
//
// File layout, all integers little-endian:
//   "CSEM1"            5 magic bytes
//   hidden_dim         u32
//   example_count      u32
//   per example:
//     id_length        u32, then id_length bytes of UTF-8 id
//     token_count      u32
//     token_count * hidden_dim float32 values, row-major
class EmbeddingStore {
 public:
  explicit EmbeddingStore(int hidden_dim) : hidden_dim_(hidden_dim) {}

  int hidden_dim() const { return hidden_dim_; }
  std::size_t size() const { return states_.size(); }
  bool contains(const std::string& key) const { return states_.count(key) != 0; }

  // Throws DimensionMismatch if the column count differs from hidden_dim.
  void insert(const std::string& key, FloatMatrix states);

  // Stored values, verbatim. Throws MissingExample.
  const FloatMatrix& get(const std::string& key) const;

  // Stored values widened to double. Throws MissingExample, or
  // DimensionMismatch when `expected_rows` is given and differs.
  Matrix states(const std::string& key, std::int64_t expected_rows = -1) const;

  const std::map<std::string, FloatMatrix>& entries() const { return states_; }

 private:
  int hidden_dim_;
  std::map<std::string, FloatMatrix> states_;
};

// Throws CorruptHeader or DimensionMismatch.
EmbeddingStore load_external_embeddings(std::string_view bytes);
EmbeddingStore load_external_embeddings_file(const std::filesystem::path& path);

std::string serialize_embeddings(const EmbeddingStore& store);
void write_embeddings_file(const EmbeddingStore& store, const std::filesystem::path& path);

}  // namespace gapcoref
