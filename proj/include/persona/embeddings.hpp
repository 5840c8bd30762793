#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace persona {

enum class ElementType { f32, f64 };

/// Row-major matrix of finite reals, stored on disk as a little-endian blob
/// plus a JSON sidecar {rows, dim, dtype, endianness}. Embeddings use f32;
/// model parameters are written as f64 so they survive a round trip.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::int64_t rows, std::int64_t dim, std::vector<double> data);

  [[nodiscard]] std::int64_t rows() const { return rows_; }
  [[nodiscard]] std::int64_t dim() const { return dim_; }
  [[nodiscard]] std::span<const double> data() const { return data_; }
  [[nodiscard]] double operator()(std::int64_t r, std::int64_t c) const {
    return data_[static_cast<std::size_t>(r * dim_ + c)];
  }

  /// Copy as an Eigen (column-major) matrix.
  [[nodiscard]] Eigen::MatrixXd to_eigen() const;
  static EmbeddingMatrix from_eigen(const Eigen::MatrixXd& m);

  friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) = default;

 private:
  std::int64_t rows_ = 0;
  std::int64_t dim_ = 0;
  std::vector<double> data_;
};

/// Sidecar path convention: "<blob>.json".
std::filesystem::path sidecar_path_for(const std::filesystem::path& blob);

EmbeddingMatrix load_embeddings(const std::filesystem::path& data_path,
                                const std::filesystem::path& sidecar_path);

/// Writes blob and sidecar atomically. Values are narrowed to `type`.
void write_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& data_path,
                      const std::filesystem::path& sidecar_path,
                      ElementType type = ElementType::f32);

/// Raw encodings, exposed for tests and bundle writers.
std::string encode_blob(const EmbeddingMatrix& m, ElementType type);
std::string encode_sidecar(const EmbeddingMatrix& m, ElementType type);
EmbeddingMatrix decode_embeddings(std::string_view blob, std::string_view sidecar_json);

}  // namespace persona
