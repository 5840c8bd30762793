#include "persona/embeddings.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include <json.hpp>

#include "persona/error.hpp"
#include "persona/io.hpp"

namespace persona {

static_assert(std::endian::native == std::endian::little,
              "blob encoding assumes a little-endian host");

EmbeddingMatrix::EmbeddingMatrix(std::int64_t rows, std::int64_t dim, std::vector<double> data)
    : rows_(rows), dim_(dim), data_(std::move(data)) {
  if (rows < 0 || dim < 0) throw ValidationError("negative embedding shape");
  if (static_cast<std::int64_t>(data_.size()) != rows * dim) {
    throw ValidationError("size mismatch: " + std::to_string(rows) + "x" + std::to_string(dim) +
                          " needs " + std::to_string(rows * dim) + " elements, got " +
                          std::to_string(data_.size()));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw ValidationError("non-finite entry at flat index " + std::to_string(i));
    }
  }
}

Eigen::MatrixXd EmbeddingMatrix::to_eigen() const {
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  return Eigen::Map<const RowMajor>(data_.data(), rows_, dim_);
}

EmbeddingMatrix EmbeddingMatrix::from_eigen(const Eigen::MatrixXd& m) {
  std::vector<double> d(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      d[static_cast<std::size_t>(r * m.cols() + c)] = m(r, c);
    }
  }
  return EmbeddingMatrix(m.rows(), m.cols(), std::move(d));
}

std::filesystem::path sidecar_path_for(const std::filesystem::path& blob) {
  auto p = blob;
  p += ".json";
  return p;
}

namespace {

std::string_view dtype_name(ElementType t) { return t == ElementType::f32 ? "f32" : "f64"; }

}  // namespace

std::string encode_blob(const EmbeddingMatrix& m, ElementType type) {
  const auto values = m.data();
  std::string out;
  if (type == ElementType::f32) {
    out.resize(values.size() * sizeof(float));
    for (std::size_t i = 0; i < values.size(); ++i) {
      const float f = static_cast<float>(values[i]);
      std::memcpy(out.data() + i * sizeof(float), &f, sizeof(float));
    }
  } else {
    out.resize(values.size() * sizeof(double));
    std::memcpy(out.data(), values.data(), out.size());
  }
  return out;
}

std::string encode_sidecar(const EmbeddingMatrix& m, ElementType type) {
  nlohmann::ordered_json j;
  j["rows"] = m.rows();
  j["dim"] = m.dim();
  j["dtype"] = dtype_name(type);
  j["endianness"] = "little";
  return j.dump(2) + "\n";
}

EmbeddingMatrix decode_embeddings(std::string_view blob, std::string_view sidecar_json) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(sidecar_json);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("embedding sidecar: ") + e.what());
  }
  if (!j.contains("rows") || !j.contains("dim") || !j.contains("dtype") ||
      !j.contains("endianness")) {
    throw ValidationError("embedding sidecar must declare rows, dim, dtype and endianness");
  }
  const auto rows = j.at("rows").get<std::int64_t>();
  const auto dim = j.at("dim").get<std::int64_t>();
  const auto dtype = j.at("dtype").get<std::string>();
  if (j.at("endianness").get<std::string>() != "little") {
    throw ValidationError("only little-endian embedding blobs are supported");
  }
  std::size_t width = 0;
  if (dtype == "f32") {
    width = sizeof(float);
  } else if (dtype == "f64") {
    width = sizeof(double);
  } else {
    throw ValidationError("unsupported dtype '" + dtype + "'");
  }
  if (rows < 0 || dim < 0) throw ValidationError("negative embedding shape");
  const auto expected = static_cast<std::size_t>(rows * dim);
  if (blob.size() != expected * width) {
    throw ValidationError("size mismatch: sidecar declares " + std::to_string(rows) + "x" +
                          std::to_string(dim) + " (" + std::to_string(expected) +
                          " elements), blob holds " + std::to_string(blob.size() / width) +
                          (blob.size() % width ? " and a partial element" : ""));
  }
  std::vector<double> values(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    if (width == sizeof(float)) {
      float f = 0;
      std::memcpy(&f, blob.data() + i * width, width);
      values[i] = f;
    } else {
      std::memcpy(&values[i], blob.data() + i * width, width);
    }
  }
  return EmbeddingMatrix(rows, dim, std::move(values));
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& data_path,
                                const std::filesystem::path& sidecar_path) {
  return decode_embeddings(read_file(data_path), read_file(sidecar_path));
}

void write_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& data_path,
                      const std::filesystem::path& sidecar_path, ElementType type) {
  write_file_atomic(data_path, encode_blob(m, type));
  write_file_atomic(sidecar_path, encode_sidecar(m, type));
}

}  // namespace persona
