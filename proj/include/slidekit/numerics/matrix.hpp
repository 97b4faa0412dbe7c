// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace slidekit {

/// Every random draw in the toolkit goes through this engine, seeded explicitly.
using Rng = std::mt19937_64;

/// Dense row-major matrix of doubles. Vectors are 1×n matrices.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix row_vector(std::span<const double> values);
  static Matrix column_vector(std::span<const double> values);
  static Matrix identity(std::size_t n);
  /// Entries uniform in [-bound, bound].
  static Matrix uniform(std::size_t rows, std::size_t cols, double bound, Rng& rng);
  static Matrix normal(std::size_t rows, std::size_t cols, double stddev, Rng& rng);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  const std::vector<double>& storage() const noexcept { return data_; }

  bool all_finite() const noexcept;
  /// "3x4" — used in error messages.
  std::string shape_string() const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s) noexcept;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);

/// a·b
Matrix matmul(const Matrix& a, const Matrix& b);
/// a·bᵀ
Matrix matmul_nt(const Matrix& a, const Matrix& b);
/// aᵀ·b
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix hadamard(const Matrix& a, const Matrix& b);
/// Sum over rows, producing 1×cols.
Matrix column_sums(const Matrix& a);
/// Adds the 1×cols row vector to every row.
Matrix add_row_broadcast(Matrix a, const Matrix& row);
Matrix select_rows(const Matrix& a, std::span<const std::size_t> indices);
Matrix vstack(std::span<const Matrix> blocks);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);
/// Cosine similarity; 0 when either vector has zero norm.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Throws DimensionError naming both shapes unless a and b have equal shape.
void require_same_shape(const Matrix& a, const Matrix& b, const char* context);

/// A named, mutable view onto one parameter tensor of a model.
struct ParamRef {
  std::string name;
  std::reference_wrapper<Matrix> value;
};
using ParamList = std::vector<ParamRef>;

/// Flattened copy of every tensor in `params`, in order.
std::vector<double> flatten(const ParamList& params);

// "CXPM" binary matrix files: magic "CXPM0001", u64 rows, u64 cols (little
// endian), then rows*cols little-endian float32 values in row-major order.
void write_cxpm(std::ostream& out, const Matrix& m);
Matrix read_cxpm(std::istream& in);
void save_cxpm(const std::string& path, const Matrix& m);
Matrix load_cxpm(const std::string& path);

}  // namespace slidekit
