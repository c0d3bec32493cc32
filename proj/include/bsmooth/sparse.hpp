#pragma once

#include <cstddef>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bsmooth/error.hpp"

namespace bsmooth {

/// Nonzeros of one matrix row held as a contiguous run of columns.
struct SparseRow {
  std::size_t start = 0;
  std::vector<double> values;

  [[nodiscard]] std::size_t end() const noexcept { return start + values.size(); }
  [[nodiscard]] double sum() const noexcept {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
};

/// Sparse vector with ascending indices.
struct SparseVector {
  std::vector<std::size_t> index;
  std::vector<double> value;

  [[nodiscard]] std::size_t size() const noexcept { return index.size(); }
  [[nodiscard]] double sum() const noexcept {
    double s = 0.0;
    for (double v : value) s += v;
    return s;
  }
};

/// Matrix whose rows are contiguous runs (B-spline design matrices, banded
/// penalty square roots).
struct RowSparseMatrix {
  std::size_t cols = 0;
  std::vector<SparseRow> rows;

  [[nodiscard]] std::size_t row_count() const noexcept { return rows.size(); }

  [[nodiscard]] Eigen::MatrixXd to_dense() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()),
                                              static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& r = rows[i];
      for (std::size_t c = 0; c < r.values.size(); ++c) {
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(r.start + c)) = r.values[c];
      }
    }
    return m;
  }
};

/// Compressed sparse rows with arbitrary (ascending) column indices per row.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  explicit SparseMatrix(std::size_t cols) : cols_(cols) {}

  static SparseMatrix from(const RowSparseMatrix& m) {
    SparseMatrix out(m.cols);
    for (const auto& r : m.rows) {
      out.begin_row();
      for (std::size_t c = 0; c < r.values.size(); ++c) out.push(r.start + c, r.values[c]);
    }
    return out;
  }

  void begin_row() { row_ptr_.push_back(col_.size()); }

  /// Appends to the most recently begun row. Columns must be ascending.
  void push(std::size_t col, double value) {
    if (row_ptr_.empty()) throw InvalidArgument("push before begin_row");
    if (col >= cols_) throw InvalidArgument("column index out of range");
    if (row_ptr_.back() < col_.size() && col_.back() >= col) {
      throw InvalidArgument("columns within a row must be strictly ascending");
    }
    col_.push_back(col);
    val_.push_back(value);
  }

  [[nodiscard]] std::size_t rows() const noexcept { return row_ptr_.size(); }
  [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
  [[nodiscard]] std::size_t nonzeros() const noexcept { return col_.size(); }

  [[nodiscard]] std::span<const std::size_t> row_cols(std::size_t i) const noexcept {
    return {col_.data() + row_ptr_[i], row_end(i) - row_ptr_[i]};
  }
  [[nodiscard]] std::span<const double> row_values(std::size_t i) const noexcept {
    return {val_.data() + row_ptr_[i], row_end(i) - row_ptr_[i]};
  }

  [[nodiscard]] Eigen::VectorXd multiply(const Eigen::VectorXd& x) const {
    if (static_cast<std::size_t>(x.size()) != cols_) throw InvalidArgument("dimension mismatch");
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows()));
    for (std::size_t i = 0; i < rows(); ++i) {
      double s = 0.0;
      const auto c = row_cols(i);
      const auto v = row_values(i);
      for (std::size_t t = 0; t < c.size(); ++t) s += v[t] * x(static_cast<Eigen::Index>(c[t]));
      y(static_cast<Eigen::Index>(i)) = s;
    }
    return y;
  }

  /// Dense MᵀM (cols x cols).
  [[nodiscard]] Eigen::MatrixXd gram() const {
    const auto q = static_cast<Eigen::Index>(cols_);
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(q, q);
    for (std::size_t i = 0; i < rows(); ++i) {
      const auto c = row_cols(i);
      const auto v = row_values(i);
      for (std::size_t s = 0; s < c.size(); ++s) {
        for (std::size_t t = s; t < c.size(); ++t) {
          g(static_cast<Eigen::Index>(c[s]), static_cast<Eigen::Index>(c[t])) += v[s] * v[t];
        }
      }
    }
    g.template triangularView<Eigen::StrictlyLower>() = g.transpose();
    return g;
  }

  [[nodiscard]] Eigen::VectorXd transpose_multiply(const Eigen::VectorXd& y) const {
    if (static_cast<std::size_t>(y.size()) != rows()) throw InvalidArgument("dimension mismatch");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cols_));
    for (std::size_t i = 0; i < rows(); ++i) {
      const auto c = row_cols(i);
      const auto v = row_values(i);
      for (std::size_t t = 0; t < c.size(); ++t) {
        out(static_cast<Eigen::Index>(c[t])) += v[t] * y(static_cast<Eigen::Index>(i));
      }
    }
    return out;
  }

  [[nodiscard]] Eigen::MatrixXd to_dense() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows()),
                                              static_cast<Eigen::Index>(cols_));
    for (std::size_t i = 0; i < rows(); ++i) {
      const auto c = row_cols(i);
      const auto v = row_values(i);
      for (std::size_t t = 0; t < c.size(); ++t) {
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c[t])) = v[t];
      }
    }
    return m;
  }

 private:
  [[nodiscard]] std::size_t row_end(std::size_t i) const noexcept {
    return i + 1 < row_ptr_.size() ? row_ptr_[i + 1] : col_.size();
  }

  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::size_t> col_;
  std::vector<double> val_;
};

inline void write_dense_csv(std::ostream& os, const Eigen::MatrixXd& m) {
  const auto old_precision = os.precision(std::numeric_limits<double>::max_digits10);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) os << ',';
      os << m(i, j);
    }
    os << '\n';
  }
  os.precision(old_precision);
}

}  // namespace bsmooth
