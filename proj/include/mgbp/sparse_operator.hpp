#pragma once

#include <Eigen/Sparse>

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace mgbp {

/// Default cap on rows * cols for explicit operator construction.
inline constexpr std::size_t kDefaultOperatorCap = std::size_t{1} << 24;

struct Triplet {
  std::size_t row = 0;
  std::size_t col = 0;
  double value = 0.0;
};

/// Explicit rectangular matrix acting on vectorized tensors.
class SparseOperator {
 public:
  using Matrix = Eigen::SparseMatrix<double, Eigen::RowMajor, std::ptrdiff_t>;

  SparseOperator() = default;
  /// Duplicate (row, col) entries are summed.
  SparseOperator(std::size_t rows, std::size_t cols, std::span<const Triplet> entries);
  explicit SparseOperator(Matrix m);

  static SparseOperator identity(std::size_t n);

  std::size_t rows() const { return static_cast<std::size_t>(m_.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(m_.cols()); }
  std::size_t nnz() const { return static_cast<std::size_t>(m_.nonZeros()); }

  /// Stored entries in row-major order.
  std::vector<Triplet> entries() const;
  double coeff(std::size_t r, std::size_t c) const { return m_.coeff(static_cast<std::ptrdiff_t>(r), static_cast<std::ptrdiff_t>(c)); }

  std::vector<double> apply(std::span<const double> x) const;
  SparseOperator transpose() const;
  /// this * rhs
  SparseOperator compose(const SparseOperator& rhs) const;

  const Matrix& matrix() const { return m_; }

  /// "MGS1", "rows cols nnz", then one "row col value" line per entry.
  void write_text(std::ostream& out) const;
  static SparseOperator read_text(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static SparseOperator load(const std::filesystem::path& path);

 private:
  Matrix m_;
};

}  // namespace mgbp
