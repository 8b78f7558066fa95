#include "mgbp/sparse_operator.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>

#include "mgbp/image_io.hpp"

namespace mgbp {

SparseOperator::SparseOperator(std::size_t rows, std::size_t cols, std::span<const Triplet> entries) {
  std::vector<Eigen::Triplet<double, std::ptrdiff_t>> trips;
  trips.reserve(entries.size());
  for (const Triplet& t : entries) {
    if (t.row >= rows || t.col >= cols) {
      throw std::out_of_range("sparse entry (" + std::to_string(t.row) + "," + std::to_string(t.col) +
                              ") outside " + std::to_string(rows) + "x" + std::to_string(cols));
    }
    if (!std::isfinite(t.value)) throw std::invalid_argument("sparse entry value must be finite");
    trips.emplace_back(static_cast<std::ptrdiff_t>(t.row), static_cast<std::ptrdiff_t>(t.col), t.value);
  }
  m_.resize(static_cast<std::ptrdiff_t>(rows), static_cast<std::ptrdiff_t>(cols));
  m_.setFromTriplets(trips.begin(), trips.end());
  m_.makeCompressed();
}

SparseOperator::SparseOperator(Matrix m) : m_(std::move(m)) { m_.makeCompressed(); }

SparseOperator SparseOperator::identity(std::size_t n) {
  Matrix m(static_cast<std::ptrdiff_t>(n), static_cast<std::ptrdiff_t>(n));
  m.setIdentity();
  return SparseOperator(std::move(m));
}

std::vector<Triplet> SparseOperator::entries() const {
  std::vector<Triplet> out;
  out.reserve(nnz());
  for (std::ptrdiff_t r = 0; r < m_.outerSize(); ++r) {
    for (Matrix::InnerIterator it(m_, r); it; ++it) {
      out.push_back({static_cast<std::size_t>(it.row()), static_cast<std::size_t>(it.col()), it.value()});
    }
  }
  return out;
}

std::vector<double> SparseOperator::apply(std::span<const double> x) const {
  if (x.size() != cols()) {
    throw std::invalid_argument("operator apply: vector length " + std::to_string(x.size()) +
                                " != cols " + std::to_string(cols()));
  }
  std::vector<double> y(rows(), 0.0);
  for (std::ptrdiff_t r = 0; r < m_.outerSize(); ++r) {
    double acc = 0.0;
    for (Matrix::InnerIterator it(m_, r); it; ++it) acc += it.value() * x[static_cast<std::size_t>(it.col())];
    y[static_cast<std::size_t>(r)] = acc;
  }
  return y;
}

SparseOperator SparseOperator::transpose() const { return SparseOperator(Matrix(m_.transpose())); }

SparseOperator SparseOperator::compose(const SparseOperator& rhs) const {
  if (cols() != rhs.rows()) {
    throw std::invalid_argument("operator compose: inner dimension mismatch " + std::to_string(cols()) +
                                " vs " + std::to_string(rhs.rows()));
  }
  return SparseOperator(Matrix(m_ * rhs.m_));
}

void SparseOperator::write_text(std::ostream& out) const {
  out << "MGS1\n" << rows() << " " << cols() << " " << nnz() << "\n";
  out << std::setprecision(17);
  for (const Triplet& t : entries()) out << t.row << " " << t.col << " " << t.value << "\n";
}

SparseOperator SparseOperator::read_text(std::istream& in) {
  std::string magic;
  if (!(in >> magic) || magic != "MGS1") throw std::runtime_error("bad MGS1 header");
  std::size_t rows = 0, cols = 0, nnz = 0;
  if (!(in >> rows >> cols >> nnz)) throw std::runtime_error("MGS1: malformed 'rows cols nnz' line");
  std::vector<Triplet> entries(nnz);
  for (std::size_t i = 0; i < nnz; ++i) {
    if (!(in >> entries[i].row >> entries[i].col >> entries[i].value)) {
      throw std::runtime_error("MGS1: truncated at entry " + std::to_string(i) + " of " + std::to_string(nnz));
    }
  }
  return SparseOperator(rows, cols, entries);
}

void SparseOperator::save(const std::filesystem::path& path) const {
  std::ostringstream os;
  write_text(os);
  write_file_atomic(path, os.str());
}

SparseOperator SparseOperator::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  return read_text(in);
}

}  // namespace mgbp
