#include "muse/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "muse/errors.hpp"

namespace muse {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows * cols) {
    throw DimensionError("DenseMatrix: " + std::to_string(values_.size()) +
                         " values do not fill a " + std::to_string(rows) + "x" +
                         std::to_string(cols) + " matrix");
  }
}

DenseMatrix DenseMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> v;
  v.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("DenseMatrix::from_rows: ragged rows");
    v.insert(v.end(), row.begin(), row.end());
  }
  return DenseMatrix(r, c, std::move(v));
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

void DenseMatrix::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

bool DenseMatrix::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double x) { return std::isfinite(x); });
}

std::string DenseMatrix::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), row_offsets_(rows + 1, 0) {}

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols,
                           std::vector<std::size_t> row_offsets,
                           std::vector<std::size_t> col_indices, std::vector<double> values)
    : rows_(rows),
      cols_(cols),
      row_offsets_(std::move(row_offsets)),
      col_indices_(std::move(col_indices)),
      values_(std::move(values)) {
  if (row_offsets_.size() != rows_ + 1 || row_offsets_.front() != 0 ||
      row_offsets_.back() != col_indices_.size() || col_indices_.size() != values_.size()) {
    throw DimensionError("SparseMatrix: inconsistent CSR arrays");
  }
  for (std::size_t r = 0; r < rows_; ++r) {
    if (row_offsets_[r] > row_offsets_[r + 1]) {
      throw DimensionError("SparseMatrix: row offsets not monotone");
    }
    for (std::size_t k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) {
      if (col_indices_[k] >= cols_) throw DimensionError("SparseMatrix: column out of range");
      if (k > row_offsets_[r] && col_indices_[k] <= col_indices_[k - 1]) {
        throw DimensionError("SparseMatrix: columns not sorted and unique");
      }
    }
  }
}

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols,
                                         std::vector<Triplet> triplets) {
  for (const auto& t : triplets) {
    if (t.row >= rows || t.col >= cols) {
      throw DimensionError("SparseMatrix::from_triplets: entry (" + std::to_string(t.row) +
                           "," + std::to_string(t.col) + ") outside " +
                           std::to_string(rows) + "x" + std::to_string(cols));
    }
  }
  std::stable_sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  std::vector<std::size_t> offsets(rows + 1, 0);
  std::vector<std::size_t> cols_out;
  std::vector<double> vals;
  cols_out.reserve(triplets.size());
  vals.reserve(triplets.size());
  for (std::size_t k = 0; k < triplets.size(); ++k) {
    const auto& t = triplets[k];
    if (k > 0 && triplets[k - 1].row == t.row && triplets[k - 1].col == t.col) {
      vals.back() += t.value;
      continue;
    }
    cols_out.push_back(t.col);
    vals.push_back(t.value);
    ++offsets[t.row + 1];
  }
  for (std::size_t r = 0; r < rows; ++r) offsets[r + 1] += offsets[r];
  return SparseMatrix(rows, cols, std::move(offsets), std::move(cols_out), std::move(vals));
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
  std::vector<std::size_t> offsets(n + 1);
  std::vector<std::size_t> cols(n);
  for (std::size_t i = 0; i <= n; ++i) offsets[i] = i;
  for (std::size_t i = 0; i < n; ++i) cols[i] = i;
  return SparseMatrix(n, n, std::move(offsets), std::move(cols), std::vector<double>(n, 1.0));
}

double SparseMatrix::at(std::size_t r, std::size_t c) const noexcept {
  const auto idx = row_indices(r);
  const auto it = std::lower_bound(idx.begin(), idx.end(), c);
  if (it == idx.end() || *it != c) return 0.0;
  return values_[row_offsets_[r] + static_cast<std::size_t>(it - idx.begin())];
}

DenseMatrix SparseMatrix::densify() const {
  DenseMatrix d(rows_, cols_);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) {
      d(r, col_indices_[k]) = values_[k];
    }
  }
  return d;
}

bool SparseMatrix::is_symmetric() const noexcept {
  if (rows_ != cols_) return false;
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) {
      if (at(col_indices_[k], r) != values_[k]) return false;
    }
  }
  return true;
}

std::string SparseMatrix::shape_string() const {
  std::ostringstream os;
  os << rows_ << "x" << cols_ << " (nnz=" << nnz() << ")";
  return os.str();
}

namespace {

void require(bool ok, const char* op, const std::string& a, const std::string& b) {
  if (!ok) throw DimensionError(std::string(op) + ": incompatible shapes " + a + " and " + b);
}

}  // namespace

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.cols() == b.rows(), "matmul", a.shape_string(), b.shape_string());
  DenseMatrix out(a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* o = out.row(i).data();
    const double* ar = a.row(i).data();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = ar[k];
      if (aik == 0.0) continue;
      const double* br = b.row(k).data();
      for (std::size_t j = 0; j < n; ++j) o[j] += aik * br[j];
    }
  }
  return out;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.rows() == b.rows(), "matmul_tn", a.shape_string(), b.shape_string());
  DenseMatrix out(a.cols(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const double* ar = a.row(k).data();
    const double* br = b.row(k).data();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = ar[i];
      if (aki == 0.0) continue;
      double* o = out.row(i).data();
      for (std::size_t j = 0; j < n; ++j) o[j] += aki * br[j];
    }
  }
  return out;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.cols() == b.cols(), "matmul_nt", a.shape_string(), b.shape_string());
  DenseMatrix out(a.rows(), b.rows());
  const std::size_t inner = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ar = a.row(i).data();
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* br = b.row(j).data();
      double s = 0.0;
      for (std::size_t k = 0; k < inner; ++k) s += ar[k] * br[k];
      out(i, j) = s;
    }
  }
  return out;
}

DenseMatrix spmm(const SparseMatrix& s, const DenseMatrix& b) {
  require(s.cols() == b.rows(), "spmm", s.shape_string(), b.shape_string());
  DenseMatrix out(s.rows(), b.cols());
  const std::size_t n = b.cols();
  const auto& offsets = s.row_offsets();
  const auto& cols = s.col_indices();
  const auto& vals = s.values();
  for (std::size_t i = 0; i < s.rows(); ++i) {
    double* o = out.row(i).data();
    for (std::size_t k = offsets[i]; k < offsets[i + 1]; ++k) {
      const double v = vals[k];
      if (v == 0.0) continue;
      const double* br = b.row(cols[k]).data();
      for (std::size_t j = 0; j < n; ++j) o[j] += v * br[j];
    }
  }
  return out;
}

DenseMatrix spmm_tn(const SparseMatrix& s, const DenseMatrix& b) {
  require(s.rows() == b.rows(), "spmm_tn", s.shape_string(), b.shape_string());
  DenseMatrix out(s.cols(), b.cols());
  const std::size_t n = b.cols();
  const auto& offsets = s.row_offsets();
  const auto& cols = s.col_indices();
  const auto& vals = s.values();
  for (std::size_t i = 0; i < s.rows(); ++i) {
    const double* br = b.row(i).data();
    for (std::size_t k = offsets[i]; k < offsets[i + 1]; ++k) {
      const double v = vals[k];
      if (v == 0.0) continue;
      double* o = out.row(cols[k]).data();
      for (std::size_t j = 0; j < n; ++j) o[j] += v * br[j];
    }
  }
  return out;
}

DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  }
  return t;
}

DenseMatrix row_softmax(const DenseMatrix& x) {
  DenseMatrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto in = x.row(i);
    auto o = out.row(i);
    if (in.empty()) continue;
    const double mx = *std::max_element(in.begin(), in.end());
    double total = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      o[j] = std::exp(in[j] - mx);
      total += o[j];
    }
    for (double& v : o) v /= total;
  }
  return out;
}

double frobenius_norm(const DenseMatrix& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return std::sqrt(s);
}

double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
  if (!a.same_shape(b)) {
    throw DimensionError("max_abs_diff: shapes " + a.shape_string() + " and " + b.shape_string());
  }
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    m = std::max(m, std::abs(a.data()[k] - b.data()[k]));
  }
  return m;
}

}  // namespace muse
