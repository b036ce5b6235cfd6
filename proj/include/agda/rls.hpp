#pragma once

// Robust least squares with a soft constraint:
//
//   min_x max_y  ||Ax - y||_M^2 - lambda ||y - y0||_M^2,   M = C'C,
//
// plus the synthetic dataset recipes and the CSV matrix format used to
// exchange datasets.

#include "agda/problems.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <utility>

namespace agda {

struct RlsDataset {
  Matrix A;        // n_samples x m
  Vector y0;       // n_samples
  Matrix C;        // r x n_samples, M = C'C
  double lambda_reg = 2.0;

  void validate() const {
    if (A.rows() == 0 || A.cols() == 0) throw std::invalid_argument("rls dataset: A is empty");
    if (y0.size() != A.rows()) throw std::invalid_argument("rls dataset: y0 length must equal rows of A");
    if (C.rows() == 0 || C.cols() != A.rows()) throw std::invalid_argument("rls dataset: C must be r x n_samples");
    if (!(lambda_reg > 1.0)) throw std::invalid_argument("rls dataset: lambda_reg must exceed 1");
    if (!A.allFinite() || !y0.allFinite() || !C.allFinite()) throw std::invalid_argument("rls dataset: non-finite entries");
  }
};

// ---------------------------------------------------------------------------
// CSV matrix format: "rows,cols" header, then one comma-separated row per line.

inline void write_matrix_csv(std::ostream& os, const Matrix& m) {
  os << m.rows() << ',' << m.cols() << '\n';
  char buf[40];
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
      if (j) os << ',';
      os << buf;
    }
    os << '\n';
  }
}

inline void write_matrix_csv(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_matrix_csv(os, m);
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

[[nodiscard]] inline Matrix read_matrix_csv(std::istream& is, const std::string& what = "matrix") {
  auto fail = [&](const std::string& msg) { return std::runtime_error("malformed CSV (" + what + "): " + msg); };
  std::string line;
  if (!std::getline(is, line)) throw fail("missing header");
  long long rows = -1, cols = -1;
  {
    char comma = 0;
    std::istringstream hs(line);
    if (!(hs >> rows >> comma >> cols) || comma != ',' || rows <= 0 || cols <= 0) throw fail("bad header '" + line + "'");
  }
  Matrix m(rows, cols);
  for (long long i = 0; i < rows; ++i) {
    if (!std::getline(is, line)) throw fail("expected " + std::to_string(rows) + " rows");
    const char* p = line.c_str();
    for (long long j = 0; j < cols; ++j) {
      char* end = nullptr;
      const double v = std::strtod(p, &end);
      if (end == p) throw fail("bad number in row " + std::to_string(i));
      m(i, j) = v;
      p = end;
      while (*p == ' ' || *p == '\t' || *p == '\r') ++p;
      if (j + 1 < cols) {
        if (*p != ',') throw fail("too few columns in row " + std::to_string(i));
        ++p;
      }
    }
    if (*p != '\0') throw fail("too many columns in row " + std::to_string(i));
  }
  while (std::getline(is, line))
    if (line.find_first_not_of(" \t\r") != std::string::npos) throw fail("trailing data after last row");
  return m;
}

[[nodiscard]] inline Matrix read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return read_matrix_csv(is, path.string());
}

// ---------------------------------------------------------------------------
// Dataset recipes.

enum class RlsRecipe { Dataset1, Dataset3 };

struct RlsGenOptions {
  RlsRecipe recipe = RlsRecipe::Dataset1;
  Index n_samples = 1000;
  Index m = 500;
  std::uint64_t seed = 0;
  double rank_fraction = 0.8;  // Dataset3 only: rank(M) = floor(rank_fraction * n_samples)
};

/// Dataset1: Gaussian A, y0 = A x* + eps with eps ~ N(0, 0.01), M = I, lambda = 3.
/// Dataset3: rows of A ~ N(0, Sigma) with Sigma_ij = 2^(-|i-j|/10); M has a
/// random orthogonal eigenbasis, floor(0.8 n) eigenvalues uniform on
/// [0.2, 1.8] and the rest zero; lambda = 1.5.
[[nodiscard]] inline RlsDataset gen_rls_dataset(const RlsGenOptions& opt) {
  if (opt.n_samples <= 0 || opt.m <= 0) throw std::invalid_argument("rls dataset: dimensions must be positive");
  const Index n = opt.n_samples, m = opt.m;
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto gaussian = [&](Index r, Index c) {
    Matrix g(r, c);
    for (Index i = 0; i < r; ++i)
      for (Index j = 0; j < c; ++j) g(i, j) = normal(rng);
    return g;
  };

  RlsDataset d;
  if (opt.recipe == RlsRecipe::Dataset1) {
    d.A = gaussian(n, m);
  } else {
    Matrix sigma(m, m);
    for (Index i = 0; i < m; ++i)
      for (Index j = 0; j < m; ++j) sigma(i, j) = std::exp2(-std::abs(static_cast<double>(i - j)) / 10.0);
    const Matrix L = Eigen::LLT<Matrix>(sigma).matrixL();
    d.A = gaussian(n, m) * L.transpose();
  }
  const Vector x_star = gaussian(m, 1);
  Vector eps = gaussian(n, 1) * 0.1;
  d.y0 = d.A * x_star + eps;

  if (opt.recipe == RlsRecipe::Dataset1) {
    d.C = Matrix::Identity(n, n);
    d.lambda_reg = 3.0;
  } else {
    if (!(opt.rank_fraction > 0.0 && opt.rank_fraction <= 1.0))
      throw std::invalid_argument("rls dataset: rank_fraction must lie in (0, 1]");
    const Index r = std::max<Index>(1, static_cast<Index>(std::floor(opt.rank_fraction * static_cast<double>(n))));
    const Matrix Q = Eigen::HouseholderQR<Matrix>(gaussian(n, n)).householderQ();
    std::uniform_real_distribution<double> unif(0.2, 1.8);
    d.C.resize(r, n);
    for (Index k = 0; k < r; ++k) d.C.row(k) = std::sqrt(unif(rng)) * Q.col(k).transpose();
    d.lambda_reg = 1.5;
  }
  return d;
}

struct RlsCsvPaths {
  std::filesystem::path A;
  std::filesystem::path y0;
  std::filesystem::path C;  // empty -> M = I
};

/// A and y0 from CSV; M = I and lambda = 2 unless C is supplied.
[[nodiscard]] inline RlsDataset load_rls_dataset(const RlsCsvPaths& paths, double lambda_reg = 2.0) {
  RlsDataset d;
  d.A = read_matrix_csv(paths.A);
  const Matrix y = read_matrix_csv(paths.y0);
  if (y.cols() != 1) throw std::runtime_error("malformed CSV (" + paths.y0.string() + "): y0 must be a single column");
  d.y0 = y.col(0);
  d.C = paths.C.empty() ? Matrix::Identity(d.A.rows(), d.A.rows()) : read_matrix_csv(paths.C);
  d.lambda_reg = lambda_reg;
  d.validate();
  return d;
}

inline void save_rls_dataset(const RlsDataset& d, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_matrix_csv(dir / "A.csv", d.A);
  write_matrix_csv(dir / "y0.csv", Matrix(d.y0));
  write_matrix_csv(dir / "C.csv", d.C);
}

// ---------------------------------------------------------------------------

/// Finite-sum RLS oracle. With c_i the rows of C, the components are
///   f_i(x, y) = n [ (c_i'(Ax - y))^2 - lambda (c_i'(y - y0))^2 ],  n = rows(C),
/// so their mean is f exactly.
class RlsProblem final : public MinimaxProblem {
 public:
  explicit RlsProblem(RlsDataset data) : d_(std::move(data)) {
    d_.validate();
    const Index ns = d_.A.rows();
    c_identity_ = d_.C.rows() == ns && d_.C.isIdentity(0.0);
    B_ = c_identity_ ? d_.A : Matrix(d_.C * d_.A);
    c_y0_ = apply_C(d_.y0);
    lam_ = d_.lambda_reg;

    // Range of M = row space of C.
    Eigen::BDCSVD<Matrix> svd_b(B_, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd_b.setThreshold(1e-10);
    const Vector sb = svd_b.singularValues();
    const double sb_min = smallest_positive(sb);
    double sc_max = 1.0, sc_min = 1.0;
    if (!c_identity_) {
      Eigen::BDCSVD<Matrix> svd_c(d_.C, Eigen::ComputeThinV);
      const Vector sc = svd_c.singularValues();
      sc_max = sc[0];
      sc_min = smallest_positive(sc);
      const Index rank = count_positive(sc);
      range_basis_ = svd_c.matrixV().leftCols(rank);
    }
    const double norm_ma = c_identity_ ? sb[0] : Eigen::BDCSVD<Matrix>(d_.C.transpose() * B_).singularValues()[0];
    const double l = 2.0 * std::max({sb[0] * sb[0], norm_ma, (lam_ - 1.0) * sc_max * sc_max});
    consts_ = ProblemConstants{l, 2.0 * sb_min * sb_min, 2.0 * (lam_ - 1.0) * sc_min * sc_min};

    b_solver_.compute(B_);
    x_ls_ = b_solver_.solve(c_y0_);
    g_star_ = lam_ / (lam_ - 1.0) * (B_ * x_ls_ - c_y0_).squaredNorm();
    saddle_ = Iterate{x_ls_, do_best_response_y(x_ls_)};
  }

  [[nodiscard]] std::string name() const override { return "rls"; }
  [[nodiscard]] Index dim_x() const override { return d_.A.cols(); }
  [[nodiscard]] Index dim_y() const override { return d_.A.rows(); }
  [[nodiscard]] Index num_components() const override { return d_.C.rows(); }
  [[nodiscard]] std::optional<ProblemConstants> constants() const override { return consts_; }
  [[nodiscard]] std::optional<Iterate> saddle() const override { return saddle_; }
  [[nodiscard]] bool has_exact_best_response() const override { return true; }
  [[nodiscard]] bool has_exact_best_response_x() const override { return true; }

  [[nodiscard]] const RlsDataset& dataset() const { return d_; }
  [[nodiscard]] double lambda_reg() const { return lam_; }
  /// Minimum-norm minimizer of g.
  [[nodiscard]] const Vector& x_least_squares() const { return x_ls_; }

 protected:
  double do_value(const Vector& x, const Vector& y) const override {
    const Vector cy = apply_C(y);
    return (B_ * x - cy).squaredNorm() - lam_ * (cy - c_y0_).squaredNorm();
  }

  Gradient do_grad(const Vector& x, const Vector& y) const override {
    const Vector cy = apply_C(y);
    const Vector r = B_ * x - cy;
    Gradient g;
    g.gx = 2.0 * B_.transpose() * r;
    g.gy = -2.0 * apply_Ct(r + lam_ * (cy - c_y0_));
    return g;
  }

  Vector do_grad_x(const Vector& x, const Vector& y) const override {
    return 2.0 * B_.transpose() * (B_ * x - apply_C(y));
  }

  Vector do_grad_y(const Vector& x, const Vector& y) const override {
    const Vector cy = apply_C(y);
    return -2.0 * apply_Ct(B_ * x - cy + lam_ * (cy - c_y0_));
  }

  Vector do_component_grad_x(Index i, const Vector& x, const Vector& y) const override {
    const double n = static_cast<double>(num_components());
    const double s = B_.row(i).dot(x) - c_row_dot(i, y);
    return (2.0 * n * s) * B_.row(i).transpose();
  }

  Vector do_component_grad_y(Index i, const Vector& x, const Vector& y) const override {
    const double n = static_cast<double>(num_components());
    const double cy = c_row_dot(i, y);
    const double s = B_.row(i).dot(x) - cy;
    Vector g = Vector::Zero(dim_y());
    add_c_row(i, -2.0 * n * (s + lam_ * (cy - c_y0_[i])), g);
    return g;
  }

  Gradient do_component_grad(Index i, const Vector& x, const Vector& y) const override {
    const double n = static_cast<double>(num_components());
    const double cy = c_row_dot(i, y);
    const double s = B_.row(i).dot(x) - cy;
    const double t = cy - c_y0_[i];
    Gradient g;
    g.gx = (2.0 * n * s) * B_.row(i).transpose();
    g.gy = Vector::Zero(dim_y());
    add_c_row(i, -2.0 * n * (s + lam_ * t), g.gy);
    return g;
  }

  // y* = y0 + P_range(M) (y0 - Ax) / (lambda - 1); the null(M) part is y0's.
  Vector do_best_response_y(const Vector& x) const override {
    const Vector shift = (d_.y0 - d_.A * x) / (lam_ - 1.0);
    return d_.y0 + project_range(shift);
  }

  Vector do_best_response_x(const Vector& y) const override { return b_solver_.solve(apply_C(y)); }

  double do_g_star() const override { return g_star_; }

  // g(x) = lambda/(lambda-1) ||Ax - y0||_M^2 and the least-squares residual is
  // orthogonal to range(B), so g(x) - g* = lambda/(lambda-1) ||B(x - x_ls)||^2.
  double do_g_gap(const Vector& x) const override {
    return lam_ / (lam_ - 1.0) * (B_ * (x - x_ls_)).squaredNorm();
  }

  // f(x, .) is a concave quadratic with Hessian -2(lambda-1)M.
  double do_response_gap(const Vector& x, const Vector& y) const override {
    return (lam_ - 1.0) * apply_C(y - do_best_response_y(x)).squaredNorm();
  }

 private:
  static double smallest_positive(const Vector& s) {
    const double cut = 1e-10 * s[0];
    double m = s[0];
    for (Index i = 0; i < s.size(); ++i)
      if (s[i] > cut) m = s[i];
    return m;
  }
  static Index count_positive(const Vector& s) {
    const double cut = 1e-10 * s[0];
    Index k = 0;
    while (k < s.size() && s[k] > cut) ++k;
    return k;
  }

  [[nodiscard]] Vector apply_C(const Vector& v) const { return c_identity_ ? v : Vector(d_.C * v); }
  [[nodiscard]] Vector apply_Ct(const Vector& v) const { return c_identity_ ? v : Vector(d_.C.transpose() * v); }
  [[nodiscard]] double c_row_dot(Index i, const Vector& v) const { return c_identity_ ? v[i] : d_.C.row(i).dot(v); }
  void add_c_row(Index i, double scale, Vector& out) const {
    if (c_identity_)
      out[i] += scale;
    else
      out += scale * d_.C.row(i).transpose();
  }
  [[nodiscard]] Vector project_range(const Vector& v) const {
    return c_identity_ ? v : Vector(range_basis_ * (range_basis_.transpose() * v));
  }

  RlsDataset d_;
  bool c_identity_ = false;
  Matrix B_;            // C A
  Vector c_y0_;         // C y0
  Matrix range_basis_;  // orthonormal basis of range(M), unused when C = I
  double lam_ = 2.0;
  ProblemConstants consts_{};
  Eigen::CompleteOrthogonalDecomposition<Matrix> b_solver_;
  Vector x_ls_;
  double g_star_ = 0.0;
  Iterate saddle_;
};

[[nodiscard]] inline ProblemPtr make_rls(RlsDataset d) { return std::make_shared<RlsProblem>(std::move(d)); }

}  // namespace agda
