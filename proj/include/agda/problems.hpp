#pragma once

// Minimax problem oracles: value, gradients, per-component gradients and,
// where a closed form exists, best responses and g(x) = max_y f(x, y).

#include "agda/core.hpp"

#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

namespace agda {

/// Raised when an oracle is asked for a quantity the problem does not provide.
class UnsupportedOperation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Abstract minimax objective f(x, y) = (1/n) sum_i f_i(x, y).
///
/// Public entry points validate dimensions and forward to the protected
/// do_* hooks. Problems are immutable after construction, so one instance can
/// be shared by concurrent solver runs.
class MinimaxProblem {
 public:
  virtual ~MinimaxProblem() = default;

  [[nodiscard]] virtual std::string name() const = 0;
  [[nodiscard]] virtual Index dim_x() const = 0;
  [[nodiscard]] virtual Index dim_y() const = 0;
  [[nodiscard]] virtual Index num_components() const { return 1; }

  [[nodiscard]] virtual std::optional<ProblemConstants> constants() const { return std::nullopt; }
  [[nodiscard]] virtual std::optional<Iterate> saddle() const { return std::nullopt; }
  [[nodiscard]] virtual bool has_exact_best_response() const { return false; }
  [[nodiscard]] virtual bool has_exact_best_response_x() const { return false; }

  [[nodiscard]] double value(const Iterate& it) const {
    check(it);
    return do_value(it.x, it.y);
  }

  [[nodiscard]] Gradient grad(const Iterate& it) const {
    check(it);
    return do_grad(it.x, it.y);
  }

  /// Gradient of the component f_i, 0 <= i < num_components().
  [[nodiscard]] Gradient component_grad(Index i, const Iterate& it) const {
    check(it);
    check_index(i);
    if (num_components() == 1) return do_grad(it.x, it.y);
    return do_component_grad(i, it.x, it.y);
  }

  /// grad_x f alone; problems override when it is cheaper than the pair.
  [[nodiscard]] Vector grad_x(const Iterate& it) const {
    check(it);
    return do_grad_x(it.x, it.y);
  }

  [[nodiscard]] Vector grad_y(const Iterate& it) const {
    check(it);
    return do_grad_y(it.x, it.y);
  }

  [[nodiscard]] Vector component_grad_x(Index i, const Iterate& it) const {
    check(it);
    check_index(i);
    if (num_components() == 1) return do_grad_x(it.x, it.y);
    return do_component_grad_x(i, it.x, it.y);
  }

  [[nodiscard]] Vector component_grad_y(Index i, const Iterate& it) const {
    check(it);
    check_index(i);
    if (num_components() == 1) return do_grad_y(it.x, it.y);
    return do_component_grad_y(i, it.x, it.y);
  }

  /// A maximizer of f(x, .).
  [[nodiscard]] Vector best_response_y(const Vector& x) const {
    check_x(x);
    require_best_response();
    return do_best_response_y(x);
  }

  /// A minimizer of f(., y).
  [[nodiscard]] Vector best_response_x(const Vector& y) const {
    check_y(y);
    if (!has_exact_best_response_x())
      throw UnsupportedOperation(name() + ": no exact minimizer of f(., y) available");
    return do_best_response_x(y);
  }

  /// g(x) = max_y f(x, y).
  [[nodiscard]] double g_value(const Vector& x) const {
    check_x(x);
    require_best_response();
    return do_value(x, do_best_response_y(x));
  }

  /// g* = min_x g(x).
  [[nodiscard]] double g_star() const {
    require_best_response();
    return do_g_star();
  }

  /// g(x) - g*, evaluated without cancellation where the problem allows.
  [[nodiscard]] double g_gap(const Vector& x) const {
    check_x(x);
    require_best_response();
    return do_g_gap(x);
  }

  /// g(x) - f(x, y) >= 0.
  [[nodiscard]] double response_gap(const Iterate& it) const {
    check(it);
    require_best_response();
    return do_response_gap(it.x, it.y);
  }

 protected:
  virtual double do_value(const Vector& x, const Vector& y) const = 0;
  virtual Gradient do_grad(const Vector& x, const Vector& y) const = 0;
  virtual Gradient do_component_grad(Index, const Vector& x, const Vector& y) const { return do_grad(x, y); }
  virtual Vector do_grad_x(const Vector& x, const Vector& y) const { return do_grad(x, y).gx; }
  virtual Vector do_grad_y(const Vector& x, const Vector& y) const { return do_grad(x, y).gy; }
  virtual Vector do_component_grad_x(Index i, const Vector& x, const Vector& y) const {
    return do_component_grad(i, x, y).gx;
  }
  virtual Vector do_component_grad_y(Index i, const Vector& x, const Vector& y) const {
    return do_component_grad(i, x, y).gy;
  }
  virtual Vector do_best_response_y(const Vector&) const {
    throw UnsupportedOperation(name() + ": no exact best response available");
  }
  virtual Vector do_best_response_x(const Vector&) const {
    throw UnsupportedOperation(name() + ": no exact minimizer of f(., y) available");
  }
  virtual double do_g_star() const { throw UnsupportedOperation(name() + ": g* unavailable"); }
  virtual double do_g_gap(const Vector& x) const { return do_value(x, do_best_response_y(x)) - do_g_star(); }
  virtual double do_response_gap(const Vector& x, const Vector& y) const {
    return do_value(x, do_best_response_y(x)) - do_value(x, y);
  }

  void check_x(const Vector& x) const {
    if (x.size() != dim_x()) throw std::invalid_argument(name() + ": x has wrong dimension");
  }
  void check_y(const Vector& y) const {
    if (y.size() != dim_y()) throw std::invalid_argument(name() + ": y has wrong dimension");
  }
  void check(const Iterate& it) const {
    check_x(it.x);
    check_y(it.y);
  }
  void check_index(Index i) const {
    if (i < 0 || i >= num_components()) throw std::out_of_range(name() + ": component index out of range");
  }
  void require_best_response() const {
    if (!has_exact_best_response()) throw UnsupportedOperation(name() + ": no exact best response available");
  }
};

using ProblemPtr = std::shared_ptr<const MinimaxProblem>;

// Free-function spellings of the oracle surface.
[[nodiscard]] inline double value(const MinimaxProblem& p, const Iterate& it) { return p.value(it); }
[[nodiscard]] inline Gradient grad(const MinimaxProblem& p, const Iterate& it) { return p.grad(it); }
[[nodiscard]] inline Gradient component_grad(const MinimaxProblem& p, Index i, const Iterate& it) {
  return p.component_grad(i, it);
}
[[nodiscard]] inline Vector best_response_y(const MinimaxProblem& p, const Vector& x) { return p.best_response_y(x); }
[[nodiscard]] inline double g_value(const MinimaxProblem& p, const Vector& x) { return p.g_value(x); }
[[nodiscard]] inline double g_star(const MinimaxProblem& p) { return p.g_star(); }

// ---------------------------------------------------------------------------

/// f(x, y) = x^2 + 3 sin^2(x) sin^2(y) - 4 y^2 - 10 sin^2(y).
///
/// Nonconvex-nonconcave with the unique saddle (0, 0); x*(y) = y*(x) = 0 for
/// every x, y. PL constants 1/16 (in x) and 1/14 (in -f over y); the curvature
/// bounds are 8 and 28, so l = 28 covers the joint Lipschitz condition.
class ToyProblem final : public MinimaxProblem {
 public:
  [[nodiscard]] std::string name() const override { return "toy"; }
  [[nodiscard]] Index dim_x() const override { return 1; }
  [[nodiscard]] Index dim_y() const override { return 1; }
  [[nodiscard]] std::optional<ProblemConstants> constants() const override {
    return ProblemConstants{28.0, 1.0 / 16.0, 1.0 / 14.0};
  }
  [[nodiscard]] std::optional<Iterate> saddle() const override {
    return Iterate{Vector::Zero(1), Vector::Zero(1)};
  }
  [[nodiscard]] bool has_exact_best_response() const override { return true; }
  [[nodiscard]] bool has_exact_best_response_x() const override { return true; }

  static double f(double x, double y) {
    const double sx = std::sin(x), sy = std::sin(y);
    return x * x + 3.0 * sx * sx * sy * sy - 4.0 * y * y - 10.0 * sy * sy;
  }

 protected:
  double do_value(const Vector& x, const Vector& y) const override { return f(x[0], y[0]); }

  Gradient do_grad(const Vector& x, const Vector& y) const override {
    const double sx = std::sin(x[0]), sy = std::sin(y[0]);
    Gradient g{Vector(1), Vector(1)};
    g.gx[0] = 2.0 * x[0] + 3.0 * sy * sy * std::sin(2.0 * x[0]);
    g.gy[0] = -8.0 * y[0] + 3.0 * sx * sx * std::sin(2.0 * y[0]) - 10.0 * std::sin(2.0 * y[0]);
    return g;
  }

  Vector do_best_response_y(const Vector&) const override { return Vector::Zero(1); }
  Vector do_best_response_x(const Vector&) const override { return Vector::Zero(1); }
  double do_g_star() const override { return 0.0; }
  double do_g_gap(const Vector& x) const override { return x[0] * x[0]; }
  double do_response_gap(const Vector& x, const Vector& y) const override {
    // x^2 - f(x, y); the x^2 terms cancel exactly.
    const double sx = std::sin(x[0]), sy = std::sin(y[0]);
    return 4.0 * y[0] * y[0] + (10.0 - 3.0 * sx * sx) * sy * sy;
  }
};

/// f(x, y) = log(1 + e^x) + 3 x y - log(1 + e^y). Used to contrast alternating
/// and simultaneous updates; no best response or PL constants are provided.
class LogisticBilinearProblem final : public MinimaxProblem {
 public:
  [[nodiscard]] std::string name() const override { return "logistic_bilinear"; }
  [[nodiscard]] Index dim_x() const override { return 1; }
  [[nodiscard]] Index dim_y() const override { return 1; }

  static double softplus(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }
  static double sigmoid(double t) {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
  }

 protected:
  double do_value(const Vector& x, const Vector& y) const override {
    return softplus(x[0]) + 3.0 * x[0] * y[0] - softplus(y[0]);
  }
  Gradient do_grad(const Vector& x, const Vector& y) const override {
    Gradient g{Vector(1), Vector(1)};
    g.gx[0] = sigmoid(x[0]) + 3.0 * y[0];
    g.gy[0] = 3.0 * x[0] - sigmoid(y[0]);
    return g;
  }
};

/// f(x, y) = 1/2 x'Px + x'By - 1/2 y'Qy with P, Q symmetric positive definite.
/// Strongly convex-strongly concave; the saddle is the origin.
class QuadraticProblem final : public MinimaxProblem {
 public:
  QuadraticProblem(Matrix P, Matrix B, Matrix Q) : P_(std::move(P)), B_(std::move(B)), Q_(std::move(Q)) {
    if (P_.rows() != P_.cols() || Q_.rows() != Q_.cols() || B_.rows() != P_.rows() || B_.cols() != Q_.rows())
      throw std::invalid_argument("quadratic problem: inconsistent block shapes");
    Eigen::SelfAdjointEigenSolver<Matrix> ep(P_), eq(Q_);
    const double mp = ep.eigenvalues().minCoeff(), mq = eq.eigenvalues().minCoeff();
    if (!(mp > 0.0) || !(mq > 0.0)) throw std::invalid_argument("quadratic problem: P and Q must be positive definite");
    const double nb = B_.size() > 0 ? Eigen::JacobiSVD<Matrix>(B_).singularValues()[0] : 0.0;
    consts_ = ProblemConstants{std::max({ep.eigenvalues().maxCoeff(), eq.eigenvalues().maxCoeff(), nb}), mp, mq};
    p_llt_.compute(P_);
    q_llt_.compute(Q_);
    schur_ = P_ + B_ * q_llt_.solve(B_.transpose());
  }

  [[nodiscard]] std::string name() const override { return "quadratic"; }
  [[nodiscard]] Index dim_x() const override { return P_.rows(); }
  [[nodiscard]] Index dim_y() const override { return Q_.rows(); }
  [[nodiscard]] std::optional<ProblemConstants> constants() const override { return consts_; }
  [[nodiscard]] std::optional<Iterate> saddle() const override {
    return Iterate{Vector::Zero(dim_x()), Vector::Zero(dim_y())};
  }
  [[nodiscard]] bool has_exact_best_response() const override { return true; }
  [[nodiscard]] bool has_exact_best_response_x() const override { return true; }

 protected:
  double do_value(const Vector& x, const Vector& y) const override {
    return 0.5 * x.dot(P_ * x) + x.dot(B_ * y) - 0.5 * y.dot(Q_ * y);
  }
  Gradient do_grad(const Vector& x, const Vector& y) const override {
    return {P_ * x + B_ * y, B_.transpose() * x - Q_ * y};
  }
  Vector do_best_response_y(const Vector& x) const override { return q_llt_.solve(B_.transpose() * x); }
  Vector do_best_response_x(const Vector& y) const override { return -p_llt_.solve(B_ * y); }
  double do_g_star() const override { return 0.0; }
  double do_g_gap(const Vector& x) const override { return 0.5 * x.dot(schur_ * x); }

 private:
  Matrix P_, B_, Q_;
  Matrix schur_;
  Eigen::LLT<Matrix> p_llt_, q_llt_;
  ProblemConstants consts_{};
};

[[nodiscard]] inline ProblemPtr make_toy() { return std::make_shared<ToyProblem>(); }
[[nodiscard]] inline ProblemPtr make_logistic_bilinear() { return std::make_shared<LogisticBilinearProblem>(); }

}  // namespace agda
