#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mrcg {

using Vector = std::vector<double>;

/// y = op(x) for a square operator of dimension size().
class LinearOperator {
 public:
  virtual ~LinearOperator() = default;

  virtual std::size_t size() const = 0;
  virtual void apply(std::span<const double> x, std::span<double> y) const = 0;

  Vector operator()(std::span<const double> x) const {
    Vector y(size());
    apply(x, y);
    return y;
  }
};

/// A preconditioner is an operator that approximates an inverse, plus a label
/// used in reports.
class PreconditionerAction : public LinearOperator {
 public:
  virtual std::string label() const = 0;
};

using ApplyFunction =
    std::function<void(std::span<const double>, std::span<double>)>;

/// Wraps a callable as an operator. The callable may carry mutable state
/// through references it captures.
class FunctionOperator final : public PreconditionerAction {
 public:
  FunctionOperator(std::size_t n, ApplyFunction fn, std::string label = "fn")
      : n_(n), fn_(std::move(fn)), label_(std::move(label)) {}

  std::size_t size() const override { return n_; }
  void apply(std::span<const double> x, std::span<double> y) const override {
    fn_(x, y);
  }
  std::string label() const override { return label_; }

 private:
  std::size_t n_;
  ApplyFunction fn_;
  std::string label_;
};

class IdentityOperator final : public PreconditionerAction {
 public:
  explicit IdentityOperator(std::size_t n) : n_(n) {}

  std::size_t size() const override { return n_; }
  void apply(std::span<const double> x, std::span<double> y) const override;
  std::string label() const override { return "none"; }

 private:
  std::size_t n_;
};

}  // namespace mrcg
