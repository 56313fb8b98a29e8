#pragma once

#include <vector>

#include "advs/ops.hpp"

namespace advs {

using Graph64 = Graph<double>;
using Var64 = Var<double>;

/// A differentiable K-class classifier over fixed-shape inputs. Attacks
/// see models only through this interface.
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual Shape input_shape() const = 0;
  virtual Index num_classes() const = 0;
  /// Records the forward pass on `graph` and returns the logit vector.
  virtual Var64 forward(Graph64& graph, Var64 input) const = 0;
};

/// Throws ShapeError when `x` does not match the classifier's input shape.
void check_input(const Classifier& model, const Tensor& x);

Eigen::VectorXd logits(const Classifier& model, const Tensor& x);
/// Softmax of the logits.
Eigen::VectorXd predict(const Classifier& model, const Tensor& x);
/// Argmax of the logits, ties broken toward the lowest class index.
Index predicted_class(const Classifier& model, const Tensor& x);
Index argmax(const Eigen::VectorXd& v);

/// ∇ₓ of the softmax cross-entropy loss at `label`. Model parameters are
/// treated as constants.
Tensor input_gradient(const Classifier& model, const Tensor& x, Index label);

struct LogitJacobian {
  Eigen::VectorXd logits;
  /// gradients[l] = ∇ₓ logit_l
  std::vector<Tensor> gradients;
};

/// Logits and every per-class input gradient from one forward pass.
LogitJacobian logit_jacobian(const Classifier& model, const Tensor& x);

/// logits = flatten(x) · W + b, with W of shape n×K.
class AffineClassifier final : public Classifier {
 public:
  AffineClassifier(Shape input_shape, Tensor weights, Tensor bias);

  Shape input_shape() const override { return input_shape_; }
  Index num_classes() const override { return weights_.dim(1); }
  Var64 forward(Graph64& graph, Var64 input) const override;

  const Tensor& weights() const { return weights_; }
  const Tensor& bias() const { return bias_; }

 private:
  Shape input_shape_;
  Tensor weights_;
  Tensor bias_;
};

}  // namespace advs
