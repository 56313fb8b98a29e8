#include "advs/classifier.hpp"

namespace advs {

void check_input(const Classifier& model, const Tensor& x) {
  if (x.shape() != model.input_shape()) {
    throw ShapeError("input shape " + shape_string(x.shape()) + " does not match model input " +
                     shape_string(model.input_shape()));
  }
}

Eigen::VectorXd logits(const Classifier& model, const Tensor& x) {
  check_input(model, x);
  Graph64 g;
  return model.forward(g, g.constant_ref(x)).value().data().matrix();
}

Eigen::VectorXd predict(const Classifier& model, const Tensor& x) {
  return softmax(logits(model, x).array()).matrix();
}

Index argmax(const Eigen::VectorXd& v) {
  Index best = 0;
  for (Index i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

Index predicted_class(const Classifier& model, const Tensor& x) { return argmax(logits(model, x)); }

Tensor input_gradient(const Classifier& model, const Tensor& x, Index label) {
  check_input(model, x);
  Graph64 g;
  auto in = g.variable(x);
  g.backward(softmax_cross_entropy(model.forward(g, in), label));
  return g.gradient(in);
}

LogitJacobian logit_jacobian(const Classifier& model, const Tensor& x) {
  check_input(model, x);
  Graph64 g;
  auto in = g.variable(x);
  auto out = model.forward(g, in);
  LogitJacobian j;
  j.logits = out.value().data().matrix();
  for (Index l = 0; l < j.logits.size(); ++l) {
    g.backward(select(out, l));
    j.gradients.push_back(g.gradient(in));
  }
  return j;
}

AffineClassifier::AffineClassifier(Shape input_shape, Tensor weights, Tensor bias)
    : input_shape_(std::move(input_shape)), weights_(std::move(weights)), bias_(std::move(bias)) {
  if (weights_.rank() != 2 || weights_.dim(0) != shape_size(input_shape_) || bias_.size() != weights_.dim(1)) {
    throw ShapeError("affine classifier weights " + shape_string(weights_.shape()) + " / bias " +
                     shape_string(bias_.shape()) + " do not fit input " + shape_string(input_shape_));
  }
  if (weights_.dim(1) < 2) throw InvalidArgument("a classifier needs at least two classes");
}

Var64 AffineClassifier::forward(Graph64& graph, Var64 input) const {
  return dense(flatten(input), graph.constant_ref(weights_), graph.constant_ref(bias_));
}

}  // namespace advs
