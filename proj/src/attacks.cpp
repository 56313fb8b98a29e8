#include "advs/attacks.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace advs {

std::string_view attack_name(AttackKind k) {
  switch (k) {
    case AttackKind::FGSM: return "FGSM";
    case AttackKind::FGM: return "FGM";
    case AttackKind::PGD: return "PGD";
    case AttackKind::LinfPGD: return "LinfPGD";
    case AttackKind::L2PGD: return "L2PGD";
    case AttackKind::L2DeepFool: return "L2DeepFool";
  }
  return "?";
}

AttackKind parse_attack(std::string_view name) {
  auto lower = [](std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
  };
  const std::string wanted = lower(name);
  for (AttackKind k : kAttackKinds) {
    if (lower(attack_name(k)) == wanted) return k;
  }
  throw InvalidArgument("unknown attack kind '" + std::string(name) +
                        "' (expected FGSM, FGM, PGD, LinfPGD, L2PGD or L2DeepFool)");
}

std::vector<double> default_epsilon_grid() {
  std::vector<double> grid;
  for (int k = 0; k <= 8; ++k) grid.push_back(0.001 * std::ldexp(1.0, k));
  grid.push_back(0.5);
  return grid;
}

void AttackConfig::validate() const {
  if (epsilons.empty()) throw InvalidArgument("epsilon list is empty");
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    if (!(epsilons[i] >= 0) || !std::isfinite(epsilons[i])) throw InvalidArgument("epsilons must be finite and non-negative");
    if (i > 0 && !(epsilons[i] > epsilons[i - 1])) throw InvalidArgument("epsilons must be strictly ascending");
  }
  if (steps && *steps < 1) throw InvalidArgument("steps must be at least 1");
  if (alpha && !(*alpha > 0)) throw InvalidArgument("alpha must be positive");
  if (!(overshoot >= 0)) throw InvalidArgument("overshoot must be non-negative");
}

namespace {

Eigen::ArrayXd clip_unit(const Eigen::ArrayXd& v) { return v.max(0.0).min(1.0); }

Eigen::ArrayXd sign_of(const Eigen::ArrayXd& g) {
  return g.unaryExpr([](double v) { return v > 0 ? 1.0 : v < 0 ? -1.0 : 0.0; });
}

// Shared ε-grid search of FGSM and FGM along a fixed direction.
AttackOutcome grid_search(const Classifier& model, const Tensor& x, Index label, const AttackConfig& cfg,
                          const Eigen::ArrayXd& direction) {
  AttackOutcome last;
  for (double eps : cfg.epsilons) {
    Tensor candidate(x.shape(), clip_unit(x.data() + eps * direction));
    last = make_outcome(model, x, std::move(candidate), label);
    if (last.success) {
      last.epsilon_used = eps;
      return last;
    }
  }
  return last;
}

}  // namespace

AttackOutcome make_outcome(const Classifier& model, const Tensor& original, Tensor adversarial, Index label) {
  if (adversarial.shape() != original.shape()) throw ShapeError("adversarial and original shapes differ");
  AttackOutcome out;
  out.mask = Tensor(original.shape(), adversarial.data() - original.data());
  out.linf_norm = out.mask.data().abs().maxCoeff();
  out.l2_norm = out.mask.data().matrix().norm();
  out.success = predicted_class(model, adversarial) != label;
  out.adversarial = std::move(adversarial);
  return out;
}

AttackOutcome fgsm(const Classifier& model, const Tensor& x, Index label, const AttackConfig& cfg) {
  cfg.validate();
  const Tensor g = input_gradient(model, x, label);
  return grid_search(model, x, label, cfg, sign_of(g.data()));
}

AttackOutcome fgm(const Classifier& model, const Tensor& x, Index label, const AttackConfig& cfg) {
  cfg.validate();
  const Tensor g = input_gradient(model, x, label);
  const double norm = g.data().matrix().norm();
  if (norm == 0) return make_outcome(model, x, x, label);
  return grid_search(model, x, label, cfg, g.data() / norm);
}

AttackOutcome pgd(const Classifier& model, const Tensor& x, Index label, const AttackConfig& cfg, NormOrder order,
                  const IterateObserver& observe) {
  cfg.validate();
  check_input(model, x);
  const double eps = cfg.radius();
  const double alpha = cfg.pgd_alpha();
  const int steps = cfg.pgd_steps();
  const Index n = x.size();
  const Eigen::ArrayXd& origin = x.data();

  auto project = [&](const Eigen::ArrayXd& v) -> Eigen::ArrayXd {
    if (order == NormOrder::Linf) return clip_unit(v.max(origin - eps).min(origin + eps));
    Eigen::ArrayXd delta = v - origin;
    const double norm = delta.matrix().norm();
    if (norm > eps) delta *= eps / norm;
    return clip_unit(origin + delta);
  };

  Eigen::ArrayXd current = origin;
  if (cfg.random_start) {
    std::mt19937_64 rng(cfg.seed);
    if (order == NormOrder::Linf) {
      std::uniform_real_distribution<double> u(-eps, eps);
      Eigen::ArrayXd noise(n);
      for (Index i = 0; i < n; ++i) noise[i] = u(rng);
      current = clip_unit(origin + noise);
    } else {
      // Uniform in the L2 ball: Gaussian direction, radius ε·u^(1/n).
      std::normal_distribution<double> normal;
      std::uniform_real_distribution<double> u(0.0, 1.0);
      Eigen::ArrayXd dir(n);
      for (Index i = 0; i < n; ++i) dir[i] = normal(rng);
      const double norm = dir.matrix().norm();
      const double radius = eps * std::pow(u(rng), 1.0 / static_cast<double>(n));
      if (norm > 0) current = project(origin + dir * (radius / norm));
    }
  }

  for (int step = 0; step < steps; ++step) {
    const Tensor g = input_gradient(model, Tensor(x.shape(), current), label);
    Eigen::ArrayXd direction;
    if (order == NormOrder::Linf) {
      direction = sign_of(g.data());
    } else {
      const double norm = g.data().matrix().norm();
      direction = norm > 0 ? Eigen::ArrayXd(g.data() / norm) : Eigen::ArrayXd::Zero(n);
    }
    current = project(current + alpha * direction);
    if (observe) observe(Tensor(x.shape(), current));
  }

  AttackOutcome out = make_outcome(model, x, Tensor(x.shape(), current), label);
  out.epsilon_used = eps;
  out.iterations = steps;
  return out;
}

std::pair<AttackOutcome, DeepFoolTrace> deepfool_l2(const Classifier& model, const Tensor& x, Index label,
                                                    const AttackConfig& cfg) {
  cfg.validate();
  check_input(model, x);
  const Index classes = model.num_classes();
  if (classes < 2) throw InvalidArgument("DeepFool needs at least two classes");
  if (label < 0 || label >= classes) throw InvalidArgument("label outside the model's classes");

  DeepFoolTrace trace;
  if (predicted_class(model, x) != label) return {make_outcome(model, x, x, label), trace};

  constexpr double kDegenerate = 1e-12;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const int cap = cfg.deepfool_steps();
  Eigen::ArrayXd total = Eigen::ArrayXd::Zero(x.size());
  Tensor candidate = x;
  AttackOutcome out;

  for (int iteration = 1; iteration <= cap; ++iteration) {
    const LogitJacobian jac = logit_jacobian(model, candidate);
    DeepFoolStep step;
    step.distances.assign(static_cast<std::size_t>(classes), kInf);
    const Eigen::ArrayXd& g0 = jac.gradients[static_cast<std::size_t>(label)].data();
    double best = kInf;
    Index chosen = -1;
    Eigen::ArrayXd chosen_w;
    double chosen_gap = 0, chosen_norm = 0;
    for (Index l = 0; l < classes; ++l) {
      if (l == label) continue;
      Eigen::ArrayXd w = jac.gradients[static_cast<std::size_t>(l)].data() - g0;
      const double norm = w.matrix().norm();
      if (norm < kDegenerate) continue;
      const double gap = std::abs(jac.logits[l] - jac.logits[label]);
      const double d = gap / norm;
      step.distances[static_cast<std::size_t>(l)] = d;
      if (d < best) {
        best = d;
        chosen = l;
        chosen_w = std::move(w);
        chosen_gap = gap;
        chosen_norm = norm;
      }
    }
    if (chosen < 0) {
      out = make_outcome(model, x, x, label);
      out.iterations = iteration;
      return {out, trace};
    }
    step.selected = chosen;
    trace.steps.push_back(std::move(step));

    total += (chosen_gap / (chosen_norm * chosen_norm)) * chosen_w;
    candidate = Tensor(x.shape(), clip_unit(x.data() + (1 + cfg.overshoot) * total));
    out = make_outcome(model, x, candidate, label);
    out.iterations = iteration;
    if (out.success) break;
  }
  return {out, trace};
}

AttackOutcome run_attack(AttackKind kind, const Classifier& model, const Tensor& x, Index label,
                         const AttackConfig& cfg) {
  switch (kind) {
    case AttackKind::FGSM: return fgsm(model, x, label, cfg);
    case AttackKind::FGM: return fgm(model, x, label, cfg);
    case AttackKind::PGD:
    case AttackKind::LinfPGD: return pgd(model, x, label, cfg, NormOrder::Linf);
    case AttackKind::L2PGD: return pgd(model, x, label, cfg, NormOrder::L2);
    case AttackKind::L2DeepFool: return deepfool_l2(model, x, label, cfg).first;
  }
  throw InvalidArgument("unhandled attack kind");
}

}  // namespace advs
