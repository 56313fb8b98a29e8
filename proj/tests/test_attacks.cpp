#include <doctest.h>

#include <cmath>

#include "advs/attacks.hpp"
#include "checks.hpp"

using namespace advs;

namespace {

AttackConfig no_random(std::vector<double> eps) {
  AttackConfig cfg;
  cfg.epsilons = std::move(eps);
  cfg.random_start = false;
  return cfg;
}

}  // namespace

TEST_CASE("attack names and configuration") {
  for (AttackKind k : kAttackKinds) CHECK(parse_attack(attack_name(k)) == k);
  CHECK(parse_attack("linfpgd") == AttackKind::LinfPGD);
  CHECK_THROWS_AS(parse_attack("CW"), InvalidArgument);

  const auto grid = default_epsilon_grid();
  REQUIRE(grid.size() == 10);
  CHECK(grid.front() == 0.001);
  CHECK(grid[8] == 0.256);
  CHECK(grid.back() == 0.5);

  AttackConfig cfg;
  CHECK(cfg.pgd_steps() == 40);
  CHECK(cfg.deepfool_steps() == 50);
  CHECK(cfg.pgd_alpha() == doctest::Approx(0.05));
  cfg.epsilons = {0.1, 0.1};
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg.epsilons = {};
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg.epsilons = {-0.1, 0.1};
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
}

TEST_CASE("minimal epsilon fixtures") {
  const auto t = check::minimal_epsilon_fixtures();
  CHECK_MESSAGE(t.ok(), t.first_failure);

  // Nothing on the grid crosses: failure with the largest candidate.
  const auto o = fgsm(check::two_logit_model(), Tensor({1}, {0.6}), 0, no_random({0.01, 0.05}));
  CHECK_FALSE(o.success);
  CHECK_FALSE(o.epsilon_used.has_value());
  CHECK(o.adversarial[0] == doctest::Approx(0.55));
}

TEST_CASE("FGM with a zero gradient") {
  const AffineClassifier flat({2}, Tensor::zeros({2, 2}), Tensor({2}, {1.0, 0.0}));
  const auto o = fgm(flat, Tensor({2}, {0.3, 0.7}), 0, AttackConfig{});
  CHECK_FALSE(o.success);
  CHECK(o.l2_norm == 0);
  CHECK_FALSE(o.epsilon_used.has_value());
}

TEST_CASE("PGD follows the analytic trajectory") {
  AttackConfig cfg = no_random({0.2});
  cfg.alpha = 0.05;
  cfg.steps = 10;
  std::vector<double> seen;
  const auto o = pgd(check::two_logit_model(), Tensor({1}, {0.6}), 0, cfg, NormOrder::Linf,
                     [&](const Tensor& it) { seen.push_back(it[0]); });
  REQUIRE(seen.size() == 10);
  const double want[] = {0.55, 0.5, 0.45, 0.4, 0.4, 0.4, 0.4, 0.4, 0.4, 0.4};
  for (int i = 0; i < 10; ++i) CHECK(seen[std::size_t(i)] == doctest::Approx(want[i]).epsilon(1e-12));
  CHECK(o.success);
  CHECK(o.iterations == 10);
  CHECK(o.linf_norm == doctest::Approx(0.2));

  SUBCASE("zero radius leaves the input unchanged") {
    AttackConfig zero = no_random({0.0});
    zero.steps = 5;
    const auto z = pgd(check::two_logit_model(), Tensor({1}, {0.6}), 0, zero, NormOrder::L2);
    CHECK(z.adversarial == Tensor({1}, {0.6}));
    CHECK_FALSE(z.success);
  }
  SUBCASE("one step with alpha at least epsilon is the FGSM candidate") {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 20; ++i) {
      const auto m = check::random_affine(rng, {6}, 3, 2.0);
      Tensor x(Shape{6}, Eigen::ArrayXd::Random(6) * 0.4 + 0.5);
      AttackConfig one = no_random({0.07});
      one.steps = 1;
      one.alpha = 0.07 * (1 + i % 3);
      const auto p = pgd(m, x, 1, one, NormOrder::Linf);
      const auto f = fgsm(m, x, 1, no_random({0.07}));
      CHECK(p.adversarial == f.adversarial);
    }
  }
}

TEST_CASE("DeepFool on a linear model") {
  const auto [o, trace] = deepfool_l2(check::identity_logits_model(), Tensor({2}, {0.8, 0.2}), 0, AttackConfig{});
  CHECK(o.success);
  CHECK(o.iterations == 1);
  CHECK(o.adversarial[0] == doctest::Approx(0.494).epsilon(1e-12));
  CHECK(o.adversarial[1] == doctest::Approx(0.506).epsilon(1e-12));
  CHECK(o.l2_norm == doctest::Approx(0.306 * std::sqrt(2.0)).epsilon(1e-12));
  REQUIRE(trace.steps.size() == 1);
  CHECK(trace.steps[0].selected == 1);
  CHECK(std::isinf(trace.steps[0].distances[0]));

  SUBCASE("already misclassified input") {
    const auto [m, t] = deepfool_l2(check::identity_logits_model(), Tensor({2}, {0.8, 0.2}), 1, AttackConfig{});
    CHECK(m.iterations == 0);
    CHECK(m.l2_norm == 0);
    CHECK(m.success);
    CHECK(t.steps.empty());
  }
  SUBCASE("every rival degenerate") {
    const AffineClassifier flat({1}, Tensor({1, 2}, {1.0, 1.0}), Tensor({2}, {0.5, 0.0}));
    const auto [m, t] = deepfool_l2(flat, Tensor({1}, {0.3}), 0, AttackConfig{});
    CHECK_FALSE(m.success);
    CHECK(m.l2_norm == 0);
  }
  SUBCASE("random linear models") {
    const auto t = check::deepfool_linear_oracle(60, 17);
    CHECK_MESSAGE(t.ok(), t.first_failure);
    CHECK(t.worst < 1e-6);
  }
}

TEST_CASE("randomized attack invariants") {
  const auto t = check::attack_invariants(300, 5);
  CHECK_MESSAGE(t.ok(), t.first_failure);
  CHECK(t.cases == 300);
}

TEST_CASE("dispatch and determinism") {
  std::mt19937_64 rng(9);
  const auto m = check::random_affine(rng, {1, 4, 4}, 4, 3.0);
  Tensor x(Shape{1, 4, 4}, Eigen::ArrayXd::Random(16) * 0.5 + 0.5);
  AttackConfig cfg;
  cfg.seed = 123;
  cfg.steps = 6;
  const auto alias = run_attack(AttackKind::PGD, m, x, 2, cfg);
  const auto linf = run_attack(AttackKind::LinfPGD, m, x, 2, cfg);
  CHECK(alias.adversarial == linf.adversarial);
  CHECK(alias.success == linf.success);
  for (AttackKind k : kAttackKinds) {
    const auto a = run_attack(k, m, x, 2, cfg);
    const auto b = run_attack(k, m, x, 2, cfg);
    CHECK(a.adversarial == b.adversarial);
    CHECK(a.iterations == b.iterations);
  }
  AttackConfig reseeded = cfg;
  reseeded.seed = 124;
  CHECK_FALSE(run_attack(AttackKind::L2PGD, m, x, 2, cfg).adversarial ==
              run_attack(AttackKind::L2PGD, m, x, 2, reseeded).adversarial);
  CHECK_THROWS_AS(run_attack(AttackKind::FGSM, m, Tensor::zeros({4, 4}), 0, cfg), ShapeError);
}
