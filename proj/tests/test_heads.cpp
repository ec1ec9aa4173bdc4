#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "gradcheck.hpp"
#include "perin/checkpoint.hpp"
#include "perin/error.hpp"
#include "perin/heads.hpp"

using namespace perin;
using namespace perin::testing;

TEST_CASE("finite-difference gradients") {
  for (const auto& check : all_gradient_checks()) {
    CAPTURE(check.name);
    Rng rng(42);
    for (int draw = 0; draw < 20; ++draw) CHECK(check.run(rng) < 1e-5);
  }
}

TEST_CASE("loss primitives: gradients") {
  Rng rng(3);
  for (int draw = 0; draw < 5; ++draw) {
    Matrix z = random_matrix(rng, 3, 4);
    const Matrix b = random_binary(rng, 3, 4);
    const Matrix t = softmax_rows(random_matrix(rng, 3, 4));
    GradProblem bce{{&z}, [&] { return bce_with_logits(z, b).loss; },
                    [&] { return std::vector<Matrix>{bce_with_logits(z, b).grad}; }};
    CHECK(relative_error(bce) < 1e-5);
    GradProblem ce{{&z}, [&] { return softmax_cross_entropy(z, t).loss; },
                   [&] { return std::vector<Matrix>{softmax_cross_entropy(z, t).grad}; }};
    CHECK(relative_error(ce) < 1e-5);
  }
}

TEST_CASE("focal loss with gamma 0 is smoothed cross-entropy") {
  Rng rng(5);
  CHECK(focal_degeneracy(rng, 100) <= 1e-12);
}

TEST_CASE("mixture with one component is a softmax") {
  Rng rng(6);
  CHECK(mos_degeneracy(rng, 100) <= 1e-12);
}

TEST_CASE("label loss examples") {
  const std::vector<double> one_hot = {0, 1, 0};
  CHECK(label_loss(one_hot, one_hot, 2.0) == 0.0);
  const std::vector<double> uniform = {0.25, 0.25, 0.25, 0.25};
  const std::vector<double> target = {1, 0, 0, 0};
  CHECK(label_loss(uniform, target, 0.0) == doctest::Approx(std::log(4.0)));
  CHECK(label_loss(uniform, target, 2.0) == doctest::Approx(0.5625 * std::log(4.0)));
  CHECK_THROWS_AS(label_loss(std::vector<double>{0.5, 0.6}, std::vector<double>{1, 0}, 2.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(label_loss(std::vector<double>{1.0}, std::vector<double>{1, 0}, 2.0),
                  std::invalid_argument);
}

TEST_CASE("mixture output is a distribution") {
  Rng rng(7);
  MixtureOfSoftmaxes mos(6, 9, 3);
  ParamList params;
  mos.collect("m", params);
  randomize(params, rng, 2.0);
  MixtureOfSoftmaxes::Cache cache;
  const Matrix p = mos.forward(random_matrix(rng, 5, 6, 3.0), cache);
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    CHECK(std::abs(p.row(i).sum() - 1.0) <= 1e-12);
    CHECK(p.row(i).minCoeff() >= 0.0);
  }
  CHECK_THROWS_AS(MixtureOfSoftmaxes(3, 3, 0), std::invalid_argument);
}

TEST_CASE("mixture gates underflow") {
  MixtureOfSoftmaxes mos(2, 3, 2);
  mos.gate.bias.value.setConstant(-1e4);
  MixtureOfSoftmaxes::Cache cache;
  CHECK_THROWS_AS(mos.forward(Matrix::Zero(1, 2), cache), std::domain_error);
}

TEST_CASE("zero parameters give even odds") {
  AnchorHead anchor(4, 3);
  DeepBiaffine::Cache cache;
  Rng rng(1);
  const Matrix logits = anchor.forward(random_matrix(rng, 3, 4), random_matrix(rng, 2, 4), cache);
  CHECK((sigmoid(logits).array() == 0.5).all());

  PropertyHead property(4);
  CHECK((sigmoid(property.forward(random_matrix(rng, 3, 4))[0]).array() == 0.5).all());
}

TEST_CASE("property families") {
  PropertyHead head(4, {3, 2, 5});
  CHECK(head.per_attribute());
  Rng rng(2);
  head.init(rng);
  const auto logits = head.forward(random_matrix(rng, 2, 4));
  REQUIRE(logits.size() == 3);
  CHECK(logits[0].cols() == 3);
  CHECK(logits[1].cols() == 2);
  CHECK(logits[2].cols() == 5);
  CHECK_FALSE(PropertyHead(4).per_attribute());
}

TEST_CASE("top distribution") {
  CHECK(TopHead::distribution(Matrix::Constant(1, 1, -3.0))(0) == 1.0);
  const auto d = TopHead::distribution(Matrix::Constant(4, 1, 0.7));
  for (int i = 0; i < 4; ++i) CHECK(d(i) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("edge targets") {
  EdgeHeads heads(4, 3, 2, 0, false);
  CHECK_FALSE(heads.has_attributes());
  EdgeTargets t;
  t.presence = Matrix::Zero(2, 2);
  t.presence(0, 1) = 1.0;
  t.labels[{0, 1}] = {1};
  Rng rng(4);
  heads.init(rng);
  EdgeHeads::Cache cache;
  const auto logits = heads.forward(random_matrix(rng, 2, 4), cache);
  CHECK(logits.presence.rows() == 2);
  CHECK(logits.labels.size() == 2);
  const auto l = heads.losses(logits, t);
  // label gradient only on the gold pair
  CHECK(l.grad.labels[0](1, 0) == 0.0);
  CHECK(l.grad.labels[0](0, 1) != 0.0);

  EdgeHeads multi(4, 3, 3, 0, true);
  multi.init(rng);
  EdgeTargets both = t;
  both.labels[{0, 1}] = {0, 2};
  const auto ml = multi.forward(random_matrix(rng, 2, 4), cache);
  const auto loss = multi.losses(ml, both);
  // independent sigmoids: both gold labels pulled up
  CHECK(loss.grad.labels[0](0, 1) < 0.0);
  CHECK(loss.grad.labels[2](0, 1) < 0.0);
  CHECK(loss.grad.labels[1](0, 1) > 0.0);
}

TEST_CASE("total loss") {
  const std::vector<double> l = {1.0, 2.0, 3.0};
  CHECK(total_loss(l, std::vector<double>{1, 1, 1}) == 6.0);
  CHECK(total_loss(std::vector<double>{2.0}, std::vector<double>{0.5}) == 1.0);
  CHECK(total_loss(std::vector<double>{0, 0}, std::vector<double>{1, 3}) == 0.0);
  CHECK_THROWS_AS(total_loss(l, std::vector<double>{1}), std::invalid_argument);
}

TEST_CASE("loss balancing") {
  SUBCASE("identical tasks keep unit weights") {
    LossBalancer b(3);
    for (int k = 0; k < 5; ++k) {
      const double loss = 1.0 / (k + 1);
      b.update(std::vector<double>{0.7, 0.7, 0.7}, std::vector<double>{loss, loss, loss});
      for (double w : b.weights()) CHECK(w == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  SUBCASE("faster-improving task loses weight") {
    const auto run = balancing_scenario();
    CHECK(run.worst_sum_error <= 1e-12);
    CHECK(run.fast_task_decreases);
    CHECK(run.fast_weights.back() < 1.0);
  }
  SUBCASE("zero initial loss is excluded with a warning") {
    LossBalancer b(2);
    b.update(std::vector<double>{1.0, 1.0}, std::vector<double>{0.0, 1.0});
    b.update(std::vector<double>{1.0, 0.5}, std::vector<double>{0.0, 0.5});
    CHECK(b.weights()[0] == 1.0);
    CHECK(b.weights()[1] == doctest::Approx(1.0));
    CHECK(b.warnings().size() == 1);
  }
  SUBCASE("inactive tasks keep their weight") {
    const std::vector<double> w = update_loss_weights(
        std::vector<double>{1.0, 2.0, 0.0}, std::vector<double>{0.5, 1.0, -1.0},
        std::vector<double>{1.0, 1.0, 1.0}, std::vector<double>{1.0, 1.0, 1.3}, 1.5, 0.025);
    CHECK(w[2] == 1.3);
    CHECK(w[0] + w[1] == doctest::Approx(2.0).epsilon(1e-12));
    for (double x : w) CHECK(x > 0.0);
  }
}

TEST_CASE("checkpoint round trip") {
  Rng rng(8);
  MixtureOfSoftmaxes a(4, 5, 2), b(4, 5, 2);
  ParamList pa, pb;
  a.collect("mos", pa);
  b.collect("mos", pb);
  randomize(pa, rng);
  const auto path = (std::filesystem::temp_directory_path() / "perin-ckpt-test.bin").string();
  save_checkpoint(path, pa);
  load_checkpoint(path, pb);
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i].param->value == pb[i].param->value);

  {
    std::ifstream in(path, std::ios::binary);
    char magic[8];
    in.read(magic, 8);
    CHECK(std::string(magic, 8) == "PERINCKP");
  }

  MixtureOfSoftmaxes wrong(4, 6, 2);
  ParamList pw;
  wrong.collect("mos", pw);
  CHECK_THROWS_AS(load_checkpoint(path, pw), DataError);
  ParamList renamed;
  wrong.collect("other", renamed);
  CHECK_THROWS_AS(load_checkpoint(path, renamed), DataError);

  std::ofstream(path, std::ios::binary) << "NOTACKPT";
  CHECK_THROWS_AS(load_checkpoint(path, pb), DataError);
  std::filesystem::remove(path);
}
