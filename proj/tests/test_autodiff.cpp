#include <doctest.h>

#include <cmath>

#include "navmr/autodiff.hpp"
#include "navmr/error.hpp"
#include "navmr/rng.hpp"

using namespace navmr;
using namespace navmr::ad;

namespace {

Tensor random_tensor(Rng& rng, std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) {
  Tensor t(r, c);
  for (double& x : t.data) x = rng.uniform(lo, hi);
  return t;
}

void expect_pass(const ScalarGraph& f, const Tensor& x) {
  const auto rep = grad_check(f, x, 1e-4, 1e-4);
  CHECK_MESSAGE(rep.passed, "max rel error " << rep.max_rel_error);
}

}  // namespace

TEST_CASE("forward values") {
  Tape tape;
  CHECK(sigmoid(tape.constant(0.0)).scalar() == 0.5);
  Var v = tape.leaf(Tensor::row({0.3, -2.0, 5.0}));
  CHECK(cosine_similarity(v, v).scalar() == doctest::Approx(1.0));

  Var a = tape.constant(Tensor(2, 3, {1, 2, 3, 4, 5, 6}));
  Var b = tape.constant(Tensor::column({1, 0, -1}));
  const Tensor m = matmul(a, b).value();
  CHECK(m.rows == 2);
  CHECK(m.cols == 1);
  CHECK(m.data[0] == -2.0);
  CHECK(m.data[1] == -2.0);

  const Tensor c = concat(tape.constant(Tensor::column({1, 2})), tape.constant(Tensor::column({3}))).value();
  CHECK(c == Tensor::column({1, 2, 3}));
  CHECK(l1(tape.constant(Tensor::row({-1.5, 2.0}))).scalar() == 3.5);
  CHECK(softplus(tape.constant(0.0)).scalar() == doctest::Approx(std::log(2.0)));
}

TEST_CASE("shape and domain errors") {
  Tape tape;
  CHECK_THROWS_AS(add(tape.constant(Tensor(2, 1)), tape.constant(Tensor(1, 2))), ShapeError);
  CHECK_THROWS_AS(matmul(tape.constant(Tensor(2, 3)), tape.constant(Tensor(2, 1))), ShapeError);
  CHECK_THROWS_AS(log(tape.constant(Tensor::column({1.0, 0.0}))), NumericError);
  CHECK_THROWS_AS(tape.backward(tape.leaf(Tensor::column({1.0, 2.0}))), ShapeError);
  Var z = tape.constant(Tensor::row({0.0, 0.0}));
  CHECK_THROWS_AS(rowwise_cosine(tape.constant(Tensor(2, 2, 1.0)), z, ZeroNorm::kThrow), NumericError);
  CHECK(rowwise_cosine(tape.constant(Tensor(2, 2, 1.0)), z, ZeroNorm::kZero).value() == Tensor(2, 1));
}

TEST_CASE("hand gradients") {
  Tape tape;
  Var x = tape.leaf(Tensor::column({1.0, -2.0, 3.0}));
  tape.backward(sum(x));
  CHECK(x.grad() == Tensor::column({1.0, 1.0, 1.0}));

  Tape t2;
  Var w = t2.leaf(Tensor::row({0.0, 0.0}));
  Var in = t2.constant(Tensor::column({2.0, -4.0}));
  t2.backward(sigmoid(matmul(w, in)));
  CHECK(w.grad().data[0] == doctest::Approx(0.5));
  CHECK(w.grad().data[1] == doctest::Approx(-1.0));
}

TEST_CASE("grad_check closed forms") {
  const auto rep = grad_check([](Tape&, Var x) { return mul(x, x); }, Tensor::scalar(3.0), 1e-4, 1e-4);
  REQUIRE(rep.coords.size() == 1);
  CHECK(rep.coords[0].analytic == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(rep.coords[0].numeric == doctest::Approx(6.0).epsilon(1e-6));
  const auto flat = grad_check([](Tape& t, Var) { return t.constant(2.0); }, Tensor::column({1, 2}), 1e-4, 1e-4);
  CHECK(flat.passed);
  for (const auto& c : flat.coords) CHECK(c.analytic == 0.0);
  // A wrong gradient must be caught: clamp_min is flat below the floor,
  // but a kink at the evaluation point fools central differences.
  const auto kink = grad_check([](Tape&, Var x) { return sum(clamp_min(x, 0.0)); }, Tensor::scalar(0.0), 1e-4, 1e-4);
  CHECK(!kink.passed);
}

TEST_CASE("every op passes grad_check on random points") {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor a = random_tensor(rng, 3, 4);
    const Tensor b = random_tensor(rng, 4, 2);
    const Tensor row = random_tensor(rng, 1, 4);
    expect_pass([&](Tape& t, Var x) { return sum(matmul(x, t.constant(b))); }, a);
    expect_pass([&](Tape& t, Var x) { return sum(matmul(t.constant(a), x)); }, b);
    expect_pass([&](Tape& t, Var x) { return mean(mul(add(x, t.constant(a)), sub(x, t.constant(a)))); }, a);
    expect_pass([](Tape&, Var x) { return sum(tanh(sigmoid(x))); }, a);
    expect_pass([](Tape&, Var x) { return sum(log(add_scalar(mul(x, x), 0.5))); }, a);
    expect_pass([](Tape&, Var x) { return l1(scale(x, 3.0)); }, a);
    expect_pass([](Tape&, Var x) { return sum(softplus(x)); }, a);
    expect_pass([&](Tape& t, Var x) { return cosine_similarity(x, t.constant(row)); }, row);
    expect_pass([&](Tape& t, Var x) { return sum(rowwise_cosine(x, t.constant(row))); }, a);
    expect_pass([&](Tape& t, Var x) { return sum(rowwise_cosine(t.constant(a), x)); }, row);
    expect_pass([&](Tape& t, Var x) { return sum(add_row(t.constant(a), x)); }, row);
    expect_pass([&](Tape&, Var x) { return sum(tanh(concat(x, scale(x, -0.5)))); }, a);
    expect_pass([](Tape&, Var x) {
      return add(mul(element(x, 3), element(x, 5)), sum(tanh(slice(x, 2, 2, 3))));
    }, a);
  }
}

TEST_CASE("a leaf used twice accumulates both paths") {
  Tape tape;
  Var x = tape.leaf(Tensor::scalar(2.0));
  tape.backward(add(mul(x, x), scale(x, 3.0)));
  CHECK(x.grad().data[0] == doctest::Approx(7.0));
}
