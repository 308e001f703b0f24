#include <doctest.h>

#include "../support.hpp"
#include "vessel/ops.hpp"

using namespace vessel;

TEST_CASE("constructor rejects data that does not match the shape") {
  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<float>(5)), ShapeError);
  CHECK(Tensor::zeros({2, 3}).numel() == 6);
  CHECK(Tensor::scalar(4.0f).item() == 4.0f);
  CHECK_THROWS_AS(Tensor::zeros({2}).item(), ShapeError);
}

TEST_CASE("nothing is recorded without an active tape") {
  const Tensor x = Tensor::full({3}, 2.0f, true);
  const Tensor y = mul(x, x);
  CHECK(Tape<float>::active() == nullptr);
  CHECK_FALSE(y.requires_grad());
}

TEST_CASE("ops without grad-requiring inputs are not recorded") {
  Tape<float> tape;
  TapeScope<float> scope(tape);
  const Tensor x = Tensor::full({3}, 2.0f);
  (void)add(x, x);
  CHECK(tape.size() == 0);
}

TEST_CASE("gradients accumulate over fan-out") {
  Tape<double> tape;
  const Tensor64 x({3}, {1.0, -2.0, 0.5}, true);
  {
    TapeScope<double> scope(tape);
    // s = sum(x * x + x): ds/dx = 2x + 1
    const Tensor64 s = sum(add(mul(x, x), x));
    tape.backward(s);
  }
  const auto g = x.grad();
  CHECK(g[0] == doctest::Approx(3.0));
  CHECK(g[1] == doctest::Approx(-3.0));
  CHECK(g[2] == doctest::Approx(2.0));
}

TEST_CASE("backward rejects non-scalar, foreign and reused losses") {
  Tape<float> tape;
  const Tensor x = Tensor::full({2}, 1.0f, true);
  Tensor y, s;
  {
    TapeScope<float> scope(tape);
    y = scale(x, 2.0f);
    s = sum(y);
  }
  CHECK_THROWS_AS(tape.backward(y), AutodiffError);
  CHECK_THROWS_AS(tape.backward(Tensor::scalar(1.0f, true)), AutodiffError);
  tape.backward(s);
  CHECK(tape.consumed());
  CHECK_THROWS_AS(tape.backward(s), AutodiffError);
}

TEST_CASE("NoGradScope suspends recording and restores the tape") {
  Tape<float> tape;
  TapeScope<float> scope(tape);
  const Tensor x = Tensor::full({2}, 1.0f, true);
  {
    NoGradScope<float> off;
    CHECK(Tape<float>::active() == nullptr);
    (void)scale(x, 3.0f);
  }
  CHECK(Tape<float>::active() == &tape);
  CHECK(tape.size() == 0);
  (void)scale(x, 3.0f);
  CHECK(tape.size() == 1);
}

TEST_CASE("clone and cast copy storage") {
  const Tensor x({2}, {1.5f, -2.0f}, true);
  Tensor c = x.clone();
  c.mutable_data()[0] = 9.0f;
  CHECK(x.data()[0] == 1.5f);
  CHECK_FALSE(c.requires_grad());
  const Tensor64 d = x.cast<double>();
  CHECK(d.data()[1] == -2.0);
}
