#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <vector>

#include "walklm/optimizer.hpp"

using namespace walklm;

TEST_CASE("learning rate warms up linearly and hits its peak at the warmup boundary") {
  TrainHyper h = TrainHyper::pretrain_defaults();  // divisor 10, linear decay
  const double total = 1000.0;
  CHECK(lr_at(0.0, total, h) == 0.0);
  CHECK(lr_at(50.0, total, h) == doctest::Approx(h.max_lr * 0.5).epsilon(1e-12));
  CHECK(lr_at(100.0, total, h) == doctest::Approx(h.max_lr).epsilon(1e-12));
  // Linear decay to zero at the end; clamped beyond.
  CHECK(lr_at(550.0, total, h) == doctest::Approx(h.max_lr * 0.5).epsilon(1e-12));
  CHECK(lr_at(1000.0, total, h) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(lr_at(2000.0, total, h) == lr_at(1000.0, total, h));
  CHECK(lr_at(-5.0, total, h) == 0.0);
  CHECK_THROWS(lr_at(1.0, 0.0, h));
}

TEST_CASE("cosine decay follows the half-cosine from peak to zero") {
  TrainHyper h = TrainHyper::finetune_defaults();  // divisor 3.33, cosine
  const double total = 333.0;
  const double warmup = total / h.warmup_divisor;
  CHECK(lr_at(warmup, total, h) == doctest::Approx(h.max_lr).epsilon(1e-12));
  for (double f : {0.25, 0.5, 0.75}) {
    double p = warmup + f * (total - warmup);
    double want = h.max_lr * 0.5 * (1.0 + std::cos(f * M_PI));
    CHECK(lr_at(p, total, h) == doctest::Approx(want).epsilon(1e-12));
  }
  CHECK(lr_at(total, total, h) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("one AdamW step matches the hand-computed update") {
  TrainHyper h;
  h.beta1 = 0.9;
  h.beta2 = 0.95;
  h.eps = 1e-8;
  h.max_grad_norm = 100.0;  // no clipping in this case
  h.weight_decay = 0.1;

  std::vector<float> p = {1.0f, -2.0f};
  std::vector<float> g = {0.5f, 0.25f};
  AdamState st(2);
  const double lr = 1e-3;
  REQUIRE(optimizer_step(p, g, st, h, lr));
  CHECK(st.step == 1);

  for (size_t i = 0; i < 2; ++i) {
    double gi = i == 0 ? 0.5 : 0.25;
    double pi = i == 0 ? 1.0 : -2.0;
    double m = (1.0 - h.beta1) * gi;
    double v = (1.0 - h.beta2) * gi * gi;
    double mhat = m / (1.0 - h.beta1);
    double vhat = v / (1.0 - h.beta2);
    double want = pi - lr * (mhat / (std::sqrt(vhat) + h.eps) + h.weight_decay * pi);
    CHECK(p[i] == doctest::Approx(want).epsilon(1e-5));
  }
}

TEST_CASE("second-step moments use exponential averages with bias correction") {
  TrainHyper h;
  h.beta1 = 0.9;
  h.beta2 = 0.95;
  h.eps = 1e-8;
  h.max_grad_norm = 100.0;
  h.weight_decay = 0.0;

  std::vector<float> p = {0.0f};
  AdamState st(1);
  std::vector<float> g1 = {1.0f};
  optimizer_step(p, g1, st, h, 1e-2);
  std::vector<float> g2 = {-0.5f};
  optimizer_step(p, g2, st, h, 1e-2);
  CHECK(st.step == 2);

  double m = 0.9 * (0.1 * 1.0) + 0.1 * -0.5;
  double v = 0.95 * (0.05 * 1.0) + 0.05 * 0.25;
  double mhat = m / (1.0 - 0.9 * 0.9);
  double vhat = v / (1.0 - 0.95 * 0.95);
  double step1 = -1e-2 * (0.1 / (1.0 - 0.9)) / (std::sqrt((0.05) / (1.0 - 0.95)) + 1e-8);
  double want = step1 - 1e-2 * mhat / (std::sqrt(vhat) + 1e-8);
  CHECK(p[0] == doctest::Approx(want).epsilon(1e-4));
}

TEST_CASE("gradients above the norm cap are rescaled in place") {
  TrainHyper h;
  h.max_grad_norm = 5.0;
  std::vector<float> p = {0.0f, 0.0f};
  std::vector<float> g = {6.0f, 8.0f};  // norm 10 -> scale 0.5
  AdamState st(2);
  optimizer_step(p, g, st, h, 0.0);
  CHECK(g[0] == doctest::Approx(3.0f));
  CHECK(g[1] == doctest::Approx(4.0f));

  std::vector<float> small = {0.3f, 0.4f};  // norm 0.5, untouched
  std::vector<float> p2 = {0.0f, 0.0f};
  AdamState st2(2);
  optimizer_step(p2, small, st2, h, 0.0);
  CHECK(small[0] == 0.3f);
  CHECK(small[1] == 0.4f);
}

TEST_CASE("non-finite gradients reject the step and leave all state untouched") {
  TrainHyper h;
  std::vector<float> p = {1.0f, 2.0f};
  std::vector<float> g = {std::numeric_limits<float>::quiet_NaN(), 1.0f};
  AdamState st(2);
  CHECK(!optimizer_step(p, g, st, h, 1e-3));
  CHECK(st.rejected == 1);
  CHECK(st.step == 0);
  CHECK(p[0] == 1.0f);
  CHECK(p[1] == 2.0f);
  CHECK(st.m[1] == 0.0f);

  g = {std::numeric_limits<float>::infinity(), 0.0f};
  CHECK(!optimizer_step(p, g, st, h, 1e-3));
  CHECK(st.rejected == 2);
}

TEST_CASE("weight decay is decoupled: zero gradient still shrinks parameters") {
  TrainHyper h;
  h.weight_decay = 0.1;
  h.max_grad_norm = 1.0;
  std::vector<float> p = {2.0f};
  std::vector<float> g = {0.0f};
  AdamState st(1);
  optimizer_step(p, g, st, h, 0.5);
  CHECK(p[0] == doctest::Approx(2.0f - 0.5f * 0.1f * 2.0f).epsilon(1e-6));
}

TEST_CASE("buffer size mismatches are rejected") {
  TrainHyper h;
  std::vector<float> p = {1.0f};
  std::vector<float> g = {1.0f, 2.0f};
  AdamState st(1);
  CHECK_THROWS(optimizer_step(p, g, st, h, 1e-3));
}
