#include <doctest.h>

#include <cmath>
#include <numeric>
#include <string>

#include "c2s/ctsr.hpp"
#include "c2s/errors.hpp"
#include "c2s/ops.hpp"
#include "c2s/optim.hpp"
#include "c2s/tensor.hpp"
#include "test_util.hpp"

using namespace c2s;
using c2s::test::gradient_check;
using c2s::test::random_tensor;

namespace {

struct ConvShape {
  std::size_t n, cin, cout, t, k;
};

const ConvShape kConvShapes[] = {{1, 1, 1, 12, 2}, {2, 3, 4, 20, 2}, {3, 2, 3, 17, 3}};

}  // namespace

TEST_SUITE("tensor") {
  TEST_CASE("tensor handles share storage; clone and detach do not") {
    Tensor a = Tensor::full({2, 3}, 1.5f);
    Tensor b = a;
    b.mutable_data()[0] = 7.0f;
    CHECK(a.data()[0] == 7.0f);
    Tensor c = a.clone();
    c.mutable_data()[1] = -1.0f;
    CHECK(a.data()[1] == 1.5f);
    Tensor d = a.detach();
    CHECK_FALSE(d.requires_grad());
    CHECK_FALSE(d.same_storage(a));
    CHECK(a.numel() == 6);
    CHECK(shape_string(a.shape()) == "[2 x 3]");
    CHECK_THROWS_AS(Tensor({2, 2}, std::vector<float>(3)), ShapeError);
  }

  TEST_CASE("tape replays entries in exact reverse order") {
    Tape tape;
    TapeScope scope(tape);
    Tensor x = random_tensor({2, 5}, 1, -1, 1, true);
    Tensor y = tanh(scale(add(x, x), 0.5f));
    Tensor loss = sum(mul(y, y));
    REQUIRE(tape.size() == 5);
    tape.backward(loss);
    const auto& order = tape.last_backward_order();
    REQUIRE(order.size() == 5);
    for (std::size_t i = 0; i < order.size(); ++i) CHECK(order[i] == 4 - i);
    CHECK(x.has_grad());
  }

  TEST_CASE("no recording without an active tape or inside NoGradScope") {
    Tape tape;
    TapeScope scope(tape);
    Tensor x = random_tensor({3}, 2, -1, 1, true);
    {
      NoGradScope guard;
      (void)tanh(x);
    }
    CHECK(tape.size() == 0);
    (void)tanh(x.detach());
    CHECK(tape.size() == 0);
  }

  TEST_CASE("conv1d identity kernel returns the input") {
    Tensor w = Tensor::zeros({2, 2, 1});
    w.mutable_data()[0] = 1.0f;  // w[0,0,0]
    w.mutable_data()[3] = 1.0f;  // w[1,1,0]
    Tensor x = random_tensor({2, 13}, 3);
    Tensor y = conv1d(x, w, Tensor::zeros({2}), 1);
    CHECK(c2s::test::bit_identical(x, y));
  }

  TEST_CASE("conv1d dilated impulse response") {
    Tensor x = Tensor::zeros({1, 16});
    x.mutable_data()[5] = 1.0f;
    Tensor w({1, 1, 2}, {1.0f, 1.0f});
    Tensor y = conv1d(x, w, Tensor(), 4);
    for (std::size_t t = 0; t < 16; ++t) CHECK(y.data()[t] == ((t == 5 || t == 9) ? 1.0f : 0.0f));
  }

  TEST_CASE("conv1d support grows by exactly (K-1)*d in the causal direction") {
    for (int d : {1, 2, 3, 5}) {
      for (std::size_t k : {2u, 3u, 4u}) {
        Tensor x = Tensor::zeros({1, 64});
        x.mutable_data()[10] = 1.0f;
        Tensor w = Tensor::full({1, 1, k}, 1.0f);
        Tensor y = conv1d(x, w, Tensor(), d);
        std::size_t first = 64, last = 0;
        for (std::size_t t = 0; t < 64; ++t) {
          if (y.data()[t] != 0.0f) {
            first = std::min(first, t);
            last = t;
          }
        }
        CHECK(first == 10);
        CHECK(last - first == (k - 1) * static_cast<std::size_t>(d));
      }
    }
  }

  TEST_CASE("conv1d errors") {
    Tensor x = random_tensor({3, 10}, 4);
    CHECK_THROWS_AS(conv1d(x, random_tensor({2, 2, 2}, 5), Tensor(), 1), ConfigError);
    CHECK_THROWS_AS(conv1d(x, random_tensor({2, 3, 2}, 5), Tensor(), 0), ConfigError);
  }

  TEST_CASE("conv1d gradients at dilations 1, 2, 4") {
    for (int d : {1, 2, 4}) {
      for (const auto& s : kConvShapes) {
        CAPTURE(d);
        CAPTURE(s.t);
        const double err = gradient_check(
            [d](const std::vector<Tensor>& in) { return conv1d(in[0], in[1], in[2], d); },
            {random_tensor({s.n, s.cin, s.t}, 10 + s.t), random_tensor({s.cout, s.cin, s.k}, 20 + s.t),
             random_tensor({s.cout}, 30 + s.t)});
        CHECK(err < 1e-3);
      }
    }
  }

  TEST_CASE("gated unit: zero input is zero; saturated gate leaves the tanh branch") {
    Tensor wf = random_tensor({4, 3, 2}, 6), wg = random_tensor({4, 3, 2}, 7);
    Tensor zero_bias = Tensor::zeros({4});
    Tensor z = gated_unit(Tensor::zeros({3, 9}), wf, zero_bias, wg, zero_bias, 2);
    for (float v : z.data()) CHECK(v == 0.0f);

    Tensor x = random_tensor({3, 30}, 8);
    Tensor y = gated_unit(x, wf, zero_bias, Tensor::zeros({4, 3, 2}), Tensor::full({4}, 10.0f), 2);
    Tensor t = tanh(conv1d(x, wf, zero_bias, 2));
    float worst = 0.0f;
    for (std::size_t i = 0; i < y.numel(); ++i) worst = std::max(worst, std::abs(y.data()[i] - t.data()[i]));
    CHECK(worst < 1e-3f);
  }

  TEST_CASE("gated unit gradients") {
    for (const auto& s : kConvShapes) {
      const double err = gradient_check(
          [](const std::vector<Tensor>& in) { return gated_unit(in[0], in[1], in[2], in[3], in[4], 2); },
          {random_tensor({s.n, s.cin, s.t}, 40 + s.t), random_tensor({s.cout, s.cin, s.k}, 41),
           random_tensor({s.cout}, 42), random_tensor({s.cout, s.cin, s.k}, 43), random_tensor({s.cout}, 44)});
      CHECK(err < 1e-3);
    }
  }

  TEST_CASE("batchnorm train statistics, constant channel and eval determinism") {
    auto state = BatchNormState::create(3);
    Tensor x = random_tensor({4, 3, 25}, 9, -3.0f, 5.0f);
    auto xd = x.mutable_data();
    for (std::size_t n = 0; n < 4; ++n)
      for (std::size_t t = 0; t < 25; ++t) xd[(n * 3 + 2) * 25 + t] = 4.25f;  // channel 2 constant
    Tensor y = batchnorm1d(x, state, Mode::train);
    for (std::size_t c = 0; c < 3; ++c) {
      double m = 0.0, v = 0.0;
      for (std::size_t n = 0; n < 4; ++n)
        for (std::size_t t = 0; t < 25; ++t) m += y.data()[(n * 3 + c) * 25 + t];
      m /= 100.0;
      for (std::size_t n = 0; n < 4; ++n)
        for (std::size_t t = 0; t < 25; ++t) v += std::pow(y.data()[(n * 3 + c) * 25 + t] - m, 2);
      v /= 100.0;
      CHECK(std::abs(m) < 1e-5);
      if (c == 2) {
        CHECK(v == 0.0);
      } else {
        CHECK(std::abs(v - 1.0) < 1e-4);
      }
    }
    // Running statistics move by (1 - momentum) toward the batch statistics.
    CHECK(state.running_mean[2] == doctest::Approx(0.1 * 4.25).epsilon(1e-5));
    Tensor e1 = batchnorm1d(x, state, Mode::eval);
    Tensor e2 = batchnorm1d(x, state, Mode::eval);
    CHECK(c2s::test::bit_identical(e1, e2));
  }

  TEST_CASE("batchnorm rejects a single value per channel in train mode") {
    auto state = BatchNormState::create(2);
    CHECK_THROWS_AS(batchnorm1d(Tensor::zeros({1, 2, 1}), state, Mode::train), NumericError);
    CHECK_NOTHROW(batchnorm1d(Tensor::zeros({1, 2, 1}), state, Mode::eval));
  }

  TEST_CASE("batchnorm gradients in both modes") {
    const Shape shapes[] = {{2, 2, 5}, {3, 4, 7}, {1, 3, 12}};
    for (const auto& shape : shapes) {
      for (Mode mode : {Mode::train, Mode::eval}) {
        auto state = BatchNormState::create(shape[1]);
        state.running_mean.assign(shape[1], 0.3f);
        state.running_var.assign(shape[1], 1.7f);
        state.gamma = random_tensor({shape[1]}, 50, 0.5f, 1.5f);
        state.beta = random_tensor({shape[1]}, 51);
        const double err = gradient_check(
            [&state, mode](const std::vector<Tensor>& in) {
              state.gamma = in[1];
              state.beta = in[2];
              return batchnorm1d(in[0], state, mode);
            },
            {random_tensor(shape, 52 + shape[2]), state.gamma, state.beta}, 99, 5e-3);
        CHECK(err < 1e-3);
      }
    }
  }

  TEST_CASE("dropout: identities, statistics, reproducible masks, rate bounds") {
    Tensor x = random_tensor({100000}, 11, 0.5f, 1.5f);
    CHECK(c2s::test::bit_identical(dropout(x, 0.0f, Mode::train, 1), x));
    CHECK(c2s::test::bit_identical(dropout(x, 0.0f, Mode::eval, 1), x));
    CHECK(c2s::test::bit_identical(dropout(x, 0.5f, Mode::eval, 1), x));
    Tensor y = dropout(x, 0.5f, Mode::train, 123);
    std::size_t survivors = 0;
    double in_mean = 0.0, out_mean = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) {
      if (y.data()[i] != 0.0f) {
        ++survivors;
        CHECK(y.data()[i] == x.data()[i] * 2.0f);
      }
      in_mean += x.data()[i];
      out_mean += y.data()[i];
    }
    CHECK(std::abs(survivors / 1e5 - 0.5) < 0.01);
    CHECK(std::abs(out_mean / in_mean - 1.0) < 0.02);
    CHECK(c2s::test::bit_identical(dropout(x, 0.5f, Mode::train, 123), y));
    CHECK_FALSE(c2s::test::bit_identical(dropout(x, 0.5f, Mode::train, 124), y));
    CHECK_THROWS_AS(dropout(x, 1.0f, Mode::train, 1), ConfigError);
    CHECK_THROWS_AS(dropout(x, 1.5f, Mode::eval, 1), ConfigError);
  }

  TEST_CASE("dropout gradients (eval, and train with a fixed mask)") {
    const Shape shapes[] = {{7}, {3, 11}, {2, 3, 5}};
    for (const auto& shape : shapes) {
      for (Mode mode : {Mode::eval, Mode::train}) {
        const double err = gradient_check(
            [mode](const std::vector<Tensor>& in) { return dropout(in[0], 0.3f, mode, 77); },
            {random_tensor(shape, 60 + shape.size())});
        CHECK(err < 1e-3);
      }
    }
  }

  TEST_CASE("mse loss values, gradient formula and shape errors") {
    CHECK(mse_loss(Tensor({2}, {1, 2}), Tensor({2}, {1, 2})).item() == 0.0f);
    CHECK(mse_loss(Tensor({2}, {1, 2}), Tensor({2}, {0, 0})).item() == doctest::Approx(2.5));
    Tape tape;
    TapeScope scope(tape);
    Tensor p = random_tensor({3, 4}, 12, -1, 1, true);
    Tensor t = random_tensor({3, 4}, 13);
    tape.backward(mse_loss(p, t));
    for (std::size_t i = 0; i < 12; ++i) {
      CHECK(p.grad()[i] == doctest::Approx(2.0 * (p.data()[i] - t.data()[i]) / 12.0).epsilon(1e-6));
    }
    CHECK_THROWS_AS(mse_loss(Tensor::zeros({2}), Tensor::zeros({3})), ShapeError);
  }

  TEST_CASE("mse gradients in both arguments") {
    const Shape shapes[] = {{5}, {2, 6}, {2, 3, 4}};
    for (const auto& shape : shapes) {
      const double err =
          gradient_check([](const std::vector<Tensor>& in) { return mse_loss(in[0], in[1]); },
                         {random_tensor(shape, 70 + shape.size()), random_tensor(shape, 80 + shape.size())});
      CHECK(err < 1e-3);
    }
  }

  TEST_CASE("elementwise op gradients") {
    const Shape shapes[] = {{6}, {3, 5}, {2, 2, 4}};
    for (const auto& shape : shapes) {
      CHECK(gradient_check([](const auto& in) { return tanh(in[0]); }, {random_tensor(shape, 1)}) < 1e-3);
      CHECK(gradient_check([](const auto& in) { return sigmoid(in[0]); }, {random_tensor(shape, 2)}) < 1e-3);
      CHECK(gradient_check([](const auto& in) { return mul(in[0], in[1]); },
                           {random_tensor(shape, 3), random_tensor(shape, 4)}) < 1e-3);
      CHECK(gradient_check([](const auto& in) { return add(in[0], in[1]); },
                           {random_tensor(shape, 5), random_tensor(shape, 6)}) < 1e-3);
      // Inputs kept away from the kink.
      CHECK(gradient_check([](const auto& in) { return relu(in[0]); }, {random_tensor(shape, 7, 0.1f, 1.0f)}) <
            1e-3);
      if (shape.size() >= 2) {
        CHECK(gradient_check([](const auto& in) { return slice_time(in[0], 1, 2); }, {random_tensor(shape, 8)}) <
              1e-3);
      }
    }
  }

  TEST_CASE("adam: zero gradient, closed-form first step, quadratic bowl, missing gradient") {
    std::vector<NamedParameter> params{{"w", Tensor::full({3}, 2.0f, true)}};
    auto state = AdamState::create(params, {.learning_rate = 0.1f});
    for (int i = 0; i < 5; ++i) {
      for (auto& g : params[0].tensor.mutable_grad()) g = 0.0f;
      adam_step(params, state);
    }
    for (float v : params[0].tensor.data()) CHECK(v == 2.0f);
    CHECK(state.step == 5);

    std::vector<NamedParameter> s{{"s", Tensor::scalar(0.0f, true)}};
    auto st = AdamState::create(s, {.learning_rate = 0.1f});
    s[0].tensor.mutable_grad()[0] = 1.0f;
    adam_step(s, st);
    CHECK(s[0].tensor.item() == doctest::Approx(-0.1).epsilon(1e-6));

    std::vector<NamedParameter> bowl{{"w", Tensor::scalar(5.0f, true)}};
    auto sb = AdamState::create(bowl, {.learning_rate = 0.05f});
    int steps = 0;
    while (std::abs(bowl[0].tensor.item()) >= 0.5f && steps < 500) {
      bowl[0].tensor.mutable_grad()[0] = 2.0f * bowl[0].tensor.item();
      adam_step(bowl, sb);
      ++steps;
    }
    CHECK(std::abs(bowl[0].tensor.item()) < 0.5f);

    std::vector<NamedParameter> missing{{"layer.bias", Tensor::zeros({2}, true)}};
    auto sm = AdamState::create(missing);
    try {
      adam_step(missing, sm);
      FAIL("expected an error");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("layer.bias") != std::string::npos);
    }
  }

  TEST_CASE("ctsr round trip and malformed headers") {
    Tensor t = random_tensor({2, 3, 4}, 14);
    auto bytes = encode_ctsr(t);
    CHECK(bytes.size() == 7 + 3 * 8 + 24 * 4);
    CHECK(c2s::test::bit_identical(decode_ctsr(bytes), t));
    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(decode_ctsr(bad), FormatError);
    auto truncated = bytes;
    truncated.resize(bytes.size() - 1);
    CHECK_THROWS_AS(decode_ctsr(truncated), FormatError);
    auto dir = c2s::test::temp_dir("ctsr");
    write_ctsr(dir / "t.ctsr", t);
    CHECK(c2s::test::bit_identical(read_ctsr(dir / "t.ctsr"), t));
    CHECK_THROWS_AS(read_ctsr(dir / "missing.ctsr"), IoError);
  }
}
