#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "fd_oracle.hpp"
#include "navgrpo/common/errors.hpp"
#include "navgrpo/common/rng.hpp"
#include "navgrpo/diffcore/adam.hpp"
#include "navgrpo/diffcore/checkpoint.hpp"
#include "navgrpo/diffcore/layers.hpp"
#include "navgrpo/diffcore/tape.hpp"

using namespace navgrpo;
using namespace navgrpo::diff;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Tensor t = Tensor::matrix(r, c);
  for (auto& v : t.storage()) v = rng.normal();
  return t;
}

}  // namespace

TEST_CASE("tensor shape must match data") {
  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<double>(5)), ConfigError);
  Tensor t({2, 3, 4});
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 12);
}

TEST_CASE("linear forward closed forms") {
  ParamStore store;
  store.add("w", LayerRole::Head, -1, Tensor({2, 2}, {1, 0, 0, 1}));
  store.add("b", LayerRole::Head, -1, Tensor({2}, {0, 0}));
  store.add("w0", LayerRole::Head, -1, Tensor({2, 2}, 0.0));
  store.add("b12", LayerRole::Head, -1, Tensor({2}, {1, 2}));
  Tape tape(false);
  Var x = tape.constant(Tensor({1, 2}, {3, -1}));

  Var y = ops::linear(x, tape.parameter(store, "w"), tape.parameter(store, "b"));
  CHECK(y.value()[0] == 3.0);
  CHECK(y.value()[1] == -1.0);

  Var z = ops::linear(x, tape.parameter(store, "w0"), tape.parameter(store, "b12"));
  CHECK(z.value()[0] == 1.0);
  CHECK(z.value()[1] == 2.0);
}

TEST_CASE("linear shape mismatch is a configuration error") {
  ParamStore store;
  store.add("w", LayerRole::Head, -1, Tensor::matrix(3, 2));
  store.add("b", LayerRole::Head, -1, Tensor({2}));
  Tape tape;
  Var x = tape.constant(Tensor::matrix(1, 2));
  CHECK_THROWS_AS(ops::linear(x, tape.parameter(store, "w"), tape.parameter(store, "b")),
                  ConfigError);
}

TEST_CASE("linear gradients match central differences") {
  Rng rng(7);
  ParamStore store;
  store.add("w", LayerRole::Head, -1, random_matrix(5, 3, rng));
  store.add("b", LayerRole::Head, -1, random_matrix(1, 3, rng).reshaped({3}));
  const Tensor x = random_matrix(4, 5, rng);
  const Tensor c = random_matrix(4, 3, rng);

  auto loss_on = [&](Tape& tape, const ParamStore& s) {
    Var y = ops::linear(tape.constant(x), tape.parameter(s, "w"), tape.parameter(s, "b"));
    return ops::sum(ops::mul(y, tape.constant(c)));
  };
  Tape tape;
  Gradients g = tape.backward(loss_on(tape, store));
  auto f = [&](const ParamStore& s) {
    Tape t(false);
    return loss_on(t, s).value()[0];
  };
  auto rep = testing::check_gradients(store, g, f, 1e-5, 1e-6);
  CHECK(rep.checked == 18);
  CHECK_MESSAGE(rep.failed == 0, rep.worst_name, " rel ", rep.worst_rel);
}

TEST_CASE("gelu values and gradient") {
  Tape tape(false);
  Var z = ops::gelu(tape.constant(Tensor({3}, {0.0, 6.0, 9.0})));
  CHECK(z.value()[0] == 0.0);
  CHECK(std::abs(z.value()[1] - 6.0) < 1e-6);
  CHECK(std::abs(z.value()[2] - 9.0) < 1e-6);

  Rng rng(11);
  ParamStore store;
  Tensor pts({20});
  for (auto& v : pts.storage()) v = rng.uniform(-4.0, 4.0);
  store.add("x", LayerRole::Encoder, -1, pts);
  auto loss_on = [](Tape& t, const ParamStore& s) { return ops::sum(ops::gelu(t.parameter(s, "x"))); };
  Tape gt;
  Gradients g = gt.backward(loss_on(gt, store));
  auto f = [&](const ParamStore& s) {
    Tape t(false);
    return loss_on(t, s).value()[0];
  };
  // Each entry only affects its own term, so this is a per-point derivative check.
  auto rep = testing::check_gradients(store, g, f, 1e-5, 1e-6);
  CHECK(rep.checked == 20);
  CHECK_MESSAGE(rep.failed == 0, rep.worst_name, " rel ", rep.worst_rel);
}

TEST_CASE("composite op gradients match central differences") {
  Rng rng(3);
  ParamStore store;
  store.add("a", LayerRole::Decoder, 0, random_matrix(6, 3, rng));
  store.add("b", LayerRole::Decoder, 0, random_matrix(6, 3, rng));
  store.add("c", LayerRole::Decoder, 1, random_matrix(2, 4, rng));
  const std::vector<std::size_t> gather = {0, 1, 1, 0, 1, 0};
  const std::vector<std::size_t> seg = {0, 0, 1, 1, 2, 2};
  const std::vector<double> factors = {0.5, -1.0, 2.0, 1.5, -0.3, 0.7};

  auto loss_on = [&](Tape& t, const ParamStore& s) {
    Var a = t.parameter(s, "a");
    Var b = t.parameter(s, "b");
    Var c = ops::gather_rows(t.parameter(s, "c"), gather);
    const Var parts[] = {ops::sub(a, b), c};
    Var cat = ops::concat_cols(parts);
    Var sq = ops::square(ops::scale_rows(cat, factors));
    Var rs = ops::row_sum(ops::mul(sq, ops::scale(cat, 0.1)));
    Var seg_sum = ops::segment_sum(rs, seg, 3);
    Var e = ops::exp(ops::scale(seg_sum, 0.05));
    Var cl = ops::clamp(e, 0.8, 1.2);
    Var m = ops::minimum(ops::mul(e, e), ops::add_scalar(cl, 0.05));
    return ops::add(ops::mean(m), ops::mean(ops::gelu(a)));
  };
  Tape tape;
  Gradients g = tape.backward(loss_on(tape, store));
  auto f = [&](const ParamStore& s) {
    Tape t(false);
    return loss_on(t, s).value()[0];
  };
  auto rep = testing::check_gradients(store, g, f, 1e-5, 1e-5, 1e-4);
  CHECK_MESSAGE(rep.failed == 0, rep.worst_name, " rel ", rep.worst_rel);
}

TEST_CASE("sinusoidal embedding") {
  auto e0 = sinusoidal_embed(0, 16);
  for (std::size_t i = 0; i < 16; i += 2) {
    CHECK(e0[i] == 0.0);
    CHECK(e0[i + 1] == 1.0);
  }
  CHECK(sinusoidal_embed(3, 16) == sinusoidal_embed(3, 16));
  CHECK_THROWS_AS(sinusoidal_embed(1, 15), ConfigError);

  std::vector<std::vector<double>> all;
  for (int k = 0; k <= 10; ++k) all.push_back(sinusoidal_embed(k, 16));
  for (std::size_t i = 0; i < all.size(); ++i) {
    for (std::size_t j = i + 1; j < all.size(); ++j) {
      double d = 0;
      for (std::size_t c = 0; c < 16; ++c) d += (all[i][c] - all[j][c]) * (all[i][c] - all[j][c]);
      CHECK(std::sqrt(d) > 1e-6);
    }
  }
}

TEST_CASE("backward contracts") {
  ParamStore store;
  store.add("w", LayerRole::Head, -1, Tensor({2}, {1.0, 2.0}));
  store.add("frozen", LayerRole::Encoder, -1, Tensor({2}, {3.0, 4.0}));
  store.at("frozen").trainable = false;

  SUBCASE("constant loss gives zero gradients") {
    Tape tape;
    tape.parameter(store, "w");
    Gradients g = tape.backward(tape.constant(Tensor::scalar(5.0)));
    REQUIRE(g.contains("w"));
    CHECK(g.at("w")[0] == 0.0);
    CHECK(g.at("w")[1] == 0.0);
  }
  SUBCASE("frozen parameters get no gradient") {
    Tape tape;
    Var loss = ops::sum(ops::mul(tape.parameter(store, "w"), tape.parameter(store, "frozen")));
    Gradients g = tape.backward(loss);
    CHECK(g.size() == 1);
    CHECK_FALSE(g.contains("frozen"));
    CHECK(g.at("w")[0] == 3.0);
    CHECK(g.at("w")[1] == 4.0);
  }
  SUBCASE("loss from another tape is a usage error") {
    Tape a;
    Tape b;
    Var loss = ops::sum(a.parameter(store, "w"));
    CHECK_THROWS_AS(b.backward(loss), UsageError);
  }
  SUBCASE("non-scalar loss is a usage error") {
    Tape a;
    CHECK_THROWS_AS(a.backward(a.parameter(store, "w")), UsageError);
  }
}

TEST_CASE("adam step") {
  SUBCASE("zero gradients leave parameters bit-identical") {
    Rng rng(1);
    ParamStore store;
    store.add("w", LayerRole::Head, -1, random_matrix(3, 3, rng));
    const auto before = store.checksum();
    Adam adam;
    adam.step(store, Gradients{{"w", Tensor({3, 3}, 0.0)}}, 1e-3);
    CHECK(store.checksum() == before);
  }
  SUBCASE("descent on w^2") {
    ParamStore store;
    store.add("w", LayerRole::Head, -1, Tensor({1}, {1.0}));
    Tape tape;
    Var w = tape.parameter(store, "w");
    Gradients g = tape.backward(ops::sum(ops::square(w)));
    Adam adam;
    adam.step(store, g, 1e-2);
    CHECK(store.at("w").value[0] < 1.0);
    CHECK(store.at("w").value[0] > 0.0);
  }
  SUBCASE("name mismatches are usage errors") {
    ParamStore store;
    store.add("w", LayerRole::Head, -1, Tensor({1}, {1.0}));
    store.add("f", LayerRole::Encoder, -1, Tensor({1}, {1.0}));
    store.at("f").trainable = false;
    Adam adam;
    CHECK_THROWS_AS(adam.step(store, Gradients{}, 1e-3), UsageError);
    CHECK_THROWS_AS(adam.step(store, Gradients{{"w", Tensor({1})}, {"f", Tensor({1})}}, 1e-3),
                    UsageError);
    CHECK_THROWS_AS(adam.step(store, Gradients{{"w", Tensor({1})}, {"zz", Tensor({1})}}, 1e-3),
                    UsageError);
  }
  SUBCASE("frozen parameters survive 100 steps bit-identical") {
    Rng rng(5);
    ParamStore store;
    DenseLayer frozen = DenseLayer::create(store, "dec0", LayerRole::Decoder, 0, 4, 4, rng);
    DenseLayer live = DenseLayer::create(store, "dec1", LayerRole::Decoder, 1, 4, 2, rng);
    for (auto& p : store) p.trainable = p.block == 1;
    auto frozen_sum = [](const Parameter& p) { return p.block == 0; };
    const auto before = store.checksum(frozen_sum);
    const Tensor x = random_matrix(8, 4, rng);
    Adam adam;
    for (int i = 0; i < 100; ++i) {
      Tape tape;
      Var h = ops::gelu(frozen(tape, store, tape.constant(x)));
      Var loss = ops::mean(ops::square(live(tape, store, h)));
      adam.step(store, tape.backward(loss), 1e-2);
    }
    CHECK(store.checksum(frozen_sum) == before);
  }
}

TEST_CASE("checkpoint round trip is bit-exact") {
  Rng rng(9);
  Checkpoint ckpt;
  DenseLayer::create(ckpt.params, "enc", LayerRole::Encoder, -1, 3, 4, rng);
  DenseLayer::create(ckpt.params, "head", LayerRole::Head, -1, 4, 2, rng);
  ckpt.params.at("enc.weight").trainable = false;
  ckpt.params.at("enc.bias").trainable = false;
  ckpt.config_hash = 0x1234;
  ckpt.model_hash = 0x5678;
  ckpt.metadata = R"({"note":"x"})";
  {
    Tape tape;
    const DenseLayer head{ckpt.params.find("head.weight").value(), ckpt.params.find("head.bias").value()};
    Var y = head(tape, ckpt.params, tape.constant(random_matrix(2, 4, rng)));
    ckpt.optimizer.step(ckpt.params, tape.backward(ops::sum(ops::square(y))), 1e-3);
  }
  const auto bytes = encode_checkpoint(ckpt);
  const Checkpoint back = decode_checkpoint(bytes);
  CHECK(encode_checkpoint(back) == bytes);
  CHECK(back.params.checksum() == ckpt.params.checksum());
  CHECK(back.optimizer == ckpt.optimizer);
  CHECK_FALSE(back.params.at("enc.weight").trainable);

  auto corrupt = bytes;
  corrupt[corrupt.size() / 2] ^= 0x1;
  CHECK_THROWS_AS(decode_checkpoint(corrupt), IoError);

  const auto path = (std::filesystem::temp_directory_path() / "navgrpo_ckpt_test.bin").string();
  save_checkpoint(path, ckpt);
  CHECK(encode_checkpoint(load_checkpoint(path)) == bytes);
  std::filesystem::remove(path);
}
