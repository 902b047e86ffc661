#include <doctest.h>

#include "model_helpers.hpp"
#include "redr/toy.hpp"

using namespace testing_helpers;

TEST_CASE("encode_bilstm shapes, zero weights and a single token") {
  std::mt19937_64 rng(1);
  BiLstm lstm("enc", 6, 8, 2);
  randomize(lstm, rng);
  Tape t;
  const Var emb = t.constant(random_matrix(6, 10, rng));
  const std::vector<int> ids = {3, 4, 5, 9, 2};
  CHECK(encode_bilstm(ids, emb, lstm).rows() == 8);
  CHECK(encode_bilstm(ids, emb, lstm).cols() == 5);

  const std::vector<int> one = {4};
  const Var single = encode_bilstm(one, emb, lstm);
  CHECK(single.cols() == 1);
  // With one position both directions consume exactly that token from zero state.
  BiLstm one_layer("one", 6, 8, 1);
  randomize(one_layer, rng);
  one_layer.backward[0].weight.value = one_layer.forward[0].weight.value;
  one_layer.backward[0].bias.value = one_layer.forward[0].bias.value;
  const Mat u = encode_bilstm(one, emb, one_layer).value();
  CHECK(u.topRows(4) == u.bottomRows(4));

  zero(lstm);
  CHECK(encode_bilstm(ids, emb, lstm).value().isZero(0.0));
}

TEST_CASE("reversing the input swaps forward and backward halves") {
  std::mt19937_64 rng(4);
  BiLstm lstm("enc", 5, 6, 1);
  randomize(lstm, rng);
  lstm.backward[0].weight.value = lstm.forward[0].weight.value;
  lstm.backward[0].bias.value = lstm.forward[0].bias.value;
  Tape t;
  const Var emb = t.constant(random_matrix(5, 8, rng));
  const std::vector<int> ids = {1, 7, 3, 3, 6};
  const std::vector<int> rev(ids.rbegin(), ids.rend());
  const Mat a = encode_bilstm(ids, emb, lstm).value();
  const Mat b = encode_bilstm(rev, emb, lstm).value();
  const auto n = a.cols();
  for (Eigen::Index i = 0; i < n; ++i) {
    CHECK((a.col(i).head(3) - b.col(n - 1 - i).tail(3)).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((a.col(i).tail(3) - b.col(n - 1 - i).head(3)).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("coattend shapes") {
  std::mt19937_64 rng(2);
  Tape t;
  const auto co = coattend(t.constant(random_matrix(4, 3, rng)), t.constant(random_matrix(4, 5, rng)));
  CHECK(co.alignment.rows() == 3);
  CHECK(co.alignment.cols() == 5);
  CHECK(co.history_summary.rows() == 4);
  CHECK(co.history_summary.cols() == 5);
  CHECK(co.codependent.rows() == 8);
  CHECK(co.codependent.cols() == 3);
  CHECK_THROWS_AS(coattend(t.constant(random_matrix(4, 3, rng)), t.constant(random_matrix(5, 5, rng))), ShapeError);
}

TEST_CASE("coattend with a zero rationale") {
  std::mt19937_64 rng(3);
  Tape t;
  const Mat c = random_matrix(4, 5, rng);
  const auto co = coattend(t.constant(Mat::Zero(4, 3)), t.constant(c));
  CHECK(co.alignment.value().isZero(0.0));
  CHECK((co.history_weights.value().array() - 1.0 / 3).abs().maxCoeff() < 1e-15);
  CHECK((co.rationale_weights.value().array() - 1.0 / 5).abs().maxCoeff() < 1e-15);
  CHECK(co.history_summary.value().isZero(0.0));
  const Eigen::VectorXd mean_c = c.rowwise().mean();
  for (Eigen::Index j = 0; j < 3; ++j) {
    CHECK((co.codependent.value().col(j).head(4) - mean_c).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(co.codependent.value().col(j).tail(4).isZero(0.0));
  }
}

TEST_CASE("coattend with one position on each side") {
  std::mt19937_64 rng(8);
  Tape t;
  const Mat r = random_matrix(4, 1, rng);
  const Mat c = random_matrix(4, 1, rng);
  const auto co = coattend(t.constant(r), t.constant(c));
  CHECK(co.history_weights.scalar() == 1.0);
  CHECK(co.rationale_weights.scalar() == 1.0);
  CHECK(co.history_summary.value() == r);
  Mat g(8, 1);
  g << c, r;
  CHECK(co.codependent.value() == g);
}

TEST_CASE("integrate shapes, zero weights and order sensitivity") {
  std::mt19937_64 rng(5);
  BiLstm integ("integ", 24, 8, 1);
  randomize(integ, rng);
  Tape t;
  const Mat g = random_matrix(16, 4, rng);
  const Mat r = random_matrix(8, 4, rng);
  const Mat u = integrate(t.constant(g), t.constant(r), integ).value();
  CHECK(u.rows() == 8);
  CHECK(u.cols() == 4);
  CHECK(integrate(t.constant(g.leftCols(1)), t.constant(r.leftCols(1)), integ).cols() == 1);

  Eigen::PermutationMatrix<Eigen::Dynamic> perm(4);
  perm.indices() << 2, 0, 3, 1;
  const Mat up = integrate(t.constant(g * perm), t.constant(r * perm), integ).value();
  CHECK((up - u * perm).cwiseAbs().maxCoeff() > 1e-6);

  zero(integ);
  CHECK(integrate(t.constant(g), t.constant(r), integ).value().isZero(0.0));
}

TEST_CASE("reason_layer is the U0 pipeline applied to the previous encoding") {
  std::mt19937_64 rng(6);
  BiLstm integ("integ", 24, 8, 1);
  randomize(integ, rng);
  Tape t;
  const Var prev = t.constant(random_matrix(8, 4, rng));
  const Var hist = t.constant(random_matrix(8, 6, rng));
  const auto out = reason_layer(prev, hist, integ);
  const Var direct = integrate(coattend(prev, hist).codependent, prev, integ);
  CHECK(out.candidate.value() == direct.value());
  CHECK(out.candidate.rows() == 8);
  CHECK(out.candidate.cols() == 4);
  CHECK(out.codependent.rows() == 16);
  CHECK(out.codependent.cols() == 4);
}

TEST_CASE("reason_layer with a zero history matches the recorded forward pass") {
  std::mt19937_64 rng(12);
  BiLstm integ("integ", 6, 2, 1);
  randomize(integ, rng);
  Tape t;
  const Var prev = t.constant(random_matrix(2, 3, rng));
  const Mat u = reason_layer(prev, t.constant(Mat::Zero(2, 2)), integ).candidate.value();
  // Golden values recorded from a seeded run.
  Mat golden(2, 3);
  golden << -0.087760470080577274, -0.051648416892967064, -0.050383866822884704, -0.06921808820256152,
      -0.11534081914316138, -0.081659495275874475;
  CHECK((u - golden).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gate_combine special cases") {
  std::mt19937_64 rng(7);
  DecisionGate gate("gate", 8);
  Tape t;
  const Var prev = t.constant(random_matrix(8, 4, rng));
  const Var cand = t.constant(random_matrix(8, 4, rng));
  const Var g = t.constant(random_matrix(16, 4, rng));
  const Var r = t.constant(random_matrix(8, 4, rng));

  zero(gate);
  auto out = gate_combine(prev, cand, g, r, gate);
  CHECK((out.gate.value().array() - 0.5).abs().maxCoeff() == 0.0);
  CHECK((out.next.value() - 0.5 * (prev.value() + cand.value())).cwiseAbs().maxCoeff() < 1e-15);

  gate.b.value(0, 0) = 50.0;
  out = gate_combine(prev, cand, g, r, gate);
  CHECK((out.next.value() - prev.value()).cwiseAbs().maxCoeff() < 1e-9);

  randomize(gate, rng, 2.0);
  out = gate_combine(prev, prev, g, r, gate);
  CHECK((out.next.value() - prev.value()).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(out.gate.value().minCoeff() > 0.0);
  CHECK(out.gate.value().maxCoeff() < 1.0);
}

TEST_CASE("gate output lies between the two candidates") {
  std::mt19937_64 rng(9);
  DecisionGate gate("gate", 6);
  for (int trial = 0; trial < 50; ++trial) {
    randomize(gate, rng, 2.0);
    Tape t;
    const Var prev = t.constant(random_matrix(6, 5, rng));
    const Var cand = t.constant(random_matrix(6, 5, rng));
    const auto out = gate_combine(prev, cand, t.constant(random_matrix(12, 5, rng)), t.constant(random_matrix(6, 5, rng)),
                                  gate);
    const Mat lo = prev.value().cwiseMin(cand.value());
    const Mat hi = prev.value().cwiseMax(cand.value());
    CHECK(((out.next.value() - lo).minCoeff() >= -1e-15));
    CHECK(((hi - out.next.value()).minCoeff() >= -1e-15));
  }
}

TEST_CASE("dynamic_reason with one layer is exactly U0") {
  std::mt19937_64 rng(10);
  EncoderParams params(small_config(8, 1, 1));
  randomize(params, rng);
  Tape t;
  const Var r = t.constant(random_matrix(8, 4, rng));
  const Var c = t.constant(random_matrix(8, 6, rng));
  const ReasoningState s = dynamic_reason(r, c, 1, params);
  const Var u0 = integrate(coattend(r, c).codependent, r, params.integration);
  CHECK(s.layers.size() == 1);
  CHECK(s.gates.empty());
  CHECK(s.output().value() == u0.value());
}

TEST_CASE("dynamic_reason depth, gates and the no-gate ablation") {
  std::mt19937_64 rng(11);
  EncoderParams params(small_config(8, 1, 3));
  randomize(params, rng);
  Tape t;
  const Var r = t.constant(random_matrix(8, 4, rng));
  const Var c = t.constant(random_matrix(8, 6, rng));
  const ReasoningState gated = dynamic_reason(r, c, 3, params);
  CHECK(gated.layers.size() == 3);
  CHECK(gated.gates.size() == 2);
  CHECK(gated.output().rows() == 8);
  CHECK(gated.output().cols() == 4);
  const ReasoningState plain = dynamic_reason(r, c, 3, params, false);
  CHECK(plain.gates.empty());
  CHECK(plain.output().value() == plain.candidates.back().value());
  CHECK_THROWS_AS(dynamic_reason(r, c, 0, params), ConfigError);
}

TEST_CASE("every trainable tensor receives gradient through the full loss") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto vocab = toy::toy_vocabulary(20);
    ReDRModel net(toy::toy_config(), vocab.size(), seed);
    const auto inst = toy::toy_instance(seed + 50, vocab);
    for (Param* p : net.parameters()) p->zero_grad();
    Tape t;
    t.backward(net.sequence_nll(t, inst.inputs, inst.targets).nll);
    for (const Param* p : net.parameters()) {
      INFO(p->name);
      CHECK(p->grad.norm() > 0.0);
    }
  }
}
