#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "vqasem/dense_net.hpp"
#include "vqasem/grad_check.hpp"
#include "vqasem/optimizer.hpp"
#include "vqasem/toy_vqa_model.hpp"

using namespace vqasem;

namespace {

ToyVqaModel small_model(std::uint64_t seed = 9) {
  const TokenVocab vocab = TokenVocab::from_tokens({"what", "color", "is", "the", "car", "dog"});
  ModelDims dims;
  dims.question_dim = 8;
  dims.image_feat_dim = 4;
  dims.image_dim = 6;
  dims.hidden_dim = 10;
  return ToyVqaModel(vocab, 5, dims, seed);
}

std::vector<double> random_feat(int n, Rng& rng) {
  std::vector<double> f(n);
  for (double& v : f) v = rng.gaussian();
  return f;
}

std::vector<double> flatten_grads(const std::vector<ParamBlock*>& blocks) {
  std::vector<double> out;
  for (const ParamBlock* b : blocks) {
    out.insert(out.end(), b->grad.data.begin(), b->grad.data.end());
  }
  return out;
}

}  // namespace

TEST_CASE("zero parameters produce zero logits") {
  ToyVqaModel model = small_model();
  for (ParamBlock* b : model.param_blocks()) b->value.fill(0.0);
  Rng rng(1);
  const Prediction pred = model.forward(random_feat(4, rng), {"what", "color"});
  for (double v : pred.logits) CHECK(v == 0.0);
}

TEST_CASE("forward is deterministic and permutation-invariant over tokens") {
  ToyVqaModel model = small_model();
  Rng rng(2);
  const std::vector<double> feat = random_feat(4, rng);

  const Prediction a = model.forward(feat, {"what", "color", "is", "the", "car"});
  const Prediction b = model.forward(feat, {"what", "color", "is", "the", "car"});
  CHECK(a.logits == b.logits);

  const Prediction c = model.forward(feat, {"car", "the", "is", "color", "what"});
  CHECK(a.logits == c.logits);  // mean pooling sums in id order

  // unknown tokens share the reserved row
  const Prediction u1 = model.forward(feat, {"zzz"});
  const Prediction u2 = model.forward(feat, {"yyy"});
  CHECK(u1.logits == u2.logits);
}

TEST_CASE("feature dimension mismatch is an error") {
  ToyVqaModel model = small_model();
  CHECK_THROWS_AS(model.forward(std::vector<double>{1.0, 2.0}, {"what"}), std::invalid_argument);
}

TEST_CASE("backward without a recorded forward is an error") {
  ToyVqaModel model = small_model();
  std::vector<double> g(5, 1.0);
  CHECK_THROWS_AS(model.backward(g), std::logic_error);

  Rng rng(3);
  model.forward(random_feat(4, rng), {"dog"});
  model.backward(g);                                // consumes the recorded forward
  CHECK_THROWS_AS(model.backward(g), std::logic_error);
}

TEST_CASE("zero upstream gradient yields zero parameter gradients") {
  ToyVqaModel model = small_model();
  Rng rng(4);
  model.zero_grad();
  model.forward(random_feat(4, rng), {"what", "car"});
  model.backward(std::vector<double>(5, 0.0));
  for (ParamBlock* b : model.param_blocks()) {
    for (double g : b->grad.data) CHECK(g == 0.0);
  }
}

TEST_CASE("backward is linear in the upstream gradient") {
  ToyVqaModel model = small_model();
  Rng rng(5);
  const std::vector<double> feat = random_feat(4, rng);
  const std::vector<std::string> tokens = {"what", "color", "dog"};
  std::vector<double> g1(5), g2(5);
  for (double& v : g1) v = rng.gaussian();
  for (double& v : g2) v = rng.gaussian();
  const double c = 2.5;

  model.zero_grad();
  model.forward(feat, tokens);
  model.backward(g1);
  const std::vector<double> grads1 = flatten_grads(model.param_blocks());

  model.zero_grad();
  model.forward(feat, tokens);
  model.backward(g2);
  const std::vector<double> grads2 = flatten_grads(model.param_blocks());

  std::vector<double> combo(5);
  for (int i = 0; i < 5; ++i) combo[i] = g1[i] + c * g2[i];
  model.zero_grad();
  model.forward(feat, tokens);
  model.backward(combo);
  const std::vector<double> grads3 = flatten_grads(model.param_blocks());

  for (std::size_t i = 0; i < grads3.size(); ++i) {
    CHECK(grads3[i] == doctest::Approx(grads1[i] + c * grads2[i]).epsilon(1e-12));
  }
}

TEST_CASE("DenseNet gradients match finite differences") {
  Rng rng(6);
  DenseNet net({5, 7, 3}, {LayerActivation::relu, LayerActivation::identity}, "net", rng);
  const std::vector<double> x = random_feat(5, rng);

  // L = 0.5 * |f(x)|^2, dL/dout = out
  const auto loss_fn = [&]() {
    const std::vector<double> out = net.forward(x);
    double s = 0.0;
    for (double v : out) s += v * v;
    return 0.5 * s;
  };

  net.zero_grad();
  const std::vector<double> out = net.forward(x);
  net.backward(out);

  const double h = 1e-5;
  for (ParamBlock* block : net.param_blocks()) {
    for (std::size_t i = 0; i < block->value.size(); ++i) {
      const double saved = block->value.data[i];
      block->value.data[i] = saved + h;
      const double fp = loss_fn();
      block->value.data[i] = saved - h;
      const double fm = loss_fn();
      block->value.data[i] = saved;
      const double numeric = (fp - fm) / (2.0 * h);
      const double analytic = block->grad.data[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-3});
      CHECK(std::abs(analytic - numeric) / denom < 1e-6);
    }
  }
}

TEST_CASE("rubi masking: removed at inference, halved at zero question logits") {
  ToyVqaModel model = small_model(11);
  RubiBranch branch(TokenVocab::from_tokens({"what", "color"}), 5, 8, 10, 12);
  Rng rng(7);
  const std::vector<double> feat = random_feat(4, rng);
  const std::vector<std::string> tokens = {"what", "color"};

  const Prediction plain = model.forward(feat, tokens);
  const RubiForward inference = rubi_forward(model, branch, feat, tokens, /*training=*/false);
  CHECK(inference.output.logits == plain.logits);  // bit-equal removal

  // zero branch parameters -> question logits 0 -> mask 0.5 everywhere
  for (ParamBlock* b : branch.param_blocks()) b->value.fill(0.0);
  const RubiForward training = rubi_forward(model, branch, feat, tokens, /*training=*/true);
  for (std::size_t i = 0; i < training.output.logits.size(); ++i) {
    CHECK(training.output.logits[i] == doctest::Approx(0.5 * plain.logits[i]).epsilon(1e-15));
    CHECK(training.mask[i] == 0.5);
  }
}

TEST_CASE("inference argmax ignores branch parameters entirely") {
  ToyVqaModel model = small_model(13);
  RubiBranch branch(TokenVocab::from_tokens({"what"}), 5, 8, 10, 14);
  Rng rng(8);
  const std::vector<double> feat = random_feat(4, rng);
  const std::vector<std::string> tokens = {"what"};

  const RubiForward before = rubi_forward(model, branch, feat, tokens, false);
  for (ParamBlock* b : branch.param_blocks()) {
    for (double& v : b->value.data) v += 100.0 * rng.gaussian();
  }
  const RubiForward after = rubi_forward(model, branch, feat, tokens, false);
  CHECK(before.output.logits == after.output.logits);
}

TEST_CASE("rubi gradients flow to both branches and match finite differences") {
  ToyVqaModel model = small_model(15);
  RubiBranch branch(TokenVocab::from_tokens({"what", "dog"}), 5, 8, 10, 16);
  Rng rng(9);
  const std::vector<double> feat = random_feat(4, rng);
  const std::vector<std::string> tokens = {"what", "dog"};

  // L = sum of masked logits
  const auto loss_fn = [&]() {
    RubiForward f = rubi_forward(model, branch, feat, tokens, true);
    double s = 0.0;
    for (double v : f.output.logits) s += v;
    return s;
  };

  model.zero_grad();
  branch.zero_grad();
  RubiForward fwd = rubi_forward(model, branch, feat, tokens, true);
  rubi_backward(model, branch, fwd, std::vector<double>(5, 1.0));

  std::vector<ParamBlock*> blocks = model.param_blocks();
  for (ParamBlock* b : branch.param_blocks()) blocks.push_back(b);

  GradCheckOptions opts;
  opts.tolerance = 1e-5;
  opts.samples_per_block = 6;
  Rng check_rng(10);
  const GradCheckReport report = grad_check(loss_fn, blocks, opts, check_rng);
  CHECK(report.passed);

  // the branch must actually receive gradient
  double branch_grad_mass = 0.0;
  for (ParamBlock* b : branch.param_blocks()) {
    for (double g : b->grad.data) branch_grad_mass += std::abs(g);
  }
  CHECK(branch_grad_mass > 0.0);
}

TEST_CASE("adam: fixed point at zero gradient, first step close to -lr") {
  ParamBlock p("p", 1, 1);
  p.value.at(0, 0) = 1.0;
  std::vector<ParamBlock*> blocks = {&p};
  AdamState state = make_adam_state(blocks);

  p.grad.at(0, 0) = 0.0;
  step_adam(blocks, state, 0.01);
  CHECK(p.value.at(0, 0) == 1.0);

  // constant unit gradient: bias correction makes the first move ~ -lr
  AdamState fresh = make_adam_state(blocks);
  p.grad.at(0, 0) = 1.0;
  step_adam(blocks, fresh, 0.01);
  CHECK(p.value.at(0, 0) == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
}

TEST_CASE("adamax first step also moves by about -lr") {
  ParamBlock p("p", 1, 1);
  std::vector<ParamBlock*> blocks = {&p};
  AdamState state = make_adam_state(blocks);
  p.grad.at(0, 0) = 1.0;
  step_adamax(blocks, state, 0.02);
  CHECK(p.value.at(0, 0) == doctest::Approx(-0.02).epsilon(1e-6));
}

TEST_CASE("adam is deterministic across identical runs") {
  auto run = [] {
    ToyVqaModel model = small_model(21);
    Rng rng(22);
    const std::vector<double> feat = random_feat(4, rng);
    std::vector<ParamBlock*> blocks = model.param_blocks();
    AdamState state = make_adam_state(blocks);
    for (int i = 0; i < 5; ++i) {
      model.zero_grad();
      const Prediction pred = model.forward(feat, {"what"});
      model.backward(pred.logits);  // L = 0.5 |logits|^2
      step_adam(blocks, state, 0.005);
    }
    std::vector<double> flat;
    for (ParamBlock* b : blocks) flat.insert(flat.end(), b->value.data.begin(), b->value.data.end());
    return flat;
  };
  CHECK(run() == run());
}

TEST_CASE("non-finite gradients are rejected with the block name") {
  ParamBlock p("fusion.w0", 2, 2);
  std::vector<ParamBlock*> blocks = {&p};
  AdamState state = make_adam_state(blocks);
  p.grad.at(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH_AS(step_adam(blocks, state, 0.01), doctest::Contains("fusion.w0"),
                       std::runtime_error);
}

TEST_CASE("grad_check flags corrupted gradients and reports the worst coordinate") {
  Rng rng(30);
  DenseNet net({3, 4, 2}, {LayerActivation::relu, LayerActivation::identity}, "net", rng);
  const std::vector<double> x = random_feat(3, rng);
  const auto loss_fn = [&]() {
    const std::vector<double> out = net.forward(x);
    double s = 0.0;
    for (double v : out) s += v * v;
    return 0.5 * s;
  };

  net.zero_grad();
  net.backward(net.forward(x));

  GradCheckOptions opts;
  opts.samples_per_block = 64;
  {
    Rng check_rng(31);
    const GradCheckReport good = grad_check(loss_fn, net.param_blocks(), opts, check_rng);
    CHECK(good.passed);
    CHECK(good.coords_checked > 0);
  }

  // corrupt every accumulated gradient entry by +1
  for (ParamBlock* b : net.param_blocks()) {
    for (double& g : b->grad.data) g += 1.0;
  }
  Rng check_rng(32);
  const GradCheckReport bad = grad_check(loss_fn, net.param_blocks(), opts, check_rng);
  CHECK(!bad.passed);
  CHECK(bad.max_rel_error > 0.1);
  CHECK(!bad.worst_block.empty());
  CHECK(bad.worst_index >= 0);
  CHECK(bad.summary().find("FAIL") == 0);
}

TEST_CASE("checkpoint save/load round trip reproduces the model bit-exactly") {
  ToyVqaModel model = small_model(40);
  const AnswerSpace space = AnswerSpace::from_answers({"a", "b", "c", "d", "e"});
  const std::string path = "test_tmp_checkpoint.txt";
  save_checkpoint(path, model, space);

  LoadedCheckpoint loaded = load_checkpoint(path);
  CHECK(loaded.space.answers() == space.answers());
  CHECK(loaded.model.vocab().tokens() == model.vocab().tokens());

  const auto orig_blocks = model.param_blocks();
  const auto back_blocks = loaded.model.param_blocks();
  REQUIRE(orig_blocks.size() == back_blocks.size());
  for (std::size_t i = 0; i < orig_blocks.size(); ++i) {
    CHECK(orig_blocks[i]->name == back_blocks[i]->name);
    CHECK(orig_blocks[i]->value.data == back_blocks[i]->value.data);
  }

  Rng rng(41);
  const std::vector<double> feat = random_feat(4, rng);
  const Prediction a = model.forward(feat, {"what", "car"});
  const Prediction b = loaded.model.forward(feat, {"what", "car"});
  CHECK(a.logits == b.logits);
  std::remove(path.c_str());
}
