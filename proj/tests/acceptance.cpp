// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

#include <torch/torch.h>

#include "indivaid/commands.hpp"
#include "indivaid/common.hpp"
#include "indivaid/config.hpp"
#include "indivaid/encoder.hpp"
#include "indivaid/image.hpp"
#include "indivaid/losses.hpp"
#include "indivaid/merge.hpp"
#include "indivaid/metrics.hpp"
#include "indivaid/model.hpp"
#include "indivaid/prompt.hpp"
#include "indivaid/train.hpp"
#include "support/fixture.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace indivaid;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void expect(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

struct Criterion {
  int number;
  std::string name;
  double time_limit_s;  // <= 0: none
  std::function<void(Outcome&)> body;
};

torch::Tensor randn(std::vector<int64_t> shape, std::uint64_t seed) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  return torch::randn(shape, gen, torch::kFloat64);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// ---------------------------------------------------------------- 1
void triplet_exactness(Outcome& o) {
  o.expect(std::abs(triplet_hinge(0.5, 0.8, 0.4) - 0.1) <= 1e-12, "hinge(0.5, 0.8)");
  o.expect(std::abs(triplet_hinge(1.5, 1.8, 0.4) - 0.1) <= 1e-12, "hinge(1.5, 1.8)");
  // Batches where every anchor sees exactly those hardest distances:
  // identity a at (+-w, 0), identity b at (+-w, h), positives 2w apart.
  auto labels = torch::tensor({0, 0, 1, 1});
  for (auto [dp, dn] : {std::pair{0.5, 0.8}, std::pair{1.5, 1.8}}) {
    const double w = dp / 2;
    auto f = torch::tensor({{-w, 0.0}, {w, 0.0}, {-w, dn}, {w, dn}}, torch::kFloat64);
    const double loss = triplet_loss(f, labels, 0.4).item<double>();
    o.expect(std::abs(loss - 0.1) <= 1e-12, "batch-hard loss at d_p=" + std::to_string(dp));
    o.detail << " d_p=" << dp << ",d_n=" << dn << "->" << loss;
  }
}

// ---------------------------------------------------------------- 2
void lsr_targets(Outcome& o) {
  int cases = 0;
  for (int n = 1; n <= 50; ++n)
    for (double eps : {0.0, 0.1, 0.3})
      for (int y = 0; y < n; ++y) {
        auto q = smoothed_targets(y, n, eps).q;
        const double sum = q.sum().item<double>();
        const double qy = q[y].item<double>();
        const double expect = (1 - eps) + eps / n;
        if (std::abs(sum - 1) > 1e-12 || qy != expect) {
          o.expect(false, "N=" + std::to_string(n) + " eps=" + std::to_string(eps) + " y=" + std::to_string(y));
          return;
        }
        ++cases;
      }
  o.detail << " " << cases << " (N, eps, y) cases";
}

// ---------------------------------------------------------------- 3
void contrastive_degeneracy(Outcome& o) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(0, 5);
  for (int trial = 0; trial < 20; ++trial) {
    auto s = torch::full({1, 1}, normal(rng), torch::kFloat64);
    o.expect(i2t_loss(s).item<double>() == 0.0, "i2t at B=1");
    o.expect(t2i_loss(s).item<double>() == 0.0, "t2i at B=1");
    o.expect(stage1_loss(s).item<double>() == 0.0, "stage1 at B=1");
  }
  for (int b = 2; b <= 16; ++b) {
    auto s = torch::full({b, b}, normal(rng), torch::kFloat64);
    const double lb = std::log(static_cast<double>(b));
    o.expect(std::abs(i2t_loss(s).item<double>() - lb) <= 1e-9, "i2t constant B=" + std::to_string(b));
    o.expect(std::abs(t2i_loss(s).item<double>() - lb) <= 1e-9, "t2i constant B=" + std::to_string(b));
    o.expect(std::abs(stage1_loss(s).item<double>() - 2 * lb) <= 1e-9, "stage1 constant B=" + std::to_string(b));
  }
  o.detail << " B=1 and constant B=2..16";
}

// ---------------------------------------------------------------- 4
void gradient_checks(Outcome& o) {
  constexpr int kEmbed = 8;
  auto cfg = toy_config(kEmbed, 11);
  cfg.image_size = 8;
  cfg.patch_size = 4;
  double worst = 0;
  int groups = 0;
  auto record = [&](const std::string& name, const gradcheck::Result& r) {
    worst = std::max(worst, r.rel_error);
    ++groups;
    o.expect(r.rel_error <= 1e-4, name + " rel error " + std::to_string(r.rel_error));
    o.expect(r.analytic_norm > 0, name + " has zero gradient");
  };

  // Stage One: context tokens, identity tokens, Meta-Net.
  {
    auto enc = make_encoder(cfg);
    set_requires_grad(*enc, false);
    PromptGenerator prompt(*enc, 3, PromptConfig{}, 12);
    {
      torch::NoGradGuard guard;
      for (auto& p : prompt->meta_linear1->parameters()) p.add_(0.3 * randn(p.sizes().vec(), 13));
    }
    auto v = enc->encode_image(randn({6, 3, 8, 8}, 14), false);
    auto ids = torch::tensor({0, 1, 2, 0, 1, 2});
    auto loss = [&] {
      return stage1_loss(similarity_matrix(v, prompt->describe(*enc, v, ids), enc->temperature()));
    };
    for (const auto& item : prompt->named_parameters()) record("prompt." + item.key(), gradcheck::check(loss, item.value()));
  }

  // Stage Two: toy image encoder, temperature, classifier, attention.
  {
    auto enc = make_encoder(cfg);
    set_requires_grad(*enc, false);
    set_requires_grad(enc->visual(), true);
    enc->logit_scale().set_requires_grad(true);
    auto feats = randn({6, kEmbed}, 15);
    DescriptionBank bank(feats, {0, 0, 1, 1, 2, 2}, 3);
    AttentionMerge attention(kEmbed, torch::kFloat64);
    {
      torch::NoGradGuard guard;
      attention->query.copy_(0.5 * randn({kEmbed}, 16));
      attention->key_map.add_(0.2 * randn({kEmbed, kEmbed}, 17));
      attention->value_map.add_(0.2 * randn({kEmbed, kEmbed}, 18));
    }
    torch::nn::Linear classifier(kEmbed, 3);
    classifier->to(torch::kFloat64);
    {
      torch::NoGradGuard guard;
      classifier->weight.copy_(0.3 * randn({3, kEmbed}, 19));
    }
    auto images = randn({6, 3, 8, 8}, 20);
    auto labels = torch::tensor({0, 0, 1, 1, 2, 2});
    LossFlags all{LossTerm::id, LossTerm::tri, LossTerm::i2tce, LossTerm::i2t, LossTerm::t2i};
    auto loss = [&] {
      auto v = enc->encode_image(images, true);
      return stage2_loss({v, labels, attention->merged_descriptions(bank), classifier(v), enc->temperature()}, all,
                         0.3, 0.1)
          .total;
    };
    for (const auto& item : enc->visual().named_parameters()) record("visual." + item.key(), gradcheck::check(loss, item.value()));
    record("logit_scale", gradcheck::check(loss, enc->logit_scale()));
    for (const auto& item : classifier->named_parameters()) record("classifier." + item.key(), gradcheck::check(loss, item.value()));
    for (const auto& item : attention->named_parameters()) record("attention." + item.key(), gradcheck::check(loss, item.value()));
  }
  o.detail << " " << groups << " parameter groups, worst rel error " << worst;
}

// ---------------------------------------------------------------- 5
void metric_oracle(Outcome& o) {
  std::mt19937_64 rng(5);
  int compared = 0;
  double worst = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int Q = 1 + static_cast<int>(rng() % 10);
    const int G = 1 + static_cast<int>(rng() % 20);
    const int d = 2 + static_cast<int>(rng() % 6);
    const int ids = 1 + static_cast<int>(rng() % 4);
    auto q = randn({Q, d}, rng());
    auto g = randn({G, d}, rng());
    // Some instances get exact ties to exercise the tie rule.
    if (trial % 5 == 0 && G > 1) g[G - 1].copy_(g[0]);
    std::vector<int> qid(Q), gid(G);
    for (auto& v : qid) v = static_cast<int>(rng() % ids);
    for (auto& v : gid) v = static_cast<int>(rng() % ids);
    std::vector<std::vector<double>> qv(Q, std::vector<double>(d)), gv(G, std::vector<double>(d));
    for (int i = 0; i < Q; ++i)
      for (int k = 0; k < d; ++k) qv[i][k] = q[i][k].item<double>();
    for (int j = 0; j < G; ++j)
      for (int k = 0; k < d; ++k) gv[j][k] = g[j][k].item<double>();
    auto sims = oracle::cosine(qv, gv);
    double ap_sum = 0;
    int valid = 0;
    std::map<int, int> within;
    for (int i = 0; i < Q; ++i) {
      std::vector<bool> rel(G);
      for (int j = 0; j < G; ++j) rel[j] = gid[j] == qid[i];
      const double ap = oracle::average_precision(sims[i], rel);
      if (ap < 0) continue;
      ap_sum += ap;
      ++valid;
      const int hit = oracle::first_hit(sims[i], rel);
      for (int k : kCmcRanks) within[k] += hit <= k;
    }
    auto report = evaluate_retrieval(q, qid, g, gid);
    o.expect(report.excluded_queries == Q - valid, "excluded count, trial " + std::to_string(trial));
    if (valid == 0) continue;
    ++compared;
    const double dm = std::abs(report.mAP - ap_sum / valid);
    worst = std::max(worst, dm);
    o.expect(dm <= 1e-9, "mAP, trial " + std::to_string(trial));
    for (int k : kCmcRanks) {
      const double dc = std::abs(report.cmc.at(k) - static_cast<double>(within[k]) / valid);
      worst = std::max(worst, dc);
      o.expect(dc <= 1e-9, "CMC@" + std::to_string(k) + ", trial " + std::to_string(trial));
    }
  }
  o.detail << " 200 instances (" << compared << " with valid queries), max deviation " << worst;
}

// ---------------------------------------------------------------- shared fixture
struct Fixture {
  fixture::TempDir dir{"acceptance"};
  fs::path data = dir / "data";
  fs::path config = dir / "config.json";
  DatasetScan scan;

  Fixture() {
    fixture::generate(data, fixture::overfit_spec());
    std::ofstream(config) << to_json(fixture::overfit_config()).dump(2);
    scan = scan_dataset(data);
  }
};

Fixture& shared_fixture() {
  static Fixture f;
  return f;
}

// ---------------------------------------------------------------- 6
void freezing_contracts(Outcome& o) {
  auto& f = shared_fixture();
  ImageCache images(32);
  auto config = fixture::overfit_config();
  auto model = create_model(config, f.scan.train_index);
  RunOptions opts;
  opts.max_steps = 50;

  auto before = model.checksums();
  auto r1 = run_stage1(config, f.scan, model, images, opts);
  auto after = model.checksums();
  o.expect(r1.steps == 50, "stage one ran " + std::to_string(r1.steps) + " steps");
  o.expect(after.at("image_encoder") == before.at("image_encoder"), "stage one changed the image encoder");
  o.expect(after.at("text_encoder") == before.at("text_encoder"), "stage one changed the text encoder");
  o.expect(after.at("temperature") == before.at("temperature"), "stage one changed the temperature");
  o.expect(after.at("prompt") != before.at("prompt"), "stage one did not train the prompt");

  auto c2 = config;
  c2.stage = 2;
  c2.epochs = 25;
  before = model.checksums();
  auto r2 = run_stage2(c2, f.scan, model, images, opts);
  after = model.checksums();
  o.expect(r2.steps == 50, "stage two ran " + std::to_string(r2.steps) + " steps");
  o.expect(after.at("prompt") == before.at("prompt"), "stage two changed the prompt");
  o.expect(after.at("text_encoder") == before.at("text_encoder"), "stage two changed the text encoder");
  o.expect(after.at("image_encoder") != before.at("image_encoder"), "stage two did not train the image encoder");
  o.detail << " 50 steps per stage; prompt " << hex64(after.at("prompt")) << ", text " << hex64(after.at("text_encoder"));
}

// Stage One (20 epochs), Stage Two (25 epochs), evaluation; all through
// the command layer.
nlohmann::json full_pipeline(const fs::path& out, const fs::path& data, const fs::path& config) {
  TrainOptions s1;
  s1.stage = 1;
  s1.config = config;
  s1.root = data;
  s1.out = out / "stage1";
  s1.overrides["epochs"] = 20;
  cmd_train(s1);
  TrainOptions s2 = s1;
  s2.stage = 2;
  s2.init = out / "stage1";
  s2.out = out / "stage2";
  s2.overrides["epochs"] = 25;
  cmd_train(s2);
  EvalOptions ev;
  ev.checkpoints = {out / "stage2"};
  ev.root = data;
  ev.out = out / "report.json";
  cmd_eval(ev);
  return nlohmann::json::parse(slurp(ev.out));
}

// ---------------------------------------------------------------- 7
void overfit(Outcome& o) {
  auto& f = shared_fixture();
  auto report = full_pipeline(f.dir / "run_a", f.data, f.config);
  EvalOptions zs;
  zs.config = f.config;
  zs.root = f.data;
  zs.out = f.dir / "zero_shot.json";
  cmd_eval(zs);
  auto zero = nlohmann::json::parse(slurp(zs.out));
  const double top1 = report["cmc"]["1"], map = report["map"], zs_map = zero["map"];
  o.expect(top1 >= 0.90, "Top-1 " + std::to_string(top1) + " < 0.90");
  o.expect(map >= 0.80, "mAP " + std::to_string(map) + " < 0.80");
  o.expect(zs_map < map, "zero-shot mAP not lower");
  o.detail << " Top-1 " << top1 << ", mAP " << map << "; zero-shot mAP " << zs_map;
}

// ---------------------------------------------------------------- 8
void ablation_toggles(Outcome& o) {
  auto& f = shared_fixture();
  ImageCache images(32);
  auto config = fixture::overfit_config();
  config.epochs = 5;
  auto base = create_model(config, f.scan.train_index);
  run_stage1(config, f.scan, base, images);
  const std::vector<LossFlags> rows = {{LossTerm::i2t, LossTerm::t2i},
                                       {LossTerm::i2t},
                                       {LossTerm::i2tce, LossTerm::t2i},
                                       {LossTerm::i2tce}};
  int runs = 0;
  for (bool with_standard : {true, false})
    for (auto flags : rows) {
      if (with_standard) flags.insert({LossTerm::id, LossTerm::tri});
      auto c = config;
      c.stage = 2;
      c.epochs = 25;
      c.loss_flags = flags;
      auto model = base;
      // Fresh copies of the trainable parts so runs are independent.
      fixture::TempDir tmp("ablation");
      save_checkpoint(tmp / "s1", base);
      model = load_checkpoint(tmp / "s1").model;
      auto result = run_stage2(c, f.scan, model, images);
      bool finite = !result.log.empty();
      for (const auto& rec : result.log) {
        finite = finite && std::isfinite(rec["l_total"].get<double>());
        for (const auto& name : loss_flag_names(flags))
          finite = finite && rec["l_" + name].is_number() && std::isfinite(rec["l_" + name].get<double>());
      }
      std::string label;
      for (const auto& name : loss_flag_names(flags)) label += (label.empty() ? "" : "+") + name;
      o.expect(finite, "non-finite or missing loss with {" + label + "}");
      ++runs;
    }
  o.detail << " " << runs << " runs (four contrastive sets, alone and with id+tri)";
}

// ---------------------------------------------------------------- 9
void determinism(Outcome& o) {
  auto& f = shared_fixture();
  if (!fs::exists(f.dir / "run_a/report.json")) full_pipeline(f.dir / "run_a", f.data, f.config);
  full_pipeline(f.dir / "run_b", f.data, f.config);
  int files = 0;
  for (const auto* stage : {"stage1", "stage2"})
    for (const auto& e : fs::directory_iterator(f.dir / "run_a" / stage / "params")) {
      const auto other = f.dir / "run_b" / stage / "params" / e.path().filename();
      o.expect(slurp(e.path()) == slurp(other), std::string(stage) + "/" + e.path().filename().string() + " differs");
      ++files;
    }
  auto ma = nlohmann::json::parse(slurp(f.dir / "run_a/stage2/meta.json"));
  auto mb = nlohmann::json::parse(slurp(f.dir / "run_b/stage2/meta.json"));
  o.expect(ma["params"] == mb["params"], "checkpoint checksums differ");
  o.expect(slurp(f.dir / "run_a/report.json") == slurp(f.dir / "run_b/report.json"), "metric reports differ");
  o.detail << " " << files << " parameter blobs and the report byte-identical";
}

// ---------------------------------------------------------------- 10
void attention_properties(Outcome& o) {
  std::mt19937_64 rng(10);
  int failures = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int d = 2 + static_cast<int>(rng() % 15);
    const int n = 1 + static_cast<int>(rng() % 12);
    AttentionMerge m(d, torch::kFloat64);
    auto t = randn({n, d}, rng());

    // Singleton with the initial parameters returns the unit vector itself.
    auto unit = t[0] / t[0].norm();
    if ((m->merge(unit.unsqueeze(0)) - unit).abs().max().item<double>() > 1e-15) ++failures;

    {
      torch::NoGradGuard guard;
      m->query.copy_(randn({d}, rng()));
      m->key_map.add_(0.5 * randn({d, d}, rng()));
      m->value_map.add_(0.5 * randn({d, d}, rng()));
    }
    auto base = m->merge(t);
    if (std::abs(base.norm().item<double>() - 1.0) > 1e-12) ++failures;
    std::vector<int64_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    if (!torch::equal(m->merge(t.index_select(0, torch::tensor(perm))), base)) ++failures;
  }
  o.expect(failures == 0, std::to_string(failures) + " failures");
  o.detail << " 1000 trials, " << failures << " failures";
}

}  // namespace

int main() {
  torch::set_num_threads(1);
  const std::vector<Criterion> criteria = {
      {1, "triplet-loss exactness", 1, triplet_exactness},
      {2, "label-smoothing targets", 1, lsr_targets},
      {3, "contrastive degeneracy", 1, contrastive_degeneracy},
      {4, "gradient checks", 120, gradient_checks},
      {5, "metric oracle equivalence", 30, metric_oracle},
      {6, "freezing contracts", 60, freezing_contracts},
      {7, "end-to-end overfit", 300, overfit},
      {8, "ablation toggles", 0, ablation_toggles},
      {9, "determinism", 0, determinism},
      {10, "attention-merge properties", 10, attention_properties},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.body(o);
    } catch (const std::exception& e) {
      o.expect(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.time_limit_s > 0) o.expect(secs < c.time_limit_s, "over the " + std::to_string(c.time_limit_s) + " s limit");
    failed += !o.pass;
    std::printf("%s  [%2d] %-28s %7.2f s %s\n", o.pass ? "PASS" : "FAIL", c.number, c.name.c_str(), secs,
                o.detail.str().c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
