#include "indivaid/train.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include "indivaid/augment.hpp"
#include "indivaid/common.hpp"
#include "indivaid/evaluate.hpp"
#include "indivaid/losses.hpp"
#include "indivaid/merge.hpp"
#include "indivaid/sampler.hpp"
#include "indivaid/schedule.hpp"

namespace indivaid {

namespace {

torch::optim::Adam make_adam(std::vector<torch::Tensor> params, double lr) {
  return torch::optim::Adam(std::move(params),
                            torch::optim::AdamOptions(lr).betas({0.9, 0.999}).weight_decay(0.0));
}

void set_lr(torch::optim::Adam& opt, double lr) {
  for (auto& group : opt.param_groups()) static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
}

TensorMap adam_state(torch::optim::Adam& opt) {
  TensorMap out;
  const auto& params = opt.param_groups().front().params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto it = opt.state().find(params[i].unsafeGetTensorImpl());
    if (it == opt.state().end()) continue;
    auto& s = static_cast<torch::optim::AdamParamState&>(*it->second);
    const std::string k = std::to_string(i);
    out[k + ".exp_avg"] = s.exp_avg().clone();
    out[k + ".exp_avg_sq"] = s.exp_avg_sq().clone();
    out[k + ".step"] = torch::tensor({s.step()}, torch::kInt64);
  }
  return out;
}

void restore_adam_state(torch::optim::Adam& opt, const TensorMap& state) {
  const auto& params = opt.param_groups().front().params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string k = std::to_string(i);
    if (!state.count(k + ".exp_avg")) continue;
    auto s = std::make_unique<torch::optim::AdamParamState>();
    s->exp_avg(state.at(k + ".exp_avg").clone());
    s->exp_avg_sq(state.at(k + ".exp_avg_sq").clone());
    s->step(state.at(k + ".step").item<int64_t>());
    if (s->exp_avg().sizes() != params[i].sizes())
      throw InputError("optimizer state does not match the model parameters");
    opt.state()[params[i].unsafeGetTensorImpl()] = std::move(s);
  }
}

void require_matching_index(const ReidModel& model, const DatasetScan& data) {
  if (model.train_index.labels() != data.train_index.labels())
    throw InputError("model identities do not match the dataset's train identities");
}

double value_or_nan(const torch::Tensor& t) {
  return t.defined() ? t.item<double>() : std::nan("");
}

nlohmann::json loss_value(const torch::Tensor& t) {
  return t.defined() ? nlohmann::json(t.item<double>()) : nlohmann::json(nullptr);
}

void emit(StageResult& result, const RunOptions& options, nlohmann::json record) {
  if (options.on_log) options.on_log(record);
  result.log.push_back(std::move(record));
}

template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (int i = static_cast<int>(v.size()) - 1; i > 0; --i)
    std::swap(v[i], v[std::uniform_int_distribution<int>(0, i)(rng)]);
}

}  // namespace

torch::Tensor fixed_description(Encoder& encoder, const PromptConfig& prompt) {
  torch::NoGradGuard no_grad;
  auto [ids, eos] = encoder.tokenize_prompt(prompt.init_phrase + " " + prompt.species + ".");
  auto emb = encoder.word_embed(ids).unsqueeze(0);
  return encoder.encode_text(emb, torch::tensor({eos}, torch::kLong)).squeeze(0);
}

StageResult run_stage1(const TrainConfig& config, const DatasetScan& data, ReidModel& model,
                       ImageCache& images, const RunOptions& options) {
  config.validate();
  if (!model.prompt) throw InputError("stage one needs a prompt generator (mode indivaid)");
  require_matching_index(model, data);
  Encoder& encoder = *model.encoder;
  auto train = data.split(Split::train);

  set_requires_grad(encoder, false);
  set_requires_grad(*model.prompt, true);

  // Frozen encoder and no augmentation: image features are computed once.
  torch::Tensor features;
  {
    torch::NoGradGuard no_grad;
    std::vector<torch::Tensor> chunks;
    for (std::size_t s = 0; s < train.size(); s += 64) {
      std::vector<torch::Tensor> batch;
      for (std::size_t i = s; i < std::min(train.size(), s + 64); ++i)
        batch.push_back(normalize_pixels(images.get(train[i].path)));
      chunks.push_back(encoder.encode_image(torch::stack(batch), false));
    }
    features = torch::cat(chunks, 0);
  }
  std::vector<int64_t> label_values;
  for (const auto& r : train) label_values.push_back(r.identity);
  auto labels = torch::tensor(label_values, torch::kLong);
  auto temperature = encoder.temperature().detach();

  auto optimizer = make_adam(model.prompt->parameters(), config.stage1_lr);
  int start_epoch = 0;
  if (model.stage == 1 && model.epoch > 0) {
    start_epoch = model.epoch;
    if (options.optimizer_state) restore_adam_state(optimizer, *options.optimizer_state);
  }

  const long n = static_cast<long>(train.size());
  const long bs = std::min<long>(config.stage1_batch_size, n);
  const long steps_per_epoch = (n + bs - 1) / bs;
  const long total_steps = std::max(1L, steps_per_epoch * config.epochs);

  StageResult result;
  model.stage = 1;
  model.epoch = start_epoch;
  bool stop = false;
  bool saved = false;
  for (int epoch = start_epoch; epoch < config.epochs && !stop; ++epoch) {
    std::mt19937_64 rng(mix_seed(config.seed, 100 + epoch));
    std::vector<int64_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    shuffle(order, rng);
    for (long b = 0; b < steps_per_epoch; ++b) {
      if (options.max_steps >= 0 && result.steps >= options.max_steps) {
        stop = true;
        break;
      }
      const long step = epoch * steps_per_epoch + b;
      const double lr = lr_stage1(step, total_steps, config.stage1_lr);
      set_lr(optimizer, lr);
      std::vector<int64_t> idx(order.begin() + b * bs, order.begin() + std::min(n, (b + 1) * bs));
      auto index = torch::tensor(idx, torch::kLong);
      auto v = features.index_select(0, index);
      auto y = labels.index_select(0, index);

      auto t = model.prompt->describe(encoder, v, y);
      auto s = similarity_matrix(v, t, temperature);
      auto l_i2t = i2t_loss(s), l_t2i = t2i_loss(s);
      auto loss = l_i2t + l_t2i;
      if (!std::isfinite(loss.item<double>()))
        throw RuntimeFailure("non-finite stage-one loss at step " + std::to_string(step));
      optimizer.zero_grad();
      loss.backward();
      optimizer.step();
      ++result.steps;
      emit(result, options,
           {{"stage", 1}, {"epoch", epoch}, {"step", step}, {"l_i2t", l_i2t.item<double>()},
            {"l_t2i", l_t2i.item<double>()}, {"l_total", loss.item<double>()}, {"lr", lr}});
    }
    if (stop) break;
    model.epoch = epoch + 1;
    if (!options.checkpoint_dir.empty()) {
      save_checkpoint(options.checkpoint_dir, model, {{"optimizer", adam_state(optimizer)}});
      saved = true;
    }
  }
  // Checkpoints mark completed epochs; a run cut short before the first
  // one still leaves its state behind.
  if (!options.checkpoint_dir.empty() && !saved) save_checkpoint(options.checkpoint_dir, model);
  return result;
}

StageResult run_stage2(const TrainConfig& config, const DatasetScan& data, ReidModel& model,
                       ImageCache& images, const RunOptions& options) {
  config.validate();
  if (config.mode == Mode::clip_zs) throw InputError("zero-shot mode has no training");
  if (config.mode == Mode::indivaid && (!model.prompt || model.stage < 1))
    throw InputError("stage two needs a stage-one checkpoint (train --stage 1 first)");
  if (!model.classifier) throw InputError("stage two needs a classifier head");
  require_matching_index(model, data);
  Encoder& encoder = *model.encoder;
  auto train = data.split(Split::train);

  set_requires_grad(encoder, false);
  if (model.prompt) set_requires_grad(*model.prompt, false);

  DescriptionBank bank;
  torch::Tensor fixed;
  const bool resuming = model.stage == 2 && model.epoch > 0;
  if (config.mode == Mode::indivaid) {
    if (resuming && options.description_bank)
      bank = DescriptionBank::from_tensors(*options.description_bank);
    else
      bank = build_description_bank(train, model.prompt, encoder, images);
  } else {
    fixed = fixed_description(encoder, config.prompt)
                .unsqueeze(0)
                .expand({model.train_index.size(), config.encoder.embed_dim})
                .contiguous();
  }

  set_requires_grad(encoder.visual(), true);
  encoder.logit_scale().set_requires_grad(true);
  set_requires_grad(*model.classifier, true);
  std::vector<torch::Tensor> params = encoder.visual().parameters();
  params.push_back(encoder.logit_scale());
  for (auto& p : model.classifier->parameters()) params.push_back(p);
  if (model.attention) {
    set_requires_grad(*model.attention, true);
    for (auto& p : model.attention->parameters()) params.push_back(p);
  }

  const auto schedule = config.stage2_schedule();
  auto optimizer = make_adam(params, lr_stage2(0, schedule));
  int start_epoch = 0;
  if (resuming) {
    start_epoch = model.epoch;
    if (options.optimizer_state) restore_adam_state(optimizer, *options.optimizer_state);
  }

  StageResult result;
  model.stage = 2;
  model.epoch = start_epoch;
  // Global step numbering continues across a resume.
  long step = 0;
  for (int epoch = 0; epoch < start_epoch; ++epoch)
    step += static_cast<long>(make_batches(train, config.I, config.K, mix_seed(config.seed, 200 + epoch)).batches.size());
  bool stop = false;
  bool saved = false;
  for (int epoch = start_epoch; epoch < config.epochs && !stop; ++epoch) {
    const double lr = lr_stage2(epoch, schedule);
    set_lr(optimizer, lr);
    auto plan = make_batches(train, config.I, config.K, mix_seed(config.seed, 200 + epoch));
    // Single loader worker: augmentation stream seeded by (seed, worker 0, epoch).
    std::mt19937_64 rng(mix_seed(mix_seed(config.seed, 0), 300 + epoch));
    for (const auto& batch : plan.batches) {
      if (options.max_steps >= 0 && result.steps >= options.max_steps) {
        stop = true;
        break;
      }
      std::vector<torch::Tensor> imgs;
      std::vector<int64_t> ys;
      for (int i : batch) {
        imgs.push_back(normalize_pixels(augment(images.get(train[i].path), config.augment, rng)));
        ys.push_back(train[i].identity);
      }
      auto y = torch::tensor(ys, torch::kLong);
      auto v = encoder.encode_image(torch::stack(imgs), true);
      auto descriptions = model.attention ? model.attention->merged_descriptions(bank) : fixed;
      auto terms = stage2_loss({v, y, descriptions, model.classifier(v), encoder.temperature()},
                               config.loss_flags, config.tau, config.epsilon);
      const double total = terms.total.item<double>();
      if (!std::isfinite(total)) throw RuntimeFailure("non-finite stage-two loss at step " + std::to_string(step));
      optimizer.zero_grad();
      terms.total.backward();
      optimizer.step();
      ++result.steps;
      nlohmann::json record = {{"stage", 2},
                               {"epoch", epoch},
                               {"step", step},
                               {"l_id", loss_value(terms.id)},
                               {"l_tri", loss_value(terms.tri)},
                               {"l_i2tce", loss_value(terms.i2tce)},
                               {"l_total", total},
                               {"lr", lr}};
      if (terms.i2t.defined()) record["l_i2t"] = value_or_nan(terms.i2t);
      if (terms.t2i.defined()) record["l_t2i"] = value_or_nan(terms.t2i);
      emit(result, options, std::move(record));
      ++step;
    }
    if (stop) break;
    model.epoch = epoch + 1;
    if (!options.checkpoint_dir.empty()) {
      std::map<std::string, TensorMap> extra{{"optimizer", adam_state(optimizer)}};
      if (model.attention) extra["description_bank"] = bank.to_tensors();
      save_checkpoint(options.checkpoint_dir, model, extra);
      saved = true;
    }
    if (config.validate_each_epoch) {
      auto report = evaluate(encoder, data, images);
      if (!result.best || report.mAP > result.best->mAP) {
        result.best = report;
        if (!options.checkpoint_dir.empty()) save_checkpoint(options.checkpoint_dir / "best", model);
      }
    }
  }
  if (!options.checkpoint_dir.empty() && !saved) save_checkpoint(options.checkpoint_dir, model);
  return result;
}

std::optional<StageResult> run_baseline(const TrainConfig& config, const DatasetScan& data, ReidModel& model,
                                        ImageCache& images, const RunOptions& options) {
  switch (config.mode) {
    case Mode::clip_zs: return std::nullopt;
    case Mode::clip_ft: return run_stage2(config, data, model, images, options);
    case Mode::indivaid: break;
  }
  throw InputError("run_baseline handles clip_ft and clip_zs only");
}

}  // namespace indivaid
