// Command-line entry point: prepare, train, eval, embed, rank.

#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "indivaid/commands.hpp"
#include "indivaid/common.hpp"
#include "indivaid/encoder.hpp"

using namespace indivaid;

namespace {

// Scalar TrainConfig fields exposed as --<name>; only given flags override
// the config file.
template <typename T>
void config_flag(CLI::App* app, nlohmann::json& overrides, const std::string& name, const std::string& help) {
  app->add_option_function<T>("--" + name, [&overrides, name](const T& v) { overrides[name] = v; }, help);
}

}  // namespace

int main(int argc, char** argv) {
  std::ostringstream command_line;
  for (int i = 0; i < argc; ++i) command_line << (i ? " " : "") << argv[i];

  CLI::App app{"Individual re-identification with learned identity descriptions"};
  app.require_subcommand(1);
  std::optional<std::uint64_t> seed;

  PrepareOptions prep;
  auto* prepare = app.add_subcommand("prepare", "Scan a dataset and write its summary");
  prepare->add_option("--root", prep.root, "Dataset root or manifest CSV")->required();
  prepare->add_option("--out", prep.out, "Summary JSON path")->required();

  TrainOptions train;
  std::string species, backend;
  int embed_dim = 0;
  auto* tr = app.add_subcommand("train", "Run one training stage");
  tr->add_option("--stage", train.stage, "1 or 2")->required();
  tr->add_option("--config", train.config, "TrainConfig JSON");
  tr->add_option("--root", train.root, "Dataset root")->required();
  tr->add_option("--out", train.out, "Checkpoint directory")->required();
  tr->add_option("--init", train.init, "Stage-one checkpoint (stage 2)");
  tr->add_option("--resume", train.resume, "Checkpoint of the same stage to continue");
  tr->add_option("--seed", seed, "Random seed (default 0)");
  tr->add_option("--species", species, "Species word for prompt initialization (default animal)");
  tr->add_option("--backend", backend, "toy or pretrained");
  tr->add_option("--embed_dim", embed_dim, "Toy backend embedding width");
  config_flag<int>(tr, train.overrides, "epochs", "Epochs of this stage");
  config_flag<double>(tr, train.overrides, "stage1_lr", "Stage-one base learning rate");
  config_flag<int>(tr, train.overrides, "stage1_batch_size", "Stage-one batch size");
  config_flag<double>(tr, train.overrides, "stage2_lr_start", "Stage-two warmup start rate");
  config_flag<double>(tr, train.overrides, "stage2_lr_peak", "Stage-two rate after warmup");
  config_flag<int>(tr, train.overrides, "warmup_epochs", "Stage-two warmup epochs");
  config_flag<double>(tr, train.overrides, "decay_factor", "Stage-two step decay factor");
  config_flag<std::vector<int>>(tr, train.overrides, "decay_epochs", "Stage-two decay epochs");
  config_flag<double>(tr, train.overrides, "tau", "Triplet margin");
  config_flag<double>(tr, train.overrides, "epsilon", "Label smoothing");
  config_flag<int>(tr, train.overrides, "I", "Identities per batch");
  config_flag<int>(tr, train.overrides, "K", "Images per identity");
  config_flag<std::vector<std::string>>(tr, train.overrides, "loss_flags", "Stage-two loss terms");
  config_flag<std::string>(tr, train.overrides, "mode", "indivaid, clip_ft or clip_zs");
  tr->add_flag_function(
      "--validate_each_epoch", [&train](std::int64_t) { train.overrides["validate_each_epoch"] = true; },
      "Evaluate after every stage-two epoch and keep the best");

  EvalOptions ev;
  auto* eval = app.add_subcommand("eval", "Evaluate gallery/query retrieval");
  eval->add_option("--checkpoint", ev.checkpoints, "Checkpoint directory (repeat to aggregate runs)");
  eval->add_option("--config", ev.config, "TrainConfig JSON; alone it means zero-shot evaluation");
  eval->add_option("--root", ev.root, "Dataset root")->required();
  eval->add_option("--out", ev.out, "Report JSON path")->required();
  eval->add_option("--per_query_csv", ev.per_query_csv, "Per-query AP CSV");
  eval->add_option("--runs", ev.runs, "Number of runs to aggregate");
  eval->add_option("--seed", seed, "Random seed (default 0)");

  EmbedOptions em;
  auto* embed = app.add_subcommand("embed", "Export unit-normalized image embeddings");
  embed->add_option("--checkpoint", em.checkpoint, "Checkpoint directory");
  embed->add_option("--config", em.config, "TrainConfig JSON for the frozen backbone");
  embed->add_option("--image_list", em.image_list, "Text file with one image path per line");
  embed->add_option("images", em.images, "Image paths");
  embed->add_option("--out", em.out, "Embedding file")->required();
  embed->add_option("--seed", seed, "Random seed (default 0)");

  RankOptions rk;
  auto* rank = app.add_subcommand("rank", "Rank gallery embeddings for each query");
  rank->add_option("--query", rk.query, "Query embedding file")->required();
  rank->add_option("--gallery", rk.gallery, "Gallery embedding file")->required();
  rank->add_option("--top", rk.top, "Results per query");
  rank->add_option("--out", rk.out, "CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << nlohmann::json{{"error", "input"}, {"code", kExitInput}, {"message", e.what()}}.dump()
              << std::endl;
    return kExitInput;
  }

  const std::string cl = command_line.str();
  return run_guarded([&] {
    if (*prepare) {
      cmd_prepare(prep);
    } else if (*tr) {
      train.seed = seed;
      train.command_line = cl;
      if (!species.empty()) train.overrides["prompt"] = {{"species", species}};
      if (!backend.empty() || embed_dim > 0) {
        if (backend == "pretrained") {
          train.overrides["encoder"] = to_json(pretrained_config());
        } else if (backend.empty() || backend == "toy") {
          train.overrides["encoder"] = to_json(toy_config(embed_dim > 0 ? embed_dim : 32, seed.value_or(0)));
        } else {
          throw InputError("unknown backend " + backend);
        }
      }
      cmd_train(train);
    } else if (*eval) {
      ev.seed = seed;
      ev.command_line = cl;
      cmd_eval(ev);
    } else if (*embed) {
      em.seed = seed;
      em.command_line = cl;
      cmd_embed(em);
    } else if (*rank) {
      rk.command_line = cl;
      cmd_rank(rk);
    }
  });
}
