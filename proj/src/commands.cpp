#include "indivaid/commands.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include "indivaid/common.hpp"
#include "indivaid/config.hpp"
#include "indivaid/dataset.hpp"
#include "indivaid/embeddings.hpp"
#include "indivaid/evaluate.hpp"
#include "indivaid/image.hpp"
#include "indivaid/metrics.hpp"
#include "indivaid/model.hpp"
#include "indivaid/train.hpp"

namespace fs = std::filesystem;

namespace indivaid {

namespace {

std::string utc_now() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out << text;
}

// Provenance record written next to every artifact. Parents are the
// manifests of input checkpoints, when they have one.
struct RunManifest {
  std::string command;
  std::string config_hash;
  std::string dataset_root;
  std::vector<fs::path> inputs;
  fs::path output;
  std::uint64_t seed = 0;
  std::string started = utc_now();

  void write(const fs::path& where) const {
    nlohmann::json parents = nlohmann::json::array();
    std::vector<std::string> input_names;
    for (const auto& in : inputs) {
      input_names.push_back(in.string());
      const fs::path m = fs::is_directory(in) ? in / "run_manifest.json" : fs::path(in.string() + ".manifest.json");
      if (fs::exists(m)) {
        std::ifstream f(m);
        nlohmann::json pj;
        f >> pj;
        parents.push_back(pj);
      }
    }
    nlohmann::json j = {{"command", command},   {"config_hash", config_hash}, {"dataset_root", dataset_root},
                        {"inputs", input_names}, {"output", output.string()}, {"seed", seed},
                        {"started", started},   {"finished", utc_now()},     {"parents", parents}};
    write_text(where, j.dump(2) + "\n");
  }
};

// Encoder shapes must agree; weight paths may differ between machines.
void require_same_shape(EncoderConfig a, EncoderConfig b) {
  a.weights = b.weights = "";
  a.bpe_vocab = b.bpe_vocab = "";
  if (!(a == b))
    throw InputError("encoder dimensions of checkpoint and config differ: " + to_json(a).dump() + " vs " +
                     to_json(b).dump());
}

TrainConfig apply_overrides(TrainConfig config, const nlohmann::json& overrides) {
  auto j = to_json(config);
  j.merge_patch(overrides);
  return train_config_from_json(j);
}

std::vector<fs::path> read_image_list(const fs::path& list) {
  std::ifstream in(list);
  if (!in) throw InputError("cannot open image list " + list.string());
  std::vector<fs::path> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.emplace_back(line);
  }
  return out;
}

}  // namespace

fs::path cmd_prepare(const PrepareOptions& o) {
  auto scan = scan_dataset(o.root);
  auto summary = dataset_summary(scan);
  write_text(o.out, summary.dump(2) + "\n");
  return o.out;
}

fs::path cmd_train(const TrainOptions& o) {
  RunManifest manifest;
  manifest.command = o.command_line;
  if (o.stage != 1 && o.stage != 2) throw InputError("--stage must be 1 or 2");
  TrainConfig config = o.config.empty() ? TrainConfig{} : load_train_config(o.config);
  nlohmann::json overrides = o.overrides;
  overrides["stage"] = o.stage;
  overrides["seed"] = o.seed.value_or(config.seed);
  config = apply_overrides(config, overrides);
  if (config.mode == Mode::clip_zs) throw InputError("zero-shot mode has no training");
  if (o.stage == 1 && config.mode != Mode::indivaid)
    throw InputError("stage one trains the prompt generator and only applies to mode indivaid");
  if (o.out.empty()) throw InputError("--out is required");

  auto scan = scan_dataset(o.root);
  ImageCache images(config.encoder.image_size);
  RunOptions run;
  run.checkpoint_dir = o.out;

  ReidModel model;
  if (!o.resume.empty()) {
    auto loaded = load_checkpoint(o.resume);
    if (loaded.model.stage != o.stage)
      throw InputError("--resume checkpoint is from stage " + std::to_string(loaded.model.stage));
    require_same_shape(loaded.model.config.encoder, config.encoder);
    model = std::move(loaded.model);
    if (loaded.extra.count("optimizer")) run.optimizer_state = loaded.extra["optimizer"];
    if (loaded.extra.count("description_bank")) run.description_bank = loaded.extra["description_bank"];
    manifest.inputs.push_back(o.resume);
  } else if (o.stage == 2 && config.mode == Mode::indivaid) {
    if (o.init.empty() || !fs::exists(o.init / "meta.json"))
      throw InputError("stage two needs a stage-one checkpoint; missing " +
                       (o.init.empty() ? std::string("--init") : (o.init / "meta.json").string()));
    auto loaded = load_checkpoint(o.init);
    if (loaded.model.stage != 1) throw InputError("--init must point at a stage-one checkpoint");
    require_same_shape(loaded.model.config.encoder, config.encoder);
    model = std::move(loaded.model);
    manifest.inputs.push_back(o.init);
  } else {
    model = create_model(config, scan.train_index);
  }
  model.config = config;
  // Bit-reproducible runs on the toy backend need a fixed reduction order.
  if (config.encoder.backend == Backend::toy) torch::set_num_threads(1);

  fs::create_directories(o.out);
  std::ofstream log(o.out / "train_log.jsonl", std::ios::trunc);
  run.on_log = [&log](const nlohmann::json& record) { log << record.dump() << '\n'; };
  if (o.stage == 1)
    run_stage1(config, scan, model, images, run);
  else if (config.mode == Mode::indivaid)
    run_stage2(config, scan, model, images, run);
  else
    run_baseline(config, scan, model, images, run);

  manifest.config_hash = config_hash(config);
  manifest.dataset_root = o.root.string();
  manifest.output = o.out;
  manifest.seed = config.seed;
  manifest.write(o.out / "run_manifest.json");
  return o.out;
}

fs::path cmd_eval(const EvalOptions& o) {
  RunManifest manifest;
  manifest.command = o.command_line;
  if (o.out.empty()) throw InputError("--out is required");
  std::optional<TrainConfig> config;
  if (!o.config.empty()) config = load_train_config(o.config);
  if (o.checkpoints.empty() && !config) throw InputError("eval needs --checkpoint or --config (zero-shot)");

  auto scan = scan_dataset(o.root);
  int runs = o.runs;
  if (runs < 1) throw InputError("--runs must be positive");
  if (runs > 1 && o.checkpoints.size() <= 1) {
    warn("evaluation of a fixed checkpoint is deterministic; forcing runs=1");
    runs = 1;
  }

  std::vector<MetricsReport> reports;
  if (o.checkpoints.empty()) {
    // Zero-shot: the frozen backbone, nothing else.
    auto encoder = make_encoder(config->encoder);
    ImageCache images(config->encoder.image_size);
    reports.push_back(evaluate(*encoder, scan, images));
    manifest.config_hash = config_hash(*config);
    manifest.seed = o.seed.value_or(config->seed);
  } else {
    for (const auto& ckpt : o.checkpoints) {
      auto loaded = load_checkpoint(ckpt);
      if (config) require_same_shape(loaded.model.config.encoder, config->encoder);
      ImageCache images(loaded.model.config.encoder.image_size);
      reports.push_back(evaluate(*loaded.model.encoder, scan, images));
      manifest.inputs.push_back(ckpt);
      manifest.config_hash = loaded.meta.value("config_hash", "");
      manifest.seed = o.seed.value_or(loaded.model.config.seed);
    }
  }
  MetricsReport report = reports.size() > 1 ? aggregate_runs(reports) : reports.front();
  write_text(o.out, to_json(report).dump(2) + "\n");
  if (!o.per_query_csv.empty()) {
    std::vector<std::string> qpaths;
    for (const auto& r : scan.split(Split::query)) qpaths.push_back(r.path.string());
    write_text(o.per_query_csv, per_query_csv(reports.front(), qpaths));
  }
  manifest.dataset_root = o.root.string();
  manifest.output = o.out;
  manifest.write(o.out.string() + ".manifest.json");
  return o.out;
}

fs::path cmd_embed(const EmbedOptions& o) {
  RunManifest manifest;
  manifest.command = o.command_line;
  if (o.out.empty()) throw InputError("--out is required");
  std::shared_ptr<Encoder> encoder;
  if (!o.checkpoint.empty()) {
    auto loaded = load_checkpoint(o.checkpoint);
    encoder = loaded.model.encoder;
    manifest.inputs.push_back(o.checkpoint);
    manifest.config_hash = loaded.meta.value("config_hash", "");
  } else if (!o.config.empty()) {
    auto config = load_train_config(o.config);
    encoder = make_encoder(config.encoder);
    manifest.config_hash = config_hash(config);
  } else {
    throw InputError("embed needs --checkpoint or --config");
  }

  std::vector<fs::path> paths = o.images;
  if (!o.image_list.empty())
    for (auto& p : read_image_list(o.image_list)) paths.push_back(std::move(p));
  if (paths.empty()) throw InputError("no images to embed");

  ImageCache images(encoder->config().image_size);
  std::vector<fs::path> ok;
  for (const auto& p : paths) {
    try {
      images.get(p);
      ok.push_back(p);
    } catch (const InputError& e) {
      warn(std::string("skipping unreadable image: ") + e.what());
    }
  }
  if (ok.empty()) throw InputError("none of the " + std::to_string(paths.size()) + " images could be read");

  EmbeddingFile file;
  for (const auto& p : ok) file.paths.push_back(p.string());
  file.features = embed_images(*encoder, ok, images);
  write_embeddings(o.out, file);
  manifest.output = o.out;
  manifest.seed = o.seed.value_or(0);
  manifest.write(o.out.string() + ".manifest.json");
  return o.out;
}

fs::path cmd_rank(const RankOptions& o) {
  if (o.top < 1) throw InputError("--top must be positive");
  if (o.out.empty()) throw InputError("--out is required");
  auto q = read_embeddings(o.query);
  auto g = read_embeddings(o.gallery);
  if (q.features.size(1) != g.features.size(1))
    throw InputError("query and gallery embeddings have different dims (" + std::to_string(q.features.size(1)) +
                     " vs " + std::to_string(g.features.size(1)) + ")");
  auto rankings = rank_gallery(q.features, g.features);
  std::ostringstream csv;
  csv.precision(9);
  csv << "query,rank,gallery,score\n";
  for (const auto& r : rankings) {
    const int n = std::min<int>(o.top, static_cast<int>(r.ordered_gallery.size()));
    for (int i = 0; i < n; ++i)
      csv << csv_escape(q.paths[r.query_index]) << ',' << i + 1 << ',' << csv_escape(g.paths[r.ordered_gallery[i]])
          << ',' << r.scores[i] << '\n';
  }
  write_text(o.out, csv.str());
  RunManifest manifest;
  manifest.command = o.command_line;
  manifest.inputs = {o.query, o.gallery};
  manifest.output = o.out;
  manifest.write(o.out.string() + ".manifest.json");
  return o.out;
}

int run_guarded(const std::function<void()>& fn) {
  auto report = [](const char* kind, int code, const std::string& message) {
    std::cerr << nlohmann::json{{"error", kind}, {"code", code}, {"message", message}}.dump() << std::endl;
    return code;
  };
  try {
    fn();
    return kExitOk;
  } catch (const InputError& e) {
    return report("input", kExitInput, e.what());
  } catch (const std::exception& e) {
    return report("runtime", kExitRuntime, e.what());
  }
}

}  // namespace indivaid
