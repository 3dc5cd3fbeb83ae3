#include "support/testing.hpp"

#include <fstream>
#include <map>
#include <set>

#include "indivaid/augment.hpp"
#include "indivaid/common.hpp"
#include "indivaid/dataset.hpp"
#include "indivaid/image.hpp"
#include "indivaid/sampler.hpp"
#include "support/fixture.hpp"

using namespace indivaid;
namespace fs = std::filesystem;

namespace {

void touch_image(const fs::path& p, float value = 0.5f) {
  fs::create_directories(p.parent_path());
  save_image(p, torch::full({3, 8, 8}, value));
}

fixture::Spec five_identity_spec() {
  fixture::Spec s;
  s.closed_set = false;
  s.train_ids = 5;
  s.train_per_id = 5;
  s.test_ids = 5;
  s.gallery_per_id = 2;
  s.query_per_id = 2;
  return s;
}

std::vector<ImageRecord> records_with(const std::map<std::string, int>& counts) {
  std::vector<ImageRecord> out;
  std::vector<std::string> labels;
  for (const auto& [id, n] : counts) labels.push_back(id);
  IdentityIndex index(labels);
  for (const auto& [id, n] : counts)
    for (int k = 0; k < n; ++k) out.push_back({fs::path(id) / std::to_string(k), index.at(id), Split::train, id});
  return out;
}

}  // namespace

TEST_CASE("scan enumerates a small tree and indexes identities") {
  fixture::TempDir dir("scan");
  touch_image(dir / "train/a/1.jpg");
  touch_image(dir / "train/a/2.jpg");
  touch_image(dir / "train/b/1.jpg");
  fs::create_directories(dir / "gallery");
  fs::create_directories(dir / "query");
  auto scan = scan_dataset(dir.path());
  REQUIRE(scan.records.size() == 3);
  CHECK(scan.train_index.size() == 2);
  CHECK(scan.train_index.at("a") == 0);
  CHECK(scan.train_index.at("b") == 1);
  CHECK(scan.records[0].identity == 0);
  CHECK(scan.records[2].identity == 1);
}

TEST_CASE("scan errors on an empty train split and a missing split directory") {
  fixture::TempDir dir("empty");
  for (auto s : {"train", "gallery", "query"}) fs::create_directories(dir / s);
  CHECK_THROWS_WITH_AS(scan_dataset(dir.path()), doctest::Contains("no train identities"), InputError);

  fixture::TempDir bare("bare");
  CHECK_THROWS_WITH_AS(scan_dataset(bare.path()), doctest::Contains("train"), InputError);
}

TEST_CASE("scan counts the generated five-identity fixture") {
  fixture::TempDir dir("five");
  auto truth = fixture::generate(dir.path(), five_identity_spec());
  auto scan = scan_dataset(dir.path());
  CHECK(truth.train_images == 25);
  CHECK(truth.gallery_images + truth.query_images == 20);
  CHECK(scan.records.size() == static_cast<std::size_t>(truth.train_images + truth.gallery_images + truth.query_images));
  CHECK(scan.train_index.size() == truth.train_identities);
  CHECK(scan.test_index.size() == truth.test_identities);
  // Train and test label spaces are separate.
  for (const auto& label : scan.test_index.labels()) CHECK_FALSE(scan.train_index.contains(label));
}

TEST_CASE("scan skips empty identities and unknown extensions with warnings") {
  fixture::TempDir dir("warn");
  touch_image(dir / "train/a/1.png");
  touch_image(dir / "train/b/1.png");
  fs::create_directories(dir / "train/empty");
  std::ofstream(dir / "train/a/notes.txt") << "x";
  fs::create_directories(dir / "gallery");
  fs::create_directories(dir / "query");
  auto scan = scan_dataset(dir.path());
  CHECK(scan.records.size() == 2);
  CHECK(scan.train_index.size() == 2);
  CHECK(scan.warnings.size() == 2);
}

TEST_CASE("scan is deterministic and the summary is reproducible") {
  fixture::TempDir dir("det");
  fixture::generate(dir.path(), five_identity_spec());
  auto a = scan_dataset(dir.path());
  auto b = scan_dataset(dir.path());
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].path == b.records[i].path);
    CHECK(a.records[i].identity == b.records[i].identity);
  }
  for (std::size_t i = 1; i < a.records.size(); ++i) CHECK(a.records[i - 1].path < a.records[i].path);
  CHECK(dataset_summary(a).dump() == dataset_summary(b).dump());
  CHECK(dataset_summary(a)["splits"]["train"]["ids"] == 5);
}

TEST_CASE("manifest csv gives the same records as the directory layout") {
  fixture::TempDir dir("manifest");
  touch_image(dir / "img/x1.png");
  touch_image(dir / "img/x2.png");
  touch_image(dir / "img/y1.png");
  touch_image(dir / "img/q.png");
  touch_image(dir / "img/g.png");
  std::ofstream(dir / "list.csv") << "path,identity,split\n"
                                  << "img/x1.png,x,train\nimg/x2.png,x,train\nimg/y1.png,y,train\n"
                                  << "img/g.png,z,gallery\nimg/q.png,z,query\n";
  auto scan = scan_dataset(dir / "list.csv");
  CHECK(scan.records.size() == 5);
  CHECK(scan.train_index.size() == 2);
  CHECK(scan.split(Split::query).size() == 1);
  CHECK(scan.split(Split::gallery)[0].path == dir / "img/g.png");

  std::ofstream(dir / "bad.csv") << "path,identity\nimg/x1.png,x\n";
  CHECK_THROWS_AS(scan_dataset(dir / "bad.csv"), InputError);
}

TEST_CASE("identity index is a bijection onto 0..N-1") {
  IdentityIndex index({"c", "a", "b", "a"});
  REQUIRE(index.size() == 3);
  for (int i = 0; i < index.size(); ++i) CHECK(index.at(index.label(i)) == i);
  CHECK(index.label(0) == "a");
  CHECK_THROWS_AS(index.at("zzz"), InputError);
}

TEST_CASE("batches hold I identities with K records each") {
  auto records = records_with({{"A", 3}, {"B", 2}});
  auto plan = make_batches(records, 2, 2, 7);
  REQUIRE_FALSE(plan.batches.empty());
  for (const auto& batch : plan.batches) {
    CHECK(batch.size() == 4);
    std::map<int, int> per_id;
    for (int i : batch) per_id[records[i].identity]++;
    CHECK(per_id.size() == 2);
    for (auto [id, n] : per_id) CHECK(n == 2);
  }
}

TEST_CASE("batch plans cover every identity and are a pure function of the seed") {
  auto records = records_with({{"a", 5}, {"b", 1}, {"c", 7}, {"d", 4}, {"e", 2}});
  for (std::uint64_t seed : {0ULL, 1ULL, 99ULL}) {
    auto plan = make_batches(records, 3, 2, seed);
    std::set<int> seen;
    for (const auto& batch : plan.batches) {
      CHECK(batch.size() == 6);
      std::map<int, int> per_id;
      for (int i : batch) per_id[records[i].identity]++;
      CHECK(per_id.size() == 3);
      for (auto [id, n] : per_id) {
        CHECK(n == 2);
        seen.insert(id);
      }
    }
    CHECK(seen.size() == 5);
    CHECK(make_batches(records, 3, 2, seed) == plan);
    CHECK(batch_plan_from_json(to_json(plan)) == plan);
  }
  CHECK_FALSE(make_batches(records, 3, 2, 0) == make_batches(records, 3, 2, 1));
}

TEST_CASE("batch preconditions") {
  auto one = records_with({{"a", 4}});
  CHECK_THROWS_AS(make_batches(one, 2, 2, 0), InputError);
  auto two = records_with({{"a", 4}, {"b", 4}});
  CHECK_THROWS_WITH_AS(make_batches(two, 1, 2, 0), doctest::Contains("triplet"), InputError);
  CHECK_THROWS_WITH_AS(make_batches(two, 2, 1, 0), doctest::Contains("triplet"), InputError);
}

TEST_CASE("augment identity configuration, forced flip and determinism") {
  auto image = torch::rand({3, 16, 16}, torch::TensorOptions().dtype(torch::kFloat32));
  std::mt19937_64 rng(3);
  AugmentConfig none;
  none.flip_prob = 0;
  none.erase_prob = 0;
  none.pad = 0;
  CHECK(torch::equal(augment(image, none, rng), image));

  AugmentConfig flip = none;
  flip.flip_prob = 1;
  CHECK(torch::equal(augment(image, flip, rng), image.flip({2})));

  AugmentConfig full;
  std::mt19937_64 r1(11), r2(11);
  auto a = augment(image, full, r1);
  auto b = augment(image, full, r2);
  CHECK(a.sizes() == image.sizes());
  CHECK(torch::equal(a, b));
}

TEST_CASE("augment with padding but no flip or erase is a shifted window of the padded image") {
  auto image = torch::rand({3, 12, 12});
  AugmentConfig cfg;
  cfg.flip_prob = 0;
  cfg.erase_prob = 0;
  cfg.pad = 3;
  std::mt19937_64 rng(5);
  auto padded = torch::nn::functional::pad(image.unsqueeze(0), torch::nn::functional::PadFuncOptions({3, 3, 3, 3})
                                                                    .mode(torch::kReflect))
                    .squeeze(0);
  for (int trial = 0; trial < 10; ++trial) {
    auto out = augment(image, cfg, rng);
    bool found = false;
    for (int y = 0; y <= 6 && !found; ++y)
      for (int x = 0; x <= 6 && !found; ++x)
        found = torch::equal(out, padded.slice(1, y, y + 12).slice(2, x, x + 12));
    CHECK(found);
  }
}
