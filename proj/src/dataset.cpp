#include "indivaid/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "indivaid/common.hpp"

namespace fs = std::filesystem;

namespace indivaid {

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::gallery: return "gallery";
    case Split::query: return "query";
  }
  return "unknown";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "gallery") return Split::gallery;
  if (name == "query") return Split::query;
  throw InputError("unknown split '" + std::string(name) + "'");
}

IdentityIndex::IdentityIndex(std::vector<std::string> labels) {
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  backward_ = std::move(labels);
  for (int i = 0; i < static_cast<int>(backward_.size()); ++i) forward_[backward_[i]] = i;
}

int IdentityIndex::at(const std::string& source_id) const {
  auto it = forward_.find(source_id);
  if (it == forward_.end()) throw InputError("unknown identity '" + source_id + "'");
  return it->second;
}

bool IdentityIndex::contains(const std::string& source_id) const {
  return forward_.count(source_id) > 0;
}

const std::string& IdentityIndex::label(int index) const {
  if (index < 0 || index >= size())
    throw InputError("identity index " + std::to_string(index) + " out of range");
  return backward_[index];
}

std::vector<ImageRecord> DatasetScan::split(Split which) const {
  std::vector<ImageRecord> out;
  for (const auto& r : records)
    if (r.split == which) out.push_back(r);
  return out;
}

bool has_image_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  static const std::set<std::string> known = {".jpg", ".jpeg", ".png", ".bmp",
                                              ".tif", ".tiff", ".webp", ".ppm", ".pgm"};
  return known.count(ext) > 0;
}

namespace {

struct RawRecord {
  fs::path path;
  std::string source_id;
  Split split;
};

void finalize(std::vector<RawRecord> raw, DatasetScan& scan) {
  std::sort(raw.begin(), raw.end(),
            [](const RawRecord& a, const RawRecord& b) { return a.path < b.path; });
  std::vector<std::string> train_ids, test_ids;
  for (const auto& r : raw)
    (r.split == Split::train ? train_ids : test_ids).push_back(r.source_id);
  scan.train_index = IdentityIndex(train_ids);
  scan.test_index = IdentityIndex(test_ids);
  if (scan.train_index.size() == 0) throw InputError("no train identities");
  for (auto& r : raw) {
    ImageRecord rec;
    rec.path = std::move(r.path);
    rec.split = r.split;
    rec.source_id = r.source_id;
    rec.identity = r.split == Split::train ? scan.train_index.at(r.source_id)
                                           : scan.test_index.at(r.source_id);
    scan.records.push_back(std::move(rec));
  }
}

void note(DatasetScan& scan, std::string message) {
  warn(message);
  scan.warnings.push_back(std::move(message));
}

std::vector<std::string> parse_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

}  // namespace

DatasetScan scan_manifest(const fs::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw InputError("cannot open manifest " + manifest.string());
  std::string line;
  if (!std::getline(in, line)) throw InputError("empty manifest " + manifest.string());
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  auto header = parse_csv_line(line);
  if (header != std::vector<std::string>{"path", "identity", "split"})
    throw InputError("manifest header must be 'path,identity,split'");

  DatasetScan scan;
  std::vector<RawRecord> raw;
  const fs::path base = manifest.parent_path();
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto f = parse_csv_line(line);
    if (f.size() != 3)
      throw InputError("manifest line " + std::to_string(line_no) + ": expected 3 fields");
    fs::path p = base / f[0];
    if (!has_image_extension(p)) {
      note(scan, "excluding " + p.string() + ": unsupported image extension");
      continue;
    }
    raw.push_back({p, f[1], parse_split(f[2])});
  }
  finalize(std::move(raw), scan);
  return scan;
}

DatasetScan scan_dataset(const fs::path& root) {
  if (fs::is_regular_file(root)) return scan_manifest(root);
  if (!fs::is_directory(root)) throw InputError("dataset root " + root.string() + " is not a directory");

  const bool has_splits = fs::is_directory(root / "train") || fs::is_directory(root / "gallery") ||
                          fs::is_directory(root / "query");
  if (!has_splits && fs::is_regular_file(root / "manifest.csv"))
    return scan_manifest(root / "manifest.csv");

  DatasetScan scan;
  std::vector<RawRecord> raw;
  for (Split split : {Split::train, Split::gallery, Split::query}) {
    fs::path dir = root / std::string(to_string(split));
    if (!fs::is_directory(dir)) throw InputError("missing split directory " + dir.string());

    std::vector<fs::path> identities;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_directory()) identities.push_back(e.path());
    std::sort(identities.begin(), identities.end());

    for (const auto& id_dir : identities) {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(id_dir)) {
        if (!e.is_regular_file()) continue;
        if (has_image_extension(e.path()))
          files.push_back(e.path());
        else
          note(scan, "excluding " + e.path().string() + ": unsupported image extension");
      }
      if (files.empty()) {
        note(scan, "skipping identity " + id_dir.string() + ": no images");
        continue;
      }
      for (auto& f : files) raw.push_back({f, id_dir.filename().string(), split});
    }
  }
  finalize(std::move(raw), scan);
  return scan;
}

nlohmann::json dataset_summary(const DatasetScan& scan) {
  nlohmann::json out;
  std::map<std::string, int> per_split_images;
  std::map<std::string, std::set<std::string>> per_split_ids;
  std::map<std::string, std::map<std::string, int>> per_identity;
  std::set<std::string> all_ids;
  for (const auto& r : scan.records) {
    std::string s(to_string(r.split));
    per_split_images[s]++;
    per_split_ids[s].insert(r.source_id);
    per_identity[s][r.source_id]++;
    all_ids.insert(s == "train" ? "train/" + r.source_id : "test/" + r.source_id);
  }
  for (std::string s : {"train", "gallery", "query"}) {
    out["splits"][s] = {{"images", per_split_images[s]},
                        {"ids", static_cast<int>(per_split_ids[s].size())}};
    out["identities"][s] = per_identity[s];
  }
  out["total"] = {{"images", static_cast<int>(scan.records.size())},
                  {"ids", static_cast<int>(all_ids.size())}};
  out["warnings"] = scan.warnings;
  return out;
}

}  // namespace indivaid
