#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace indivaid {

enum class Split { train, gallery, query };

std::string_view to_string(Split split);
Split parse_split(std::string_view name);

struct ImageRecord {
  std::filesystem::path path;
  // Index into the train identity space for train records, into the shared
  // gallery/query space otherwise.
  int identity = -1;
  Split split = Split::train;
  std::string source_id;
};

// Bijection between original string labels and contiguous integers 0..N-1.
class IdentityIndex {
 public:
  IdentityIndex() = default;
  // Labels are sorted and de-duplicated before indexing.
  explicit IdentityIndex(std::vector<std::string> labels);

  int at(const std::string& source_id) const;
  bool contains(const std::string& source_id) const;
  const std::string& label(int index) const;
  int size() const { return static_cast<int>(backward_.size()); }
  const std::vector<std::string>& labels() const { return backward_; }

  bool operator==(const IdentityIndex&) const = default;

 private:
  std::map<std::string, int> forward_;
  std::vector<std::string> backward_;
};

struct DatasetScan {
  std::vector<ImageRecord> records;  // sorted by path
  IdentityIndex train_index;
  IdentityIndex test_index;  // shared by gallery and query
  std::vector<std::string> warnings;

  std::vector<ImageRecord> split(Split which) const;
};

bool has_image_extension(const std::filesystem::path& p);

// Reads root/{train,gallery,query}/{identity}/{image}, or a CSV manifest
// (`path,identity,split`) when `root` is a .csv file or a directory holding
// manifest.csv without the split directories.
DatasetScan scan_dataset(const std::filesystem::path& root);
DatasetScan scan_manifest(const std::filesystem::path& manifest);

// Per-split image and identity counts, laid out like the usual
// Train/Gallery/Query/Total summary table.
nlohmann::json dataset_summary(const DatasetScan& scan);

}  // namespace indivaid
