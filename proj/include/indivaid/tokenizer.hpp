#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace indivaid {

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  // Token ids for `text`, without start/end markers.
  virtual std::vector<int64_t> encode(std::string_view text) const = 0;
  virtual int64_t start_id() const = 0;
  virtual int64_t end_id() const = 0;
  virtual int64_t pad_id() const = 0;
};

// Lower-cases, splits into words and punctuation marks, and hashes each
// piece into [3, vocab_size). Ids 0, 1, 2 are pad, start, end.
class HashTokenizer final : public Tokenizer {
 public:
  explicit HashTokenizer(int64_t vocab_size);
  std::vector<int64_t> encode(std::string_view text) const override;
  int64_t start_id() const override { return 1; }
  int64_t end_id() const override { return 2; }
  int64_t pad_id() const override { return 0; }

 private:
  int64_t vocab_size_;
};

// Byte-level BPE with the merge table of the pretrained text encoder
// (bpe_simple_vocab_16e6.txt, optionally gzip-compressed). Text is
// lower-cased and whitespace-collapsed; non-ASCII bytes are treated as
// letters by the pre-tokenizer.
class BpeTokenizer final : public Tokenizer {
 public:
  // `max_merges` limits how many merge rules are read; the pretrained
  // vocabulary uses 49152 - 256 - 2.
  explicit BpeTokenizer(const std::filesystem::path& merges_file, int max_merges = 48894);
  BpeTokenizer(std::vector<std::pair<std::string, std::string>> merges);

  std::vector<int64_t> encode(std::string_view text) const override;
  int64_t start_id() const override { return start_id_; }
  int64_t end_id() const override { return end_id_; }
  int64_t pad_id() const override { return 0; }
  int64_t vocab_size() const { return static_cast<int64_t>(encoder_.size()); }

  // Pre-tokenizer pieces, exposed for tests.
  static std::vector<std::string> split_words(std::string_view text);

 private:
  void build(std::vector<std::pair<std::string, std::string>> merges);
  std::vector<std::string> bpe(const std::string& word) const;

  std::vector<std::string> byte_encoder_;  // byte -> unicode string (UTF-8)
  std::unordered_map<std::string, int64_t> encoder_;
  std::map<std::pair<std::string, std::string>, int> ranks_;
  int64_t start_id_ = 0;
  int64_t end_id_ = 0;
};

}  // namespace indivaid
