#include "indivaid/tokenizer.hpp"

#include <zlib.h>

#include <cctype>
#include <fstream>
#include <limits>
#include <sstream>

#include "indivaid/common.hpp"

namespace indivaid {

namespace {

bool is_letter(unsigned char c) { return std::isalpha(c) || c >= 0x80; }

std::string utf8(uint32_t cp) {
  std::string s;
  if (cp < 0x80) {
    s += static_cast<char>(cp);
  } else if (cp < 0x800) {
    s += static_cast<char>(0xC0 | (cp >> 6));
    s += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    s += static_cast<char>(0xE0 | (cp >> 12));
    s += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    s += static_cast<char>(0x80 | (cp & 0x3F));
  }
  return s;
}

// Splits a UTF-8 string into code-point substrings.
std::vector<std::string> code_points(const std::string& s) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < s.size();) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : 4;
    out.push_back(s.substr(i, len));
    i += len;
  }
  return out;
}

std::string read_maybe_gzip(const std::filesystem::path& path) {
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (!f) throw InputError("cannot open BPE merges file " + path.string());
  std::string out;
  char buf[1 << 16];
  int n;
  while ((n = gzread(f, buf, sizeof buf)) > 0) out.append(buf, n);
  gzclose(f);
  return out;
}

}  // namespace

HashTokenizer::HashTokenizer(int64_t vocab_size) : vocab_size_(vocab_size) {
  if (vocab_size <= 3) throw InputError("toy vocabulary needs more than 3 entries");
}

std::vector<int64_t> HashTokenizer::encode(std::string_view text) const {
  std::vector<int64_t> ids;
  for (const auto& w : BpeTokenizer::split_words(text))
    ids.push_back(3 + static_cast<int64_t>(fnv1a64(w) % static_cast<uint64_t>(vocab_size_ - 3)));
  return ids;
}

std::vector<std::string> BpeTokenizer::split_words(std::string_view text) {
  // Lower-case and collapse whitespace, then split like the reference
  // pattern: contractions, letter runs, single digits, other symbol runs.
  std::string s;
  for (char c : text) s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    if (c == '\'') {
      for (std::string_view suffix : {"'s", "'t", "'re", "'ve", "'m", "'ll", "'d"}) {
        if (s.compare(i, suffix.size(), suffix) == 0) {
          out.emplace_back(suffix);
          i += suffix.size();
          goto next;
        }
      }
    }
    if (is_letter(c)) {
      std::size_t j = i;
      while (j < s.size() && is_letter(static_cast<unsigned char>(s[j]))) ++j;
      out.push_back(s.substr(i, j - i));
      i = j;
    } else if (std::isdigit(c)) {
      out.push_back(s.substr(i, 1));
      ++i;
    } else {
      std::size_t j = i;
      while (j < s.size()) {
        unsigned char d = static_cast<unsigned char>(s[j]);
        if (std::isspace(d) || is_letter(d) || std::isdigit(d)) break;
        ++j;
      }
      out.push_back(s.substr(i, j - i));
      i = j;
    }
  next:;
  }
  return out;
}

BpeTokenizer::BpeTokenizer(const std::filesystem::path& merges_file, int max_merges) {
  std::istringstream in(read_maybe_gzip(merges_file));
  std::string line;
  std::getline(in, line);  // version header
  std::vector<std::pair<std::string, std::string>> merges;
  while (static_cast<int>(merges.size()) < max_merges && std::getline(in, line)) {
    auto sp = line.find(' ');
    if (sp == std::string::npos) continue;
    merges.emplace_back(line.substr(0, sp), line.substr(sp + 1));
  }
  build(std::move(merges));
}

BpeTokenizer::BpeTokenizer(std::vector<std::pair<std::string, std::string>> merges) {
  build(std::move(merges));
}

void BpeTokenizer::build(std::vector<std::pair<std::string, std::string>> merges) {
  // Reversible byte -> printable code point table.
  std::vector<int> printable;
  for (int b = '!'; b <= '~'; ++b) printable.push_back(b);
  for (int b = 0xA1; b <= 0xAC; ++b) printable.push_back(b);
  for (int b = 0xAE; b <= 0xFF; ++b) printable.push_back(b);
  byte_encoder_.assign(256, {});
  std::vector<bool> seen(256, false);
  for (int b : printable) {
    byte_encoder_[b] = utf8(static_cast<uint32_t>(b));
    seen[b] = true;
  }
  int extra = 0;
  for (int b = 0; b < 256; ++b)
    if (!seen[b]) byte_encoder_[b] = utf8(static_cast<uint32_t>(256 + extra++));

  // Vocabulary order: bytes in table order, the same with end-of-word
  // marker, merged pairs, then the two special tokens.
  std::vector<std::string> vocab;
  std::vector<int> order = printable;
  for (int b = 0; b < 256; ++b)
    if (!seen[b]) order.push_back(b);
  for (int b : order) vocab.push_back(byte_encoder_[b]);
  for (int b : order) vocab.push_back(byte_encoder_[b] + "</w>");
  for (int r = 0; r < static_cast<int>(merges.size()); ++r) {
    vocab.push_back(merges[r].first + merges[r].second);
    ranks_[merges[r]] = r;
  }
  vocab.push_back("<|startoftext|>");
  vocab.push_back("<|endoftext|>");
  for (int64_t i = 0; i < static_cast<int64_t>(vocab.size()); ++i) encoder_.emplace(vocab[i], i);
  start_id_ = encoder_.at("<|startoftext|>");
  end_id_ = encoder_.at("<|endoftext|>");
}

std::vector<std::string> BpeTokenizer::bpe(const std::string& word) const {
  std::vector<std::string> parts = code_points(word);
  if (parts.empty()) return parts;
  parts.back() += "</w>";
  while (parts.size() > 1) {
    int best = std::numeric_limits<int>::max();
    std::size_t at = 0;
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
      auto it = ranks_.find({parts[i], parts[i + 1]});
      if (it != ranks_.end() && it->second < best) {
        best = it->second;
        at = i;
      }
    }
    if (best == std::numeric_limits<int>::max()) break;
    const std::string first = parts[at], second = parts[at + 1];
    std::vector<std::string> merged;
    for (std::size_t i = 0; i < parts.size();) {
      if (i + 1 < parts.size() && parts[i] == first && parts[i + 1] == second) {
        merged.push_back(first + second);
        i += 2;
      } else {
        merged.push_back(parts[i++]);
      }
    }
    parts = std::move(merged);
  }
  return parts;
}

std::vector<int64_t> BpeTokenizer::encode(std::string_view text) const {
  std::vector<int64_t> ids;
  for (const auto& word : split_words(text)) {
    std::string mapped;
    for (unsigned char b : word) mapped += byte_encoder_[b];
    for (const auto& piece : bpe(mapped)) {
      auto it = encoder_.find(piece);
      if (it == encoder_.end()) throw InputError("BPE piece '" + piece + "' not in vocabulary");
      ids.push_back(it->second);
    }
  }
  return ids;
}

}  // namespace indivaid
