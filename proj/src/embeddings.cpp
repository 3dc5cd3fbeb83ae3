#include "indivaid/embeddings.hpp"

#include <fstream>

#include <json.hpp>

#include "indivaid/common.hpp"

namespace indivaid {

void write_embeddings(const std::filesystem::path& out, const EmbeddingFile& file) {
  auto f = file.features.detach().to(torch::kFloat32).contiguous();
  if (f.dim() != 2 || f.size(0) != static_cast<int64_t>(file.paths.size()))
    throw InputError("embedding file: one feature row per path required");
  auto* bytes = static_cast<const std::byte*>(f.data_ptr());
  nlohmann::json header = {{"format", "indivaid-embeddings"},
                           {"dim", f.size(1)},
                           {"count", f.size(0)},
                           {"dtype", "float32"},
                           {"checksum", hex64(fnv1a64(std::span(bytes, f.nbytes())))},
                           {"paths", file.paths}};
  std::ofstream o(out, std::ios::binary | std::ios::trunc);
  if (!o) throw RuntimeFailure("cannot write " + out.string());
  o << header.dump() << '\n';
  o.write(reinterpret_cast<const char*>(bytes), static_cast<std::streamsize>(f.nbytes()));
}

EmbeddingFile read_embeddings(const std::filesystem::path& in) {
  std::ifstream i(in, std::ios::binary);
  if (!i) throw InputError("cannot open embedding file " + in.string());
  std::string line;
  std::getline(i, line);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception&) {
    throw InputError(in.string() + " is not an embedding file");
  }
  if (header.value("format", "") != "indivaid-embeddings")
    throw InputError(in.string() + " is not an embedding file");
  const int64_t dim = header.at("dim"), count = header.at("count");
  EmbeddingFile file;
  file.paths = header.at("paths").get<std::vector<std::string>>();
  file.features = torch::empty({count, dim}, torch::kFloat32);
  i.read(static_cast<char*>(file.features.data_ptr()), static_cast<std::streamsize>(file.features.nbytes()));
  if (!i) throw InputError("truncated embedding file " + in.string());
  auto* bytes = static_cast<const std::byte*>(file.features.data_ptr());
  if (hex64(fnv1a64(std::span(bytes, file.features.nbytes()))) != header.at("checksum").get<std::string>())
    throw InputError("checksum mismatch in " + in.string());
  return file;
}

}  // namespace indivaid
