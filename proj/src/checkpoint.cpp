#include "indivaid/checkpoint.hpp"

#include <bit>
#include <fstream>

#include "indivaid/common.hpp"

namespace indivaid {

namespace {

constexpr char kMagic[8] = {'I', 'V', 'A', 'D', 'P', 'G', '0', '1'};

int dtype_code(torch::Dtype d) {
  switch (d) {
    case torch::kFloat32: return 1;
    case torch::kFloat64: return 2;
    case torch::kInt64: return 3;
    case torch::kInt32: return 4;
    case torch::kBool: return 5;
    default: throw RuntimeFailure("unsupported tensor dtype in checkpoint");
  }
}

torch::Dtype code_dtype(int c) {
  switch (c) {
    case 1: return torch::kFloat32;
    case 2: return torch::kFloat64;
    case 3: return torch::kInt64;
    case 4: return torch::kInt32;
    case 5: return torch::kBool;
    default: throw RuntimeFailure("unknown dtype code in checkpoint");
  }
}

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <typename T>
T get(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof value);
  if (!in) throw RuntimeFailure("truncated checkpoint blob");
  return value;
}

}  // namespace

void write_tensor_blob(const std::filesystem::path& path, const TensorMap& tensors) {
  static_assert(std::endian::native == std::endian::little, "checkpoint format is little-endian");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  put<uint64_t>(out, tensors.size());
  for (const auto& [name, tensor] : tensors) {
    auto t = tensor.detach().contiguous().cpu();
    put<uint64_t>(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<int32_t>(out, dtype_code(t.scalar_type()));
    put<uint64_t>(out, static_cast<uint64_t>(t.dim()));
    for (auto s : t.sizes()) put<int64_t>(out, s);
    put<uint64_t>(out, t.nbytes());
    out.write(static_cast<const char*>(t.data_ptr()), static_cast<std::streamsize>(t.nbytes()));
  }
  if (!out) throw RuntimeFailure("failed writing " + path.string());
}

TensorMap read_tensor_blob(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint blob " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || !std::equal(magic, magic + 8, kMagic)) throw InputError(path.string() + " is not a parameter blob");
  TensorMap out;
  const auto count = get<uint64_t>(in);
  for (uint64_t i = 0; i < count; ++i) {
    std::string name(get<uint64_t>(in), '\0');
    in.read(name.data(), static_cast<std::streamsize>(name.size()));
    const auto dtype = code_dtype(get<int32_t>(in));
    std::vector<int64_t> shape(get<uint64_t>(in));
    for (auto& s : shape) s = get<int64_t>(in);
    const auto nbytes = get<uint64_t>(in);
    auto t = torch::empty(shape, torch::TensorOptions().dtype(dtype));
    if (t.nbytes() != nbytes) throw RuntimeFailure("corrupt tensor '" + name + "' in " + path.string());
    in.read(static_cast<char*>(t.data_ptr()), static_cast<std::streamsize>(nbytes));
    if (!in) throw RuntimeFailure("truncated checkpoint blob " + path.string());
    out.emplace(std::move(name), std::move(t));
  }
  if (in.peek() != std::char_traits<char>::eof())
    throw RuntimeFailure("trailing bytes after the last tensor in " + path.string());
  return out;
}

TensorMap module_tensors(const torch::nn::Module& module) {
  TensorMap out;
  for (const auto& item : module.named_parameters()) out[item.key()] = item.value();
  for (const auto& item : module.named_buffers()) out[item.key()] = item.value();
  return out;
}

void assign_module_tensors(torch::nn::Module& module, const TensorMap& tensors, const std::string& group) {
  torch::NoGradGuard no_grad;
  auto copy = [&](const std::string& name, torch::Tensor& target) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw InputError("checkpoint group '" + group + "' lacks '" + name + "'");
    if (it->second.sizes() != target.sizes())
      throw InputError("checkpoint group '" + group + "': '" + name + "' has shape " +
                       c10::str(it->second.sizes()) + ", model expects " + c10::str(target.sizes()));
    target.copy_(it->second);
  };
  for (auto& item : module.named_parameters()) copy(item.key(), item.value());
  for (auto& item : module.named_buffers()) copy(item.key(), item.value());
}

std::uint64_t checksum(const TensorMap& tensors) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [name, t] : tensors) {
    h = fnv1a64(name, h);
    h = tensor_checksum(t, h);
  }
  return h;
}

}  // namespace indivaid
