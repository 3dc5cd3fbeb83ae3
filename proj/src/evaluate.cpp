#include "indivaid/evaluate.hpp"

#include "indivaid/common.hpp"

namespace indivaid {

torch::Tensor embed_images(Encoder& encoder, const std::vector<std::filesystem::path>& paths,
                           ImageCache& images, int batch_size) {
  torch::NoGradGuard no_grad;
  const int64_t d = encoder.config().embed_dim;
  if (paths.empty()) return torch::empty({0, d}, torch::kFloat64);
  std::vector<torch::Tensor> chunks;
  for (std::size_t start = 0; start < paths.size(); start += batch_size) {
    const std::size_t end = std::min(paths.size(), start + batch_size);
    std::vector<torch::Tensor> batch;
    for (std::size_t i = start; i < end; ++i) batch.push_back(normalize_pixels(images.get(paths[i])));
    chunks.push_back(encoder.encode_image(torch::stack(batch), false).to(torch::kFloat64));
  }
  auto feats = torch::cat(chunks, 0);
  return feats / feats.norm(2, 1, true);
}

MetricsReport evaluate(Encoder& encoder, const DatasetScan& scan, ImageCache& images) {
  auto gallery = scan.split(Split::gallery);
  auto query = scan.split(Split::query);
  if (gallery.empty()) throw InputError("evaluation needs a nonempty gallery split");
  if (query.empty()) throw InputError("evaluation needs a nonempty query split");
  std::vector<std::filesystem::path> gp, qp;
  std::vector<int> gid, qid;
  for (const auto& r : gallery) {
    gp.push_back(r.path);
    gid.push_back(r.identity);
  }
  for (const auto& r : query) {
    qp.push_back(r.path);
    qid.push_back(r.identity);
  }
  return evaluate_retrieval(embed_images(encoder, qp, images), qid, embed_images(encoder, gp, images), gid);
}

}  // namespace indivaid
