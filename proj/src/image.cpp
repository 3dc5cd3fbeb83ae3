#include "indivaid/image.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "indivaid/common.hpp"

namespace indivaid {

torch::Tensor load_image(const std::filesystem::path& path, int size) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw InputError("cannot decode image " + path.string());
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  if (rgb.rows != size || rgb.cols != size)
    cv::resize(rgb, rgb, cv::Size(size, size), 0, 0, cv::INTER_LINEAR);
  cv::Mat f;
  rgb.convertTo(f, CV_32FC3, 1.0 / 255.0);
  auto t = torch::from_blob(f.data, {size, size, 3}, torch::kFloat32).clone();
  return t.permute({2, 0, 1}).contiguous();
}

torch::Tensor normalize_pixels(const torch::Tensor& image) {
  auto opts = torch::TensorOptions().dtype(image.dtype());
  auto mean = torch::tensor({kPixelMean[0], kPixelMean[1], kPixelMean[2]}, opts).view({3, 1, 1});
  auto std = torch::tensor({kPixelStd[0], kPixelStd[1], kPixelStd[2]}, opts).view({3, 1, 1});
  return (image - mean) / std;
}

void save_image(const std::filesystem::path& path, const torch::Tensor& image) {
  TORCH_CHECK(image.dim() == 3 && image.size(0) == 3, "save_image expects [3,H,W]");
  auto hwc = (image.detach().to(torch::kFloat32).clamp(0, 1) * 255.0)
                 .round()
                 .to(torch::kUInt8)
                 .permute({1, 2, 0})
                 .contiguous();
  cv::Mat rgb(static_cast<int>(hwc.size(0)), static_cast<int>(hwc.size(1)), CV_8UC3, hwc.data_ptr());
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  if (!cv::imwrite(path.string(), bgr)) throw RuntimeFailure("cannot write image " + path.string());
}

torch::Tensor ImageCache::get(const std::filesystem::path& path) {
  std::lock_guard lock(mutex_);
  auto it = images_.find(path);
  if (it != images_.end()) return it->second;
  auto img = load_image(path, size_);
  images_.emplace(path, img);
  return img;
}

}  // namespace indivaid
