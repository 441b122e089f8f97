#include "fgfd/explain.hpp"

#include "fgfd/errors.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace fgfd {

namespace F = torch::nn::functional;

Heatmap grad_cam(Detector& model, const torch::Tensor& image, int target_class, int block_index, std::size_t branch) {
    if (model.is_empty()) throw ModelError("grad_cam: no model");
    const auto& cfg = model->config();
    if (branch >= model->branches.size()) throw ModelError("grad_cam: branch out of range");
    const int blocks = cfg.branches[branch].n_blocks;
    const int block = block_index < 0 ? blocks + block_index : block_index;
    if (block < 0 || block >= blocks) throw ModelError("grad_cam: block index out of range");
    if (target_class < 0 || target_class >= cfg.num_classes) throw ModelError("grad_cam: target class out of range");
    if (image.dim() != 3 || image.size(0) != 3) throw ModelError("grad_cam: image must be (3, H, W)");

    const bool was_training = model->is_training();
    model->eval();
    const auto dtype = model->parameters().front().scalar_type();
    torch::Tensor fmap, grad;
    try {
        auto outputs = model->forward(image.unsqueeze(0).to(dtype));
        fmap = outputs.branches[branch].bottom_up[block];
        auto score = outputs.logits.select(0, 0).select(0, target_class);
        auto grads = torch::autograd::grad({score}, {fmap}, {}, /*retain_graph=*/false, /*create_graph=*/false,
                                           /*allow_unused=*/true);
        grad = grads[0].defined() ? grads[0] : torch::zeros_like(fmap);
    } catch (const ShapeError& e) {
        model->train(was_training);
        throw ModelError(std::string("grad_cam: incompatible input: ") + e.what());
    }
    model->train(was_training);

    torch::NoGradGuard guard;
    auto weights = grad.mean({2, 3}, /*keepdim=*/true);
    auto cam = torch::relu((weights * fmap.detach()).sum(1, /*keepdim=*/true)).to(torch::kFloat64);
    cam = F::interpolate(cam, F::InterpolateFuncOptions()
                                  .size(std::vector<int64_t>{image.size(1), image.size(2)})
                                  .mode(torch::kBilinear)
                                  .align_corners(false))
              .squeeze(0)
              .squeeze(0);
    const double lo = cam.min().item<double>();
    const double hi = cam.max().item<double>();
    Heatmap h{torch::zeros_like(cam), block, target_class};
    if (hi - lo > 1e-12 * std::max(1.0, std::abs(hi))) h.values = ((cam - lo) / (hi - lo)).clamp(0.0, 1.0);
    return h;
}

double region_mass_fraction(const Heatmap& heatmap, const cv::Rect& region) {
    const auto total = heatmap.values.sum().item<double>();
    if (total <= 0.0) return 0.0;
    const auto h = heatmap.values.size(0);
    const auto w = heatmap.values.size(1);
    const auto r = region & cv::Rect(0, 0, static_cast<int>(w), static_cast<int>(h));
    if (r.empty()) return 0.0;
    const auto inside = heatmap.values.slice(0, r.y, r.y + r.height).slice(1, r.x, r.x + r.width).sum().item<double>();
    return inside / total;
}

cv::Mat render_overlay(const Heatmap& heatmap, const cv::Mat& image_bgr, double alpha) {
    if (image_bgr.type() != CV_8UC3) throw ShapeError("overlay: image must be 8-bit BGR");
    if (heatmap.values.size(0) != image_bgr.rows || heatmap.values.size(1) != image_bgr.cols)
        throw ShapeError("overlay: heatmap and image sizes differ");
    if (alpha < 0.0 || alpha > 1.0) throw ConfigError("overlay: alpha must lie in [0, 1]");
    auto bytes = (heatmap.values * 255.0).round().clamp(0, 255).to(torch::kUInt8).contiguous();
    cv::Mat gray(image_bgr.rows, image_bgr.cols, CV_8UC1, bytes.data_ptr<uint8_t>());
    cv::Mat colored;
    cv::applyColorMap(gray, colored, cv::COLORMAP_JET);
    cv::Mat out;
    cv::addWeighted(image_bgr, 1.0 - alpha, colored, alpha, 0.0, out);
    return out;
}

void overlay(const Heatmap& heatmap, const cv::Mat& image_bgr, double alpha, const std::filesystem::path& out_path) {
    const auto img = render_overlay(heatmap, image_bgr, alpha);
    bool ok = false;
    try {
        ok = cv::imwrite(out_path.string(), img);
    } catch (const cv::Exception&) {
        ok = false;
    }
    if (!ok) throw DataError("cannot write overlay " + out_path.string());
}

} // namespace fgfd
