#pragma once

#include "fgfd/model.hpp"

#include <opencv2/core.hpp>
#include <torch/torch.h>

#include <filesystem>

namespace fgfd {

struct Heatmap {
    torch::Tensor values; // (H, W) float64 in [0, 1]
    int source_block = 0;
    int target_class = 0;
};

/// Gradient-weighted class activation map of a bottom-up fused block.
///
/// Channel weights are the spatial mean of d logit[target] / d map, the CAM
/// is the rectified weighted channel sum, bilinearly upsampled to the image
/// size and min-max normalized (a constant CAM becomes all zeros). The
/// score is the model's decision logit, Y_m for a single branch.
/// `block_index` < 0 counts from the last block.
Heatmap grad_cam(Detector& model, const torch::Tensor& image, int target_class, int block_index = -1,
                 std::size_t branch = 0);

/// Fraction of heatmap mass inside `region` (0 for an all-zero heatmap).
double region_mass_fraction(const Heatmap& heatmap, const cv::Rect& region);

/// Alpha-blends the JET-colormapped heatmap over an 8-bit BGR image:
/// alpha 0 returns the image, alpha 1 the colormap.
cv::Mat render_overlay(const Heatmap& heatmap, const cv::Mat& image_bgr, double alpha);

void overlay(const Heatmap& heatmap, const cv::Mat& image_bgr, double alpha, const std::filesystem::path& out_path);

} // namespace fgfd
