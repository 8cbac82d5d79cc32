#ifndef PERCEPT_IMAGE_HPP
#define PERCEPT_IMAGE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace percept {

inline constexpr int64_t kImageSize = 128;

/// Axis-aligned crop box in pixel coordinates.
struct CropBox {
    int64_t x = 0;
    int64_t y = 0;
    int64_t w = 0;
    int64_t h = 0;
};

/// Reads an 8-bit PNG as a float32 CHW tensor in [0, 1] with 3 channels.
/// Grayscale and palette images are expanded to RGB; alpha is dropped.
torch::Tensor read_png(const std::string& path);

/// Writes a float32 CHW tensor in [0, 1] (1 or 3 channels) as an 8-bit PNG.
/// Values are clamped and rounded to the nearest level.
void write_png(const torch::Tensor& chw, const std::string& path);

/// Maps [0, 1] pixel values to the model's [-1, 1] range, and back.
torch::Tensor to_signed_range(const torch::Tensor& unit);
torch::Tensor to_unit_range(const torch::Tensor& signed_vals);

/// Crops `frame` (float CHW in [0, 1]) to `box`, resamples the crop to
/// `out_size` x `out_size` by area averaging, and maps values to [-1, 1].
/// The box must lie within the frame and have positive extent.
torch::Tensor crop_resize(const torch::Tensor& frame, const CropBox& box,
                          int64_t out_size = kImageSize);

/// Horizontal flip of a CHW (or NCHW) image tensor.
torch::Tensor hflip(const torch::Tensor& image);

/// Lays out equally sized CHW images on a grid with `cols` columns,
/// separated by `pad` pixels of `fill` value. Input range is preserved.
torch::Tensor tile_grid(const std::vector<torch::Tensor>& images, int64_t cols,
                        int64_t pad = 2, double fill = 1.0);

}  // namespace percept

#endif
