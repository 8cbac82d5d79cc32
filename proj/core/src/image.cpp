#include "percept/image.hpp"

#include <cstdio>
#include <cstring>

#include <png.h>

#include "percept/errors.hpp"

namespace percept {

namespace {

struct FileHandle {
    explicit FileHandle(const std::string& path, const char* mode)
        : fp(std::fopen(path.c_str(), mode)) {}
    ~FileHandle() {
        if (fp) std::fclose(fp);
    }
    FileHandle(const FileHandle&) = delete;
    FileHandle& operator=(const FileHandle&) = delete;
    FILE* fp = nullptr;
};

torch::Tensor require_chw(const torch::Tensor& t, const char* what) {
    if (t.dim() != 3) {
        throw DimensionError(std::string(what) + " must be a CHW tensor");
    }
    if (t.size(0) != 1 && t.size(0) != 3) {
        throw DimensionError(std::string(what) + " must have 1 or 3 channels");
    }
    return t;
}

}  // namespace

torch::Tensor read_png(const std::string& path) {
    FileHandle file(path, "rb");
    if (!file.fp) {
        throw DataError("cannot open image file: " + path);
    }

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) {
        throw DataError("cannot allocate PNG reader");
    }
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw DataError("cannot allocate PNG info");
    }

    std::vector<uint8_t> pixels;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("failed to decode PNG: " + path);
    }

    png_init_io(png, file.fp);
    png_read_info(png, info);

    const png_uint_32 width = png_get_image_width(png, info);
    const png_uint_32 height = png_get_image_height(png, info);
    const png_byte color_type = png_get_color_type(png, info);
    const png_byte bit_depth = png_get_bit_depth(png, info);

    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (bit_depth == 16) png_set_strip_16(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
        png_set_gray_to_rgb(png);
    }
    png_read_update_info(png, info);

    const size_t row_bytes = png_get_rowbytes(png, info);
    pixels.resize(row_bytes * height);
    rows.resize(height);
    for (png_uint_32 y = 0; y < height; ++y) {
        rows[y] = pixels.data() + y * row_bytes;
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    auto hwc = torch::from_blob(pixels.data(),
                                {static_cast<int64_t>(height), static_cast<int64_t>(width), 3},
                                torch::kUInt8)
                   .clone();
    return hwc.permute({2, 0, 1}).to(torch::kFloat32).div(255.0).contiguous();
}

void write_png(const torch::Tensor& chw, const std::string& path) {
    require_chw(chw, "image");
    auto bytes = chw.detach()
                     .to(torch::kFloat32)
                     .clamp(0.0, 1.0)
                     .mul(255.0)
                     .round()
                     .to(torch::kUInt8)
                     .permute({1, 2, 0})
                     .contiguous();
    const int64_t height = bytes.size(0);
    const int64_t width = bytes.size(1);
    const int64_t channels = bytes.size(2);

    FileHandle file(path, "wb");
    if (!file.fp) {
        throw DataError("cannot open image file for writing: " + path);
    }

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) {
        throw DataError("cannot allocate PNG writer");
    }
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw DataError("cannot allocate PNG info");
    }

    std::vector<png_bytep> rows(height);
    auto* data = bytes.data_ptr<uint8_t>();
    for (int64_t y = 0; y < height; ++y) {
        rows[y] = data + y * width * channels;
    }

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw DataError("failed to encode PNG: " + path);
    }

    png_init_io(png, file.fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                 channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

torch::Tensor to_signed_range(const torch::Tensor& unit) {
    return unit * 2.0 - 1.0;
}

torch::Tensor to_unit_range(const torch::Tensor& signed_vals) {
    return (signed_vals + 1.0) * 0.5;
}

torch::Tensor crop_resize(const torch::Tensor& frame, const CropBox& box, int64_t out_size) {
    require_chw(frame, "frame");
    if (box.w <= 0 || box.h <= 0) {
        throw ArgumentError("crop box must have positive extent");
    }
    const int64_t height = frame.size(1);
    const int64_t width = frame.size(2);
    if (box.x < 0 || box.y < 0 || box.x + box.w > width || box.y + box.h > height) {
        throw ArgumentError("crop box exceeds frame bounds");
    }
    if (out_size <= 0) {
        throw ArgumentError("output size must be positive");
    }

    auto crop = frame.slice(1, box.y, box.y + box.h).slice(2, box.x, box.x + box.w);
    if (crop.size(0) == 1) {
        crop = crop.expand({3, box.h, box.w});
    }
    namespace F = torch::nn::functional;
    auto resized = F::interpolate(crop.unsqueeze(0).to(torch::kFloat32),
                                  F::InterpolateFuncOptions()
                                      .size(std::vector<int64_t>{out_size, out_size})
                                      .mode(torch::kArea))
                       .squeeze(0);
    return to_signed_range(resized).contiguous();
}

torch::Tensor hflip(const torch::Tensor& image) {
    return image.flip(-1);
}

torch::Tensor tile_grid(const std::vector<torch::Tensor>& images, int64_t cols, int64_t pad,
                        double fill) {
    if (images.empty()) {
        throw ArgumentError("grid needs at least one image");
    }
    if (cols <= 0) {
        throw ArgumentError("grid needs at least one column");
    }
    const auto& first = images.front();
    require_chw(first, "grid image");
    for (const auto& img : images) {
        if (img.sizes() != first.sizes()) {
            throw DimensionError("grid images must share one shape");
        }
    }
    const int64_t n = static_cast<int64_t>(images.size());
    const int64_t rows = (n + cols - 1) / cols;
    const int64_t c = first.size(0);
    const int64_t h = first.size(1);
    const int64_t w = first.size(2);

    auto canvas = torch::full({c, rows * h + (rows + 1) * pad, cols * w + (cols + 1) * pad}, fill,
                              first.options());
    for (int64_t i = 0; i < n; ++i) {
        const int64_t r = i / cols;
        const int64_t col = i % cols;
        const int64_t top = pad + r * (h + pad);
        const int64_t left = pad + col * (w + pad);
        canvas.slice(1, top, top + h).slice(2, left, left + w).copy_(images[i]);
    }
    return canvas;
}

}  // namespace percept
