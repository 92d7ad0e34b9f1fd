#ifndef NMSLAB_RASTER_HPP
#define NMSLAB_RASTER_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace nmslab {

// 3-channel float image, row-major (y, x, c), values in [0,1]. Heights and
// widths are multiples of 32 to match the detector's input contract.
class Raster {
 public:
  static constexpr size_t kChannels = 3;
  static constexpr size_t kDimMultiple = 32;

  Raster(size_t height, size_t width, float fill = 0.0f);

  size_t height() const { return height_; }
  size_t width() const { return width_; }
  size_t pixel_count() const { return height_ * width_; }
  size_t value_count() const { return data_.size(); }

  float& at(size_t y, size_t x, size_t c) {
    return data_[(y * width_ + x) * kChannels + c];
  }
  float at(size_t y, size_t x, size_t c) const {
    return data_[(y * width_ + x) * kChannels + c];
  }

  std::span<float> values() { return data_; }
  std::span<const float> values() const { return data_; }

  void clamp_to_unit();

  bool same_shape(const Raster& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }

 private:
  size_t height_;
  size_t width_;
  std::vector<float> data_;
};

// Scenes are forged on a flat mid-gray field; the detector's zero-sum weight
// pattern scores every constant field identically, so gray and black are
// both objectless backgrounds.
inline constexpr float kSceneBackground = 0.5f;

// k x k tiling of `img`. With resize_back the output keeps the tiled
// resolution but each copy's deviation from the scene background is scaled
// by degradation^(tile_rank/(k^2-1)), tile (0,0) staying unscaled: the
// stand-in for resolution loss that drops some copies below the detection
// threshold. k = 1 returns the input unchanged.
Raster amplify(const Raster& img, size_t k, bool resize_back = false,
               double degradation = 1.0);

// Raw float tensor codec: little-endian "RFT0" header (magic, u32 H, W, C)
// followed by float32 values. Bit-exact round trip.
std::vector<uint8_t> encode_rft(const Raster& img);
Raster decode_rft(std::span<const uint8_t> bytes);

// Minimal PNG codec: 8-bit RGB, filter 0, stored (uncompressed) deflate
// blocks. Encoded files are valid PNGs; the decoder accepts only this
// subset and rejects anything else.
std::vector<uint8_t> encode_png(const Raster& img);
Raster decode_png(std::span<const uint8_t> bytes);

void write_file(const std::filesystem::path& path, std::span<const uint8_t> bytes);
std::vector<uint8_t> read_file(const std::filesystem::path& path);

}  // namespace nmslab

#endif  // NMSLAB_RASTER_HPP
