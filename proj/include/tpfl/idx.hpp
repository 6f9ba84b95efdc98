#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace tpfl {

constexpr int kImageRows = 28;
constexpr int kImageCols = 28;
constexpr int kImagePixels = kImageRows * kImageCols;

// A loaded IDX image/label pair. Images are sample-major, 784 bytes each.
struct RawDataset {
    std::vector<std::uint8_t> pixels;
    std::vector<std::uint8_t> labels;
    int class_count = 0;

    std::size_t size() const noexcept { return labels.size(); }
    std::span<const std::uint8_t> image(std::size_t i) const {
        return {pixels.data() + i * kImagePixels, kImagePixels};
    }

    void append(const RawDataset& other);
};

// Parses an IDX image/label file pair. Gzip-compressed inputs are detected by
// the 1f 8b prefix and inflated transparently.
//
// Throws FormatError on bad magic, LengthError on truncation or image/label
// count mismatch, ShapeError on dimensions other than 28x28.
RawDataset load_idx(const std::filesystem::path& images_path,
                    const std::filesystem::path& labels_path);

// Writers for tooling and tests; bit-exact IDX, optionally gzipped.
void write_idx_images(const std::filesystem::path& path,
                      std::span<const std::uint8_t> pixels, std::uint32_t count,
                      bool gzip_output = false);
void write_idx_labels(const std::filesystem::path& path,
                      std::span<const std::uint8_t> labels,
                      bool gzip_output = false);

// Inflates a gzip stream (used by load_idx; exposed for tests).
std::vector<std::uint8_t> gunzip(std::span<const std::uint8_t> input);

}  // namespace tpfl
