#include "tpfl/idx.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstring>
#include <fstream>

#include "tpfl/error.hpp"

namespace tpfl {
namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return bytes;
}

bool is_gzip(std::span<const std::uint8_t> bytes) {
    return bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b;
}

class BigEndianReader {
public:
    BigEndianReader(std::span<const std::uint8_t> bytes, std::string name)
        : bytes_(bytes), name_(std::move(name)) {}

    std::uint32_t read_u32() {
        if (pos_ + 4 > bytes_.size())
            throw LengthError(name_ + ": truncated header");
        std::uint32_t v = (std::uint32_t(bytes_[pos_]) << 24) |
                          (std::uint32_t(bytes_[pos_ + 1]) << 16) |
                          (std::uint32_t(bytes_[pos_ + 2]) << 8) |
                          std::uint32_t(bytes_[pos_ + 3]);
        pos_ += 4;
        return v;
    }

    std::span<const std::uint8_t> read_payload(std::size_t n) {
        if (pos_ + n > bytes_.size())
            throw LengthError(name_ + ": payload truncated (want " +
                              std::to_string(n) + " bytes, have " +
                              std::to_string(bytes_.size() - pos_) + ")");
        auto out = bytes_.subspan(pos_, n);
        pos_ += n;
        return out;
    }

private:
    std::span<const std::uint8_t> bytes_;
    std::string name_;
    std::size_t pos_ = 0;
};

void write_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(std::uint8_t(v >> 24));
    out.push_back(std::uint8_t(v >> 16));
    out.push_back(std::uint8_t(v >> 8));
    out.push_back(std::uint8_t(v));
}

void write_bytes(const std::filesystem::path& path,
                 std::span<const std::uint8_t> bytes, bool gzip_output) {
    if (gzip_output) {
        gzFile gz = gzopen(path.string().c_str(), "wb");
        if (!gz) throw Error("cannot open " + path.string() + " for writing");
        if (gzwrite(gz, bytes.data(), static_cast<unsigned>(bytes.size())) !=
            static_cast<int>(bytes.size())) {
            gzclose(gz);
            throw Error("gzip write failed for " + path.string());
        }
        gzclose(gz);
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

std::vector<std::uint8_t> gunzip(std::span<const std::uint8_t> input) {
    z_stream strm{};
    if (inflateInit2(&strm, 15 + 16) != Z_OK)
        throw Error("zlib inflateInit failed");

    std::vector<std::uint8_t> out;
    out.reserve(input.size() * 4);
    std::uint8_t buffer[1 << 16];
    strm.next_in = const_cast<Bytef*>(input.data());
    strm.avail_in = static_cast<uInt>(input.size());
    int rc = Z_OK;
    do {
        strm.next_out = buffer;
        strm.avail_out = sizeof(buffer);
        rc = inflate(&strm, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&strm);
            throw FormatError("gzip stream corrupt (zlib rc " +
                              std::to_string(rc) + ")");
        }
        out.insert(out.end(), buffer, buffer + (sizeof(buffer) - strm.avail_out));
    } while (rc != Z_STREAM_END);
    inflateEnd(&strm);
    return out;
}

void RawDataset::append(const RawDataset& other) {
    pixels.insert(pixels.end(), other.pixels.begin(), other.pixels.end());
    labels.insert(labels.end(), other.labels.begin(), other.labels.end());
    class_count = std::max(class_count, other.class_count);
}

RawDataset load_idx(const std::filesystem::path& images_path,
                    const std::filesystem::path& labels_path) {
    auto image_bytes = read_file(images_path);
    if (is_gzip(image_bytes)) image_bytes = gunzip(image_bytes);
    auto label_bytes = read_file(labels_path);
    if (is_gzip(label_bytes)) label_bytes = gunzip(label_bytes);

    BigEndianReader images(image_bytes, images_path.filename().string());
    if (std::uint32_t magic = images.read_u32(); magic != kImagesMagic)
        throw FormatError(images_path.filename().string() +
                          ": bad images magic " + std::to_string(magic));
    const std::uint32_t image_count = images.read_u32();
    const std::uint32_t rows = images.read_u32();
    const std::uint32_t cols = images.read_u32();
    if (rows != kImageRows || cols != kImageCols)
        throw ShapeError(images_path.filename().string() + ": unsupported shape " +
                         std::to_string(rows) + "x" + std::to_string(cols));
    auto pixel_payload =
        images.read_payload(std::size_t(image_count) * kImagePixels);

    BigEndianReader labels(label_bytes, labels_path.filename().string());
    if (std::uint32_t magic = labels.read_u32(); magic != kLabelsMagic)
        throw FormatError(labels_path.filename().string() +
                          ": bad labels magic " + std::to_string(magic));
    const std::uint32_t label_count = labels.read_u32();
    auto label_payload = labels.read_payload(label_count);

    if (image_count != label_count)
        throw LengthError("image/label count mismatch: " +
                          std::to_string(image_count) + " images vs " +
                          std::to_string(label_count) + " labels");

    RawDataset out;
    out.pixels.assign(pixel_payload.begin(), pixel_payload.end());
    out.labels.assign(label_payload.begin(), label_payload.end());
    int max_label = -1;
    for (std::uint8_t label : out.labels) max_label = std::max<int>(max_label, label);
    out.class_count = max_label + 1;
    return out;
}

void write_idx_images(const std::filesystem::path& path,
                      std::span<const std::uint8_t> pixels, std::uint32_t count,
                      bool gzip_output) {
    if (pixels.size() != std::size_t(count) * kImagePixels)
        throw LengthError("pixel payload does not match image count");
    std::vector<std::uint8_t> bytes;
    bytes.reserve(16 + pixels.size());
    write_u32_be(bytes, kImagesMagic);
    write_u32_be(bytes, count);
    write_u32_be(bytes, kImageRows);
    write_u32_be(bytes, kImageCols);
    bytes.insert(bytes.end(), pixels.begin(), pixels.end());
    write_bytes(path, bytes, gzip_output);
}

void write_idx_labels(const std::filesystem::path& path,
                      std::span<const std::uint8_t> labels, bool gzip_output) {
    std::vector<std::uint8_t> bytes;
    bytes.reserve(8 + labels.size());
    write_u32_be(bytes, kLabelsMagic);
    write_u32_be(bytes, static_cast<std::uint32_t>(labels.size()));
    bytes.insert(bytes.end(), labels.begin(), labels.end());
    write_bytes(path, bytes, gzip_output);
}

}  // namespace tpfl
