#include <doctest.h>

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <vector>

#include "support/helpers.hpp"
#include "tpfl/error.hpp"
#include "tpfl/idx.hpp"

using namespace tpfl;
using tpfl::testing::TempDir;

namespace {

std::vector<std::uint8_t> flat_images(std::size_t count, std::uint8_t fill) {
    return std::vector<std::uint8_t>(count * kImagePixels, fill);
}

void write_raw(const std::filesystem::path& path,
               const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              std::streamsize(bytes.size()));
}

}  // namespace

TEST_CASE("idx round-trips through writer and loader") {
    TempDir dir("idx");
    auto pixels = flat_images(3, 0);
    pixels[5] = 200;
    pixels[kImagePixels + 7] = 99;
    std::vector<std::uint8_t> labels = {4, 1, 9};

    for (bool gz : {false, true}) {
        auto images_path = dir.path() / (gz ? "imgs.gz" : "imgs");
        auto labels_path = dir.path() / (gz ? "lbls.gz" : "lbls");
        write_idx_images(images_path, pixels, 3, gz);
        write_idx_labels(labels_path, labels, gz);

        RawDataset data = load_idx(images_path, labels_path);
        CHECK(data.size() == 3);
        CHECK(data.class_count == 10);
        CHECK(data.labels == labels);
        CHECK(data.image(0)[5] == 200);
        CHECK(data.image(1)[7] == 99);
        CHECK(data.pixels == pixels);
    }
}

TEST_CASE("empty label file is a valid empty dataset") {
    TempDir dir("idx_empty");
    write_idx_images(dir.path() / "imgs", {}, 0);
    write_idx_labels(dir.path() / "lbls", {});
    RawDataset data = load_idx(dir.path() / "imgs", dir.path() / "lbls");
    CHECK(data.size() == 0);
    CHECK(data.class_count == 0);
}

TEST_CASE("bad magic raises a format error") {
    TempDir dir("idx_magic");
    std::vector<std::uint8_t> three = {3};
    write_idx_labels(dir.path() / "lbls", three);

    std::vector<std::uint8_t> bogus = {0x00, 0x00, 0x09, 0x03, 0, 0, 0, 0};
    write_raw(dir.path() / "bad_imgs", bogus);
    CHECK_THROWS_AS(load_idx(dir.path() / "bad_imgs", dir.path() / "lbls"),
                    FormatError);

    // A labels file where images are expected.
    CHECK_THROWS_AS(load_idx(dir.path() / "lbls", dir.path() / "lbls"), FormatError);
}

TEST_CASE("truncated payload raises a length error") {
    TempDir dir("idx_trunc");
    std::vector<std::uint8_t> bytes = {0x00, 0x00, 0x08, 0x03, 0x00, 0x00,
                                       0x00, 0x02, 0x00, 0x00, 0x00, 28,
                                       0x00, 0x00, 0x00, 28};
    bytes.resize(bytes.size() + kImagePixels, 7);  // one image short
    write_raw(dir.path() / "imgs", bytes);
    std::vector<std::uint8_t> two_labels = {1, 2};
    write_idx_labels(dir.path() / "lbls", two_labels);
    CHECK_THROWS_AS(load_idx(dir.path() / "imgs", dir.path() / "lbls"), LengthError);
}

TEST_CASE("image/label count mismatch raises a length error") {
    TempDir dir("idx_mismatch");
    write_idx_images(dir.path() / "imgs", flat_images(100, 1), 100);
    std::vector<std::uint8_t> labels(99, 0);
    write_idx_labels(dir.path() / "lbls", labels);
    CHECK_THROWS_AS(load_idx(dir.path() / "imgs", dir.path() / "lbls"), LengthError);
}

TEST_CASE("non-28x28 dimensions raise a shape error") {
    TempDir dir("idx_shape");
    std::vector<std::uint8_t> bytes = {0x00, 0x00, 0x08, 0x03, 0x00, 0x00,
                                       0x00, 0x01, 0x00, 0x00, 0x00, 14,
                                       0x00, 0x00, 0x00, 14};
    bytes.resize(bytes.size() + 14 * 14, 0);
    write_raw(dir.path() / "imgs", bytes);
    std::vector<std::uint8_t> one_label = {0};
    write_idx_labels(dir.path() / "lbls", one_label);
    CHECK_THROWS_AS(load_idx(dir.path() / "imgs", dir.path() / "lbls"), ShapeError);
}

TEST_CASE("corrupt gzip raises a format error") {
    TempDir dir("idx_gz");
    std::vector<std::uint8_t> bogus = {0x1f, 0x8b, 0xff, 0x00, 0x11, 0x22};
    write_raw(dir.path() / "imgs.gz", bogus);
    std::vector<std::uint8_t> one_label = {0};
    write_idx_labels(dir.path() / "lbls", one_label);
    CHECK_THROWS_AS(load_idx(dir.path() / "imgs.gz", dir.path() / "lbls"),
                    FormatError);
}

TEST_CASE("bundled mnist subset loads through the gzip path") {
    RawDataset data = load_idx(
        tpfl::testing::bundled_mnist_dir() / "train-images-idx3-ubyte.gz",
        tpfl::testing::bundled_mnist_dir() / "train-labels-idx1-ubyte.gz");
    CHECK(data.size() == 10000);
    CHECK(data.class_count == 10);
    std::vector<int> counts(10, 0);
    for (auto label : data.labels) ++counts[label];
    for (int c = 0; c < 10; ++c) CHECK(counts[c] > 500);
}

TEST_CASE("full mnist train files load when present") {
    // The 60k-image originals are not bundled; this runs only when a full
    // MNIST directory is supplied via TPFL_DATA_DIR.
    const char* env = std::getenv("TPFL_DATA_DIR");
    if (!env || !*env) return;
    auto dir = std::filesystem::path(env);
    auto images = dir / "train-images-idx3-ubyte";
    auto labels = dir / "train-labels-idx1-ubyte";
    if (!std::filesystem::exists(images)) {
        images += ".gz";
        labels += ".gz";
    }
    if (!std::filesystem::exists(images)) return;
    RawDataset data = load_idx(images, labels);
    CHECK(data.size() == 60000);
    CHECK(data.class_count == 10);
}
