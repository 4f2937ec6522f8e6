#include <algorithm>
#include <fstream>
#include <iterator>

#include "edac/data.hpp"
#include "edac/error.hpp"

namespace edac {

namespace {

constexpr std::uint32_t kLabelMagic = 0x00000801;
constexpr std::uint32_t kImageMagic = 0x00000803;

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open IDX file '" + path.string() + "'", 0);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& bytes, std::string file) : bytes_(bytes), file_(std::move(file)) {}

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | bytes_[offset_++];
    return v;
  }

  std::span<const std::uint8_t> raw(std::size_t n, const char* what) {
    need(n, what);
    std::span<const std::uint8_t> out(bytes_.data() + offset_, n);
    offset_ += n;
    return out;
  }

  std::size_t offset() const { return offset_; }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - offset_ < n) {
      throw FormatError("truncated IDX file '" + file_ + "' while reading " + what, offset_);
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  std::string file_;
  std::size_t offset_ = 0;
};

void put_u32(std::ofstream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                     static_cast<char>(v)};
  out.write(b, 4);
}

}  // namespace

IdxImages read_idx_images(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  Reader r(bytes, path.string());
  const std::uint32_t magic = r.u32("magic number");
  if (magic != kImageMagic) throw FormatError("bad IDX image magic in '" + path.string() + "'", 0);
  IdxImages images;
  images.count = r.u32("image count");
  images.rows = r.u32("row count");
  images.cols = r.u32("column count");
  const std::size_t remaining = bytes.size() - r.offset();
  if (images.rows != 0 && images.cols != 0 && images.count > remaining / images.rows / images.cols) {
    throw FormatError("truncated IDX file '" + path.string() + "' while reading pixel data", r.offset());
  }
  const std::size_t total = images.count * images.rows * images.cols;
  auto px = r.raw(total, "pixel data");
  images.pixels.assign(px.begin(), px.end());
  return images;
}

std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  Reader r(bytes, path.string());
  const std::uint32_t magic = r.u32("magic number");
  if (magic != kLabelMagic) throw FormatError("bad IDX label magic in '" + path.string() + "'", 0);
  const std::uint32_t count = r.u32("label count");
  auto raw = r.raw(count, "label data");
  return std::vector<std::uint8_t>(raw.begin(), raw.end());
}

void write_idx_images(const std::filesystem::path& path, const IdxImages& images) {
  if (images.pixels.size() != images.count * images.rows * images.cols) {
    throw ShapeError("write_idx_images: pixel buffer does not match dimensions");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write IDX file '" + path.string() + "'", 0);
  put_u32(out, kImageMagic);
  put_u32(out, static_cast<std::uint32_t>(images.count));
  put_u32(out, static_cast<std::uint32_t>(images.rows));
  put_u32(out, static_cast<std::uint32_t>(images.cols));
  out.write(reinterpret_cast<const char*>(images.pixels.data()), static_cast<std::streamsize>(images.pixels.size()));
}

void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write IDX file '" + path.string() + "'", 0);
  put_u32(out, kLabelMagic);
  put_u32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
}

Dataset load_idx_images(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                        std::optional<std::size_t> downsample_to, std::optional<std::size_t> num_classes) {
  const IdxImages images = read_idx_images(images_path);
  const auto labels = read_idx_labels(labels_path);
  if (labels.size() != images.count) {
    // Offset 4 is the count field of the label header.
    throw FormatError("label file has " + std::to_string(labels.size()) + " entries but image file has " +
                          std::to_string(images.count),
                      4);
  }
  if (images.count == 0) throw FormatError("IDX image file '" + images_path.string() + "' holds no images", 4);

  std::size_t out_rows = images.rows;
  std::size_t out_cols = images.cols;
  std::size_t pool_r = 1;
  std::size_t pool_c = 1;
  if (downsample_to) {
    const std::size_t edge = *downsample_to;
    if (edge == 0 || images.rows % edge != 0 || images.cols % edge != 0) {
      throw ConfigError("cannot downsample " + std::to_string(images.rows) + "x" + std::to_string(images.cols) +
                        " images to " + std::to_string(edge) + "x" + std::to_string(edge));
    }
    pool_r = images.rows / edge;
    pool_c = images.cols / edge;
    out_rows = out_cols = edge;
  }

  Dataset ds;
  ds.name = images_path.filename().string();
  ds.domain_box = DomainBox{0.0, 1.0};
  ds.inputs = Tensor(Shape{images.count, out_rows * out_cols});
  const double cell = static_cast<double>(pool_r * pool_c);
  const std::size_t src_size = images.rows * images.cols;
  for (std::size_t i = 0; i < images.count; ++i) {
    const std::uint8_t* src = images.pixels.data() + i * src_size;
    auto dst = ds.inputs.row(i);
    for (std::size_t r = 0; r < out_rows; ++r) {
      for (std::size_t c = 0; c < out_cols; ++c) {
        double acc = 0.0;
        for (std::size_t dr = 0; dr < pool_r; ++dr) {
          for (std::size_t dc = 0; dc < pool_c; ++dc) acc += src[(r * pool_r + dr) * images.cols + c * pool_c + dc];
        }
        dst[r * out_cols + c] = acc / cell / 255.0;
      }
    }
  }
  ds.labels.assign(labels.begin(), labels.end());
  const std::size_t max_label = *std::max_element(labels.begin(), labels.end());
  ds.num_classes = num_classes.value_or(std::max<std::size_t>(2, max_label + 1));
  ds.validate();
  return ds;
}

}  // namespace edac
