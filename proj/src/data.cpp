#include "rsam/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <random>

#include "rsam/random.hpp"

namespace rsam {
namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t off) {
  if (off + 4 > b.size()) throw LengthError("idx: truncated header");
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void check_magic(std::uint32_t got, std::uint32_t want) {
  if (got != want) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "idx: bad magic 0x%08x (expected 0x%08x)", got, want);
    throw FormatError(buf);
  }
}

void check_payload(std::size_t have, std::size_t want) {
  if (have != want) {
    throw LengthError("idx: payload has " + std::to_string(have) + " bytes, header implies " +
                      std::to_string(want));
  }
}

}  // namespace

IdxImages parse_idx_images(std::span<const std::uint8_t> bytes) {
  check_magic(read_be32(bytes, 0), kIdxImagesMagic);
  const std::size_t count = read_be32(bytes, 4);
  const std::size_t rows = read_be32(bytes, 8);
  const std::size_t cols = read_be32(bytes, 12);
  constexpr std::size_t header = 16;
  const std::size_t features = rows * cols;
  check_payload(bytes.size() - header, count * features);

  IdxImages out{Matrix(count, features), rows, cols};
  auto px = out.pixels.flat();
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = bytes[header + i] / 255.0;
  return out;
}

std::vector<int> parse_idx_labels(std::span<const std::uint8_t> bytes) {
  check_magic(read_be32(bytes, 0), kIdxLabelsMagic);
  const std::size_t count = read_be32(bytes, 4);
  constexpr std::size_t header = 8;
  check_payload(bytes.size() - header, count);
  return {bytes.begin() + header, bytes.end()};
}

std::vector<std::uint8_t> serialize_idx_images(const IdxImages& images) {
  std::vector<std::uint8_t> out;
  out.reserve(16 + images.pixels.size());
  write_be32(out, kIdxImagesMagic);
  write_be32(out, static_cast<std::uint32_t>(images.pixels.rows()));
  write_be32(out, static_cast<std::uint32_t>(images.image_rows));
  write_be32(out, static_cast<std::uint32_t>(images.image_cols));
  for (double v : images.pixels.flat()) {
    out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  }
  return out;
}

std::vector<std::uint8_t> serialize_idx_labels(const std::vector<int>& labels) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + labels.size());
  write_be32(out, kIdxLabelsMagic);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  for (int v : labels) out.push_back(static_cast<std::uint8_t>(v));
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Dataset load_mnist(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto img_bytes = read_file_bytes(images);
  const auto lbl_bytes = read_file_bytes(labels);
  IdxImages img = parse_idx_images(img_bytes);
  std::vector<int> y = parse_idx_labels(lbl_bytes);
  if (y.size() != img.pixels.rows()) {
    throw LengthError("mnist: " + std::to_string(img.pixels.rows()) + " images but " +
                      std::to_string(y.size()) + " labels");
  }
  return {std::move(img.pixels), std::move(y), 10, "mnist:" + images.string()};
}

Dataset synthetic_clusters(std::size_t classes, std::size_t per_class,
                           std::size_t feature_dim, double separation, std::uint64_t seed) {
  if (feature_dim < classes) {
    throw ShapeError("synthetic_clusters: feature_dim < classes");
  }
  if (!(separation >= 0.0)) throw std::invalid_argument("synthetic_clusters: separation < 0");
  Rng rng(seed);
  Dataset d;
  d.x = gaussian_matrix(classes * per_class, feature_dim, rng);
  d.y.resize(classes * per_class);
  d.num_classes = classes;
  d.source = "synthetic";
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t k = 0; k < per_class; ++k) {
      const std::size_t i = c * per_class + k;
      d.y[i] = static_cast<int>(c);
      d.x(i, c) += separation;
    }
  }
  return d;
}

Dataset subset(const Dataset& d, std::span<const std::size_t> indices) {
  Dataset out;
  out.x = Matrix(indices.size(), d.x.cols());
  out.y.reserve(indices.size());
  out.num_classes = d.num_classes;
  out.source = d.source;
  for (std::size_t r = 0; r < indices.size(); ++r) {
    auto src = d.x.row(indices[r]);
    std::copy(src.begin(), src.end(), out.x.row(r).begin());
    out.y.push_back(d.y[indices[r]]);
  }
  return out;
}

std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed,
                                           std::uint64_t epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32)};
  Rng rng(seq);
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(perm[i - 1], perm[pick(rng)]);
  }
  return perm;
}

std::vector<Batch> batches(const Dataset& d, const BatchPlan& plan, std::uint64_t epoch) {
  if (plan.batch_size == 0) throw std::invalid_argument("batches: batch_size must be >= 1");
  const std::vector<std::size_t> perm = epoch_permutation(d.size(), plan.seed, epoch);
  // Separate stream for view jitter so the permutation does not depend on it.
  std::seed_seq jitter_seq{static_cast<std::uint32_t>(plan.seed), static_cast<std::uint32_t>(epoch),
                           0x6a09e667u};
  Rng jitter_rng(jitter_seq);
  std::normal_distribution<double> jitter(0.0, plan.jitter_sigma);

  std::vector<Batch> out;
  for (std::size_t start = 0; start < perm.size(); start += plan.batch_size) {
    const std::size_t len = std::min(plan.batch_size, perm.size() - start);
    const std::span<const std::size_t> idx(perm.data() + start, len);
    Dataset part = subset(d, idx);
    Batch b;
    if (!plan.multiview) {
      b.x = std::move(part.x);
      b.y = std::move(part.y);
    } else {
      b.x = Matrix(2 * len, d.x.cols());
      b.y.resize(2 * len);
      b.pairing.resize(2 * len);
      for (std::size_t k = 0; k < len; ++k) {
        for (std::size_t view = 0; view < 2; ++view) {
          const std::size_t r = 2 * k + view;
          auto dst = b.x.row(r);
          auto src = part.x.row(k);
          for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = src[j] + jitter(jitter_rng);
          b.y[r] = part.y[k];
          b.pairing[r] = 2 * k + (1 - view);
        }
      }
    }
    out.push_back(std::move(b));
  }
  return out;
}

Batch as_batch(const Dataset& d) { return {d.x, d.y, {}}; }

}  // namespace rsam
