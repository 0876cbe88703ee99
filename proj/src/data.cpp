#include "qmit/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "qmit/errors.hpp"

namespace qmit {

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(std::max(classes, 0)), 0);
  for (const auto& s : samples)
    if (s.label >= 0 && s.label < classes) ++counts[static_cast<std::size_t>(s.label)];
  return counts;
}

// --- IDX ---------------------------------------------------------------------

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset, const char* what) {
  if (bytes.size() < offset + 4)
    throw FormatError(std::string(what) + ": header truncated, file has " + std::to_string(bytes.size()) + " bytes",
                      bytes.size());
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void check_magic(std::uint32_t magic, std::uint32_t expected, const char* what) {
  if (magic != expected) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s: bad magic 0x%08x, expected 0x%08x", what, magic, expected);
    throw FormatError(buf, 0);
  }
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (!f) throw DataError("cannot open " + path);
  std::vector<std::uint8_t> out;
  std::uint8_t buf[1 << 16];
  int got;
  while ((got = gzread(f, buf, sizeof buf)) > 0) out.insert(out.end(), buf, buf + got);
  int err = 0;
  const char* msg = gzerror(f, &err);
  const std::string detail = msg ? msg : "";
  gzclose(f);
  if (got < 0 || (err != Z_OK && err != Z_STREAM_END)) throw DataError("read error in " + path + ": " + detail);
  return out;
}

}  // namespace

RawDataset parse_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels) {
  check_magic(read_be32(images, 0, "images"), kImageMagic, "images");
  check_magic(read_be32(labels, 0, "labels"), kLabelMagic, "labels");
  const std::uint32_t count = read_be32(images, 4, "images");
  const std::uint32_t rows = read_be32(images, 8, "images");
  const std::uint32_t cols = read_be32(images, 12, "images");
  const std::uint32_t label_count = read_be32(labels, 4, "labels");
  if (label_count != count)
    throw FormatError("labels: count " + std::to_string(label_count) + " does not match " + std::to_string(count) +
                          " images",
                      4);
  if (rows == 0 || cols == 0 || rows > 4096 || cols > 4096)
    throw FormatError("images: unsupported dimensions " + std::to_string(rows) + "x" + std::to_string(cols), 8);

  const std::size_t pixels = std::size_t{rows} * cols;
  const std::size_t expected = 16 + pixels * count;
  if (images.size() < expected)
    throw FormatError("images: pixel section truncated, expected " + std::to_string(expected) + " bytes, got " +
                          std::to_string(images.size()),
                      images.size());
  if (labels.size() < 8 + std::size_t{count})
    throw FormatError("labels: truncated, expected " + std::to_string(8 + std::size_t{count}) + " bytes, got " +
                          std::to_string(labels.size()),
                      labels.size());

  RawDataset raw;
  raw.rows = static_cast<int>(rows);
  raw.cols = static_cast<int>(cols);
  raw.images.reserve(count);
  raw.labels.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto* p = images.data() + 16 + i * pixels;
    raw.images.emplace_back(p, p + pixels);
    raw.labels.push_back(labels[8 + i]);
  }
  return raw;
}

RawDataset load_idx(const std::string& images_path, const std::string& labels_path) {
  const auto images = read_file(images_path);
  const auto labels = read_file(labels_path);
  return parse_idx(images, labels);
}

// --- preprocessing -----------------------------------------------------------

std::vector<double> preprocess(std::span<const std::uint8_t> image, int rows, int cols) {
  if (rows < 1 || cols < 1 || image.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols))
    throw ValidationError("preprocess: image size does not match its dimensions");
  auto px = [&](int r, int c) { return static_cast<double>(image[static_cast<std::size_t>(r * cols + c)]); };
  std::vector<double> out(kFeatureCount);
  const double sr = static_cast<double>(rows - 1) / (kFeatureSide - 1);
  const double sc = static_cast<double>(cols - 1) / (kFeatureSide - 1);
  for (int r = 0; r < kFeatureSide; ++r) {
    const double y = r * sr;
    const int y0 = std::min(static_cast<int>(y), rows - 1);
    const int y1 = std::min(y0 + 1, rows - 1);
    const double fy = y - y0;
    for (int c = 0; c < kFeatureSide; ++c) {
      const double x = c * sc;
      const int x0 = std::min(static_cast<int>(x), cols - 1);
      const int x1 = std::min(x0 + 1, cols - 1);
      const double fx = x - x0;
      const double top = px(y0, x0) * (1.0 - fx) + px(y0, x1) * fx;
      const double bottom = px(y1, x0) * (1.0 - fx) + px(y1, x1) * fx;
      const double v = (top * (1.0 - fy) + bottom * fy) / 255.0;
      out[static_cast<std::size_t>(r * kFeatureSide + c)] = std::clamp(v, 0.0, 1.0);
    }
  }
  return out;
}

// --- benchmarks --------------------------------------------------------------

BenchmarkSpec benchmark_spec(std::string_view name) {
  if (name == "MNIST-4") return {"MNIST-4", {0, 1, 2, 3}};
  if (name == "MNIST-2") return {"MNIST-2", {3, 6}};
  if (name == "Fashion-4") return {"Fashion-4", {0, 1, 2, 3}};
  if (name == "Fashion-2") return {"Fashion-2", {3, 6}};
  throw ValidationError("unknown benchmark '" + std::string(name) + "' (MNIST-4, MNIST-2, Fashion-4, Fashion-2)");
}

namespace {

/// Indices of each source class, in file order.
std::vector<std::vector<std::size_t>> group_by_class(const RawDataset& raw, const BenchmarkSpec& spec) {
  std::map<int, std::size_t> position;
  for (std::size_t i = 0; i < spec.source_classes.size(); ++i) position[spec.source_classes[i]] = i;
  if (position.size() != spec.source_classes.size()) throw ValidationError("benchmark lists a class twice");
  std::vector<std::vector<std::size_t>> groups(spec.source_classes.size());
  for (std::size_t i = 0; i < raw.labels.size(); ++i) {
    auto it = position.find(raw.labels[i]);
    if (it != position.end()) groups[it->second].push_back(i);
  }
  for (std::size_t k = 0; k < groups.size(); ++k)
    if (groups[k].empty())
      throw DataError(spec.name + ": no samples of class " + std::to_string(spec.source_classes[k]));
  return groups;
}

Dataset gather(const RawDataset& raw, const std::vector<std::pair<std::size_t, int>>& picks, int classes, Rng& rng) {
  Dataset d;
  d.classes = classes;
  d.samples.reserve(picks.size());
  for (auto [index, label] : picks) d.samples.push_back({preprocess(raw.images[index], raw.rows, raw.cols), label});
  std::shuffle(d.samples.begin(), d.samples.end(), rng);
  return d;
}

std::size_t per_class(std::size_t cap, int classes) {
  const std::size_t n = cap / static_cast<std::size_t>(classes);
  if (n == 0) throw ValidationError("cap " + std::to_string(cap) + " is smaller than the class count");
  return n;
}

}  // namespace

Split make_benchmark(const RawDataset& train_raw, const RawDataset& test_raw, const BenchmarkSpec& spec,
                     std::size_t train_cap, std::size_t test_cap, std::uint64_t seed) {
  Rng rng(seed);
  const int c = spec.classes();
  auto pick = [&](const RawDataset& raw, std::size_t cap) {
    auto groups = group_by_class(raw, spec);
    std::vector<std::pair<std::size_t, int>> picks;
    const std::size_t take = per_class(cap, c);
    for (std::size_t k = 0; k < groups.size(); ++k) {
      std::shuffle(groups[k].begin(), groups[k].end(), rng);
      for (std::size_t i = 0; i < std::min(take, groups[k].size()); ++i)
        picks.emplace_back(groups[k][i], static_cast<int>(k));
    }
    return gather(raw, picks, c, rng);
  };
  Split s;
  s.train = pick(train_raw, train_cap);
  s.test = pick(test_raw, test_cap);
  return s;
}

Split make_benchmark(const RawDataset& raw, const BenchmarkSpec& spec, std::size_t train_cap, std::size_t test_cap,
                     std::uint64_t seed) {
  Rng rng(seed);
  const int c = spec.classes();
  auto groups = group_by_class(raw, spec);
  const std::size_t train_take = per_class(train_cap, c);
  const std::size_t test_take = per_class(test_cap, c);
  std::vector<std::pair<std::size_t, int>> train_picks, test_picks;
  for (std::size_t k = 0; k < groups.size(); ++k) {
    auto& g = groups[k];
    std::shuffle(g.begin(), g.end(), rng);
    // keep the test share intact when the class is short
    const std::size_t test_n = std::min(test_take, g.size() / 2);
    const std::size_t train_n = std::min(train_take, g.size() - test_n);
    for (std::size_t i = 0; i < train_n; ++i) train_picks.emplace_back(g[i], static_cast<int>(k));
    for (std::size_t i = 0; i < test_n; ++i) test_picks.emplace_back(g[train_n + i], static_cast<int>(k));
  }
  Split s;
  s.train = gather(raw, train_picks, c, rng);
  s.test = gather(raw, test_picks, c, rng);
  return s;
}

Dataset synthetic_blobs(int classes, std::size_t per_class_count, double separation, std::uint64_t seed) {
  if (classes != 2 && classes != 4) throw ValidationError("synthetic_blobs: classes must be 2 or 4");
  if (!(separation >= 0.0) || !std::isfinite(separation)) throw ValidationError("separation must be >= 0");
  Rng rng(seed);
  std::bernoulli_distribution coin(0.5);
  std::normal_distribution<double> noise(0.0, 0.02);
  std::vector<std::vector<double>> anchors(static_cast<std::size_t>(classes), std::vector<double>(kFeatureCount));
  for (auto& a : anchors)
    for (auto& v : a) v = coin(rng) ? 1.0 : -1.0;
  Dataset d;
  d.classes = classes;
  for (std::size_t i = 0; i < per_class_count; ++i) {
    for (int k = 0; k < classes; ++k) {
      Sample s;
      s.label = k;
      s.features.resize(kFeatureCount);
      for (int j = 0; j < kFeatureCount; ++j) {
        const double centre = 0.5 + 0.1 * separation * anchors[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
        s.features[static_cast<std::size_t>(j)] = std::clamp(centre + noise(rng), 0.0, 1.0);
      }
      d.samples.push_back(std::move(s));
    }
  }
  return d;
}

}  // namespace qmit
