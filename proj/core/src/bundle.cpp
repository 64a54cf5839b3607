// SPDX-License-Identifier: Apache-2.0
#include "v3dg/bundle.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include <zlib.h>

#include "v3dg/error.hpp"

namespace v3dg {

static_assert(std::endian::native == std::endian::little,
              "bundle I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'V', '3', 'D', 'G'};
constexpr std::uint64_t kPreambleBytes = 8;   // magic + version
constexpr std::uint64_t kHeaderBytes = 48;
constexpr std::uint64_t kHeaderCrcBytes = 4;  // crc32 of preamble + header
constexpr std::uint64_t kClusterBytes = 48;
constexpr std::uint64_t kGaussianBytes = 14 * sizeof(float);
constexpr std::uint64_t kTrailerBytes = 4;    // crc32

class Writer {
 public:
  explicit Writer(std::size_t reserve) { buf_.reserve(reserve); }

  template <typename T>
  void put(T value) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }
  void put_sphere(const BoundingSphere& s) {
    put(static_cast<float>(s.center.x()));
    put(static_cast<float>(s.center.y()));
    put(static_cast<float>(s.center.z()));
    put(static_cast<float>(s.radius));
  }
  template <typename Vec>
  void put_floats(const std::vector<Vec>& rows) {
    for (const auto& r : rows) {
      for (Eigen::Index k = 0; k < r.size(); ++k) put(r[k]);
    }
  }

  std::vector<std::uint8_t>& bytes() { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

  template <typename T>
  T get() {
    T value;
    std::memcpy(&value, data_ + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  BoundingSphere get_sphere() {
    BoundingSphere s;
    s.center.x() = get<float>();
    s.center.y() = get<float>();
    s.center.z() = get<float>();
    s.radius = get<float>();
    return s;
  }
  template <typename Vec>
  void get_floats(std::vector<Vec>& rows) {
    for (auto& r : rows) {
      for (Eigen::Index k = 0; k < r.size(); ++k) r[k] = get<float>();
    }
  }

 private:
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

std::uint32_t checksum(const std::uint8_t* data, std::size_t size) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks for very large bundles.
  constexpr std::size_t kChunk = 1u << 30;
  while (size > 0) {
    const std::size_t n = std::min(size, kChunk);
    crc = crc32(crc, data, static_cast<uInt>(n));
    data += n;
    size -= n;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

void BuildParams::validate() const {
  if (gaussians_per_cluster < 1) {
    raise(ErrorKind::kValidation, "gaussians per cluster must be >= 1");
  }
  if (clusters_per_group < 2) {
    raise(ErrorKind::kValidation, "clusters per group must be >= 2");
  }
  if (!(scale_expansion >= 1.0) || !std::isfinite(scale_expansion)) {
    raise(ErrorKind::kValidation, "scale expansion must be a finite value >= 1");
  }
}

std::vector<std::size_t> Bundle::clusters_in_layer(std::uint32_t layer) const {
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    if (clusters[i].layer == layer) ids.push_back(i);
  }
  return ids;
}

std::size_t Bundle::gaussians_in_layer(std::uint32_t layer) const {
  std::size_t n = 0;
  for (const auto& c : clusters) {
    if (c.layer == layer) n += c.count;
  }
  return n;
}

GaussianSet Bundle::layer_gaussians(std::uint32_t layer) const {
  GaussianSet out;
  for (const auto& c : clusters) {
    if (c.layer == layer) out.append(gaussians, c.offset, c.count);
  }
  return out;
}

GaussianSet Bundle::cluster_gaussians(std::size_t cluster_id) const {
  const Cluster& c = clusters.at(cluster_id);
  return gaussians.slice(c.offset, c.count);
}

std::vector<std::string> validate_bundle(const Bundle& b) {
  std::vector<std::string> problems;
  auto report = [&](const std::string& what) { problems.push_back(what); };

  const std::size_t n = b.gaussians.size();
  if (b.gaussians.scales.size() != n || b.gaussians.rotations.size() != n ||
      b.gaussians.opacities.size() != n || b.gaussians.colors.size() != n) {
    report("column lengths: gaussian arrays differ in length");
    return problems;
  }
  if (b.layer_count == 0 && !b.clusters.empty()) {
    report("layer count: zero layers but clusters present");
  }

  // Disjoint, exact coverage of the Gaussian array.
  std::vector<std::size_t> order(b.clusters.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) {
    return b.clusters[a].offset < b.clusters[c].offset;
  });
  std::uint64_t cursor = 0;
  for (std::size_t id : order) {
    const Cluster& c = b.clusters[id];
    if (c.offset != cursor) {
      std::ostringstream os;
      os << "range coverage: cluster " << id << " starts at " << c.offset << ", expected "
         << cursor;
      report(os.str());
      break;
    }
    cursor += c.count;
  }
  if (problems.empty() && cursor != n) {
    std::ostringstream os;
    os << "range coverage: clusters cover " << cursor << " of " << n << " gaussians";
    report(os.str());
  }

  const std::uint32_t top = b.layer_count == 0 ? 0 : b.layer_count - 1;
  for (std::size_t id = 0; id < b.clusters.size(); ++id) {
    const Cluster& c = b.clusters[id];
    auto bad = [&](const std::string& invariant, const std::string& detail) {
      std::ostringstream os;
      os << invariant << ": cluster " << id << " (layer " << c.layer << ") " << detail;
      report(os.str());
    };
    if (c.count == 0) bad("cluster size", "is empty");
    if (c.count > b.params.gaussians_per_cluster) bad("cluster size", "exceeds the cluster limit");
    if (c.layer >= b.layer_count) bad("layer index", "is out of range");
    if (!c.own.center.allFinite() || !std::isfinite(c.own.radius) || c.own.radius < 0) {
      bad("own sphere", "is not finite and non-negative");
    }
    if (!c.parent.center.allFinite() || std::isnan(c.parent.radius) || c.parent.radius < 0) {
      bad("parent sphere", "is malformed");
    }
    if (c.layer == 0 && c.own.radius != 0.0) bad("layer-0 own radius", "is not zero");
    const bool top_layer = c.layer == top;
    if (top_layer != c.is_top()) {
      bad("top sentinel", top_layer ? "lacks the +inf parent radius"
                                    : "has an infinite parent radius below the top layer");
    }
    if (!c.is_top()) {
      if (!(c.parent.radius > c.own.radius)) bad("r_p > r_c", "parent radius is not larger");
      if (!c.parent.encloses(c.own, 1e-6)) bad("enclosure", "parent sphere does not enclose own sphere");
    }
  }

  const std::size_t bad_row = first_invalid_row(b.gaussians);
  if (bad_row < n) {
    report("gaussian row: row " + std::to_string(bad_row) + " violates attribute invariants");
  }
  return problems;
}

std::uint64_t serialized_size(std::uint64_t cluster_count, std::uint64_t gaussian_count) {
  return kPreambleBytes + kHeaderBytes + kHeaderCrcBytes + kClusterBytes * cluster_count +
         kGaussianBytes * gaussian_count + kTrailerBytes;
}

std::vector<std::uint8_t> serialize_bundle(const Bundle& b) {
  const auto& gs = b.gaussians;
  Writer w(serialized_size(b.clusters.size(), gs.size()));
  for (char ch : kMagic) w.put(ch);
  w.put(Bundle::kFormatVersion);

  w.put(b.params.gaussians_per_cluster);
  w.put(b.params.clusters_per_group);
  w.put(b.params.simplify_iterations);
  w.put(b.layer_count);
  w.put(b.params.scale_expansion);
  w.put(b.params.seed);
  w.put(static_cast<std::uint64_t>(b.clusters.size()));
  w.put(static_cast<std::uint64_t>(gs.size()));
  w.put(checksum(w.bytes().data(), w.bytes().size()));

  for (const Cluster& c : b.clusters) {
    w.put(c.layer);
    w.put(c.count);
    w.put(c.offset);
    w.put_sphere(c.own);
    w.put_sphere(c.parent);
  }

  w.put_floats(gs.positions);
  w.put_floats(gs.scales);
  w.put_floats(gs.rotations);
  for (float o : gs.opacities) w.put(o);
  w.put_floats(gs.colors);

  auto& bytes = w.bytes();
  w.put(checksum(bytes.data(), bytes.size()));
  return std::move(w.bytes());
}

Bundle deserialize_bundle(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kPreambleBytes) raise(ErrorKind::kIo, "bundle truncated before header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) raise(ErrorKind::kFormat, "bad bundle magic");
  Reader r(bytes.data(), bytes.size());
  r.get<std::uint32_t>();  // magic
  const auto version = r.get<std::uint32_t>();
  if (version != Bundle::kFormatVersion) {
    raise(ErrorKind::kFormat, "unsupported bundle version " + std::to_string(version));
  }
  if (bytes.size() < kPreambleBytes + kHeaderBytes + kHeaderCrcBytes) {
    raise(ErrorKind::kIo, "bundle truncated inside header");
  }
  std::uint32_t header_crc;
  std::memcpy(&header_crc, bytes.data() + kPreambleBytes + kHeaderBytes, sizeof(header_crc));
  if (header_crc != checksum(bytes.data(), kPreambleBytes + kHeaderBytes)) {
    raise(ErrorKind::kCorruption, "bundle header checksum mismatch");
  }

  Bundle b;
  b.params.gaussians_per_cluster = r.get<std::uint32_t>();
  b.params.clusters_per_group = r.get<std::uint32_t>();
  b.params.simplify_iterations = r.get<std::uint32_t>();
  b.layer_count = r.get<std::uint32_t>();
  b.params.scale_expansion = r.get<double>();
  b.params.seed = r.get<std::uint64_t>();
  const auto cluster_count = r.get<std::uint64_t>();
  const auto gaussian_count = r.get<std::uint64_t>();
  r.get<std::uint32_t>();  // header crc, checked above

  // Guard the size arithmetic below against corrupted counts.
  constexpr std::uint64_t kLimit = std::uint64_t{1} << 40;
  if (cluster_count > kLimit || gaussian_count > kLimit) {
    raise(ErrorKind::kCorruption, "bundle header counts are implausible");
  }
  const std::uint64_t expected = serialized_size(cluster_count, gaussian_count);
  if (bytes.size() < expected) {
    raise(ErrorKind::kIo, "bundle truncated: " + std::to_string(bytes.size()) + " of " +
                              std::to_string(expected) + " bytes");
  }
  if (bytes.size() > expected) raise(ErrorKind::kCorruption, "trailing bytes after bundle");


  b.clusters.resize(cluster_count);
  for (Cluster& c : b.clusters) {
    c.layer = r.get<std::uint32_t>();
    c.count = r.get<std::uint32_t>();
    c.offset = r.get<std::uint64_t>();
    c.own = r.get_sphere();
    c.parent = r.get_sphere();
  }

  auto& gs = b.gaussians;
  gs.resize(gaussian_count);
  r.get_floats(gs.positions);
  r.get_floats(gs.scales);
  r.get_floats(gs.rotations);
  for (float& o : gs.opacities) o = r.get<float>();
  r.get_floats(gs.colors);

  // Invariants first so a damaged table is reported by name.
  const auto problems = validate_bundle(b);
  if (!problems.empty()) raise(ErrorKind::kCorruption, problems.front());
  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, bytes.data() + expected - kTrailerBytes, sizeof(stored_crc));
  if (stored_crc != checksum(bytes.data(), expected - kTrailerBytes)) {
    raise(ErrorKind::kCorruption, "bundle checksum mismatch");
  }
  return b;
}

void write_file_atomic(const std::filesystem::path& path, const void* data, std::size_t size) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) raise(ErrorKind::kIo, "cannot open " + tmp.string() + " for writing");
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      raise(ErrorKind::kIo, "failed writing " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    raise(ErrorKind::kIo, "cannot move output into place at " + path.string());
  }
}

void write_bundle(const Bundle& b, const std::filesystem::path& path) {
  const auto bytes = serialize_bundle(b);
  write_file_atomic(path, bytes.data(), bytes.size());
}

Bundle read_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::kIo, "cannot open bundle " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return deserialize_bundle(bytes);
  } catch (const Error& e) {
    throw Error(e.kind(), std::string(e.what()) + " (" + path.string() + ")");
  }
}

}  // namespace v3dg
