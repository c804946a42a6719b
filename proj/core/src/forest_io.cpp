#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "ihpe/forest.hpp"

namespace ihpe {

namespace {

constexpr char kMagic[8] = {'I', 'H', 'P', 'E', 'F', 'R', 'S', 'T'};

class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(const char* p, std::size_t n) { out_.insert(out_.end(), p, p + n); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

  std::size_t offset() const { return pos_; }
  bool at_end() const { return pos_ == in_.size(); }

  void need(std::size_t n, const char* what) const {
    if (in_.size() - pos_ < n) {
      throw FormatError("forest file truncated at byte " + std::to_string(pos_) + " while reading " + what,
                        pos_);
    }
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return in_[pos_++];
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
  void bytes(char* dst, std::size_t n, const char* what) {
    need(n, what);
    std::memcpy(dst, in_.data() + pos_, n);
    pos_ += n;
  }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void write_tree(ByteWriter& w, const Tree& tree) {
  const auto nodes = tree.nodes();
  w.u32(static_cast<std::uint32_t>(nodes.size()));
  for (const auto& n : nodes) {
    if (n.is_leaf()) {
      w.u8(1);
      w.u32(tree.leaf_samples(n.leaf));
      for (double m : tree.leaf_mean(n.leaf)) w.f64(m);
    } else {
      w.u8(0);
      w.f32(n.offsets.first.x);
      w.f32(n.offsets.first.y);
      w.f32(n.offsets.second.x);
      w.f32(n.offsets.second.y);
      w.f32(n.threshold);
    }
  }
}

// Rebuilds one pre-order subtree.
void read_subtree(ByteReader& r, Tree& tree, std::uint32_t node_count, int depth) {
  if (tree.nodes().size() >= node_count) {
    throw FormatError("tree node count exceeded at byte " + std::to_string(r.offset()), r.offset());
  }
  if (depth > 4096) throw FormatError("tree nesting too deep", r.offset());
  const std::size_t at = r.offset();
  const std::uint8_t kind = r.u8("node kind");
  if (kind == 1) {
    const std::uint32_t count = r.u32("leaf sample count");
    std::vector<double> mean(tree.target_dim());
    for (double& m : mean) m = r.f64("leaf mean");
    tree.add_leaf(mean, count);
  } else if (kind == 0) {
    OffsetPair p;
    p.first.x = r.f32("offset");
    p.first.y = r.f32("offset");
    p.second.x = r.f32("offset");
    p.second.y = r.f32("offset");
    const float thr = r.f32("threshold");
    const int node = tree.add_split(p, thr);
    read_subtree(r, tree, node_count, depth + 1);
    tree.set_right(node, static_cast<int>(tree.nodes().size()));
    read_subtree(r, tree, node_count, depth + 1);
  } else {
    throw FormatError("unknown node kind " + std::to_string(kind) + " at byte " + std::to_string(at), at);
  }
}

}  // namespace

std::vector<std::uint8_t> serialize_forest(const Forest& forest) {
  ByteWriter w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(kForestFormatVersion);
  w.u32(static_cast<std::uint32_t>(forest.target_dim()));
  const auto& fc = forest.feature_config();
  w.f64(fc.max_offset_radius);
  w.u8(fc.depth_normalize ? 1 : 0);
  w.f64(fc.focal_px);
  const auto& c = forest.config();
  w.u32(static_cast<std::uint32_t>(c.tree_count));
  w.u32(static_cast<std::uint32_t>(c.max_depth));
  w.u32(static_cast<std::uint32_t>(c.features_per_split));
  w.u32(static_cast<std::uint32_t>(c.thresholds_per_feature));
  w.f64(c.min_info_gain);
  w.u32(static_cast<std::uint32_t>(c.min_samples_leaf));
  w.u32(static_cast<std::uint32_t>(forest.trees().size()));
  for (const Tree& t : forest.trees()) write_tree(w, t);
  return w.take();
}

Forest deserialize_forest(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  char magic[8];
  r.bytes(magic, sizeof magic, "magic");
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw FormatError("not a forest file (bad magic)", 0);
  const std::uint32_t version = r.u32("version");
  if (version != kForestFormatVersion) {
    throw VersionError("forest format version " + std::to_string(version) + " is not supported (expected " +
                           std::to_string(kForestFormatVersion) + ")",
                       version);
  }
  const std::size_t dim_at = r.offset();
  const auto dim = static_cast<int>(r.u32("target dimension"));
  if (dim < 1 || dim > 4096) throw FormatError("implausible target dimension", dim_at);
  FeatureConfig fc;
  fc.max_offset_radius = r.f64("max_offset_radius");
  fc.depth_normalize = r.u8("depth_normalize") != 0;
  fc.focal_px = r.f64("focal_px");
  ForestConfig c;
  c.tree_count = static_cast<int>(r.u32("tree_count"));
  c.max_depth = static_cast<int>(r.u32("max_depth"));
  c.features_per_split = static_cast<int>(r.u32("features_per_split"));
  c.thresholds_per_feature = static_cast<int>(r.u32("thresholds_per_feature"));
  c.min_info_gain = r.f64("min_info_gain");
  c.min_samples_leaf = static_cast<int>(r.u32("min_samples_leaf"));
  const std::size_t count_at = r.offset();
  const std::uint32_t n_trees = r.u32("tree count");
  if (n_trees == 0) throw FormatError("forest file holds no trees", count_at);
  std::vector<Tree> trees;
  for (std::uint32_t t = 0; t < n_trees; ++t) {
    const std::uint32_t node_count = r.u32("node count");
    Tree tree(dim);
    read_subtree(r, tree, node_count, 0);
    if (tree.nodes().size() != node_count) {
      throw FormatError("tree " + std::to_string(t) + " declares " + std::to_string(node_count) + " nodes",
                        r.offset());
    }
    trees.push_back(std::move(tree));
  }
  if (!r.at_end()) {
    throw FormatError("trailing bytes after forest at byte " + std::to_string(r.offset()), r.offset());
  }
  return Forest(fc, c, dim, std::move(trees));
}

void save_forest(const Forest& forest, const std::filesystem::path& path) {
  const auto bytes = serialize_forest(forest);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

Forest load_forest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open forest file '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_forest(bytes);
}

}  // namespace ihpe
