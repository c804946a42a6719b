#include "ihpe/finger_detect.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>

namespace ihpe {

void DetectConfig::validate() const {
  if (!(distance_threshold_ratio > 1.0)) throw ConfigError("detect: distance_threshold_ratio must exceed 1");
  if (curvature_window < 2) throw ConfigError("detect: curvature_window must be >= 2");
  if (!(curvature_min > 0.0 && curvature_min < M_PI)) throw ConfigError("detect: curvature_min must be in (0, pi)");
  if (!(root_radius_fraction > 0.0)) throw ConfigError("detect: root_radius_fraction must be positive");
  for (double f : interpolation_fractions) {
    if (!(f > 0.0 && f < 1.0)) throw ConfigError("detect: interpolation fractions must lie in (0, 1)");
  }
  if (max_fingers < 1) throw ConfigError("detect: max_fingers must be positive");
}

namespace {

// 1D squared distance transform of sampled function f (lower envelope of parabolas).
void distance_1d(const double* f, int n, double* out, std::vector<int>& v, std::vector<double>& z) {
  v.resize(n);
  z.resize(n + 1);
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  auto intersect = [&](int q, int p) {
    return ((f[q] + static_cast<double>(q) * q) - (f[p] + static_cast<double>(p) * p)) / (2.0 * q - 2.0 * p);
  };
  for (int q = 1; q < n; ++q) {
    double s = intersect(q, v[k]);
    while (s <= z[k]) {
      --k;
      s = intersect(q, v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double d = q - v[k];
    out[q] = d * d + f[v[k]];
  }
}

constexpr std::array<Pixel, 8> kRing = {{{-1, 0}, {-1, -1}, {0, -1}, {1, -1}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}}};

int ring_index(int du, int dv) {
  for (int i = 0; i < 8; ++i) {
    if (kRing[i].u == du && kRing[i].v == dv) return i;
  }
  return -1;
}

}  // namespace

DistanceMap distance_transform(const Mask& mask) {
  if (mask.count() == 0) throw DegenerateError("distance transform of an empty mask");
  // Pad by one false pixel on each side so the border counts as background.
  const int w = mask.width + 2;
  const int h = mask.height + 2;
  constexpr double kInf = 1e20;
  std::vector<double> grid(static_cast<std::size_t>(w) * h, 0.0);
  for (int v = 0; v < mask.height; ++v) {
    for (int u = 0; u < mask.width; ++u) {
      if (mask(u, v)) grid[static_cast<std::size_t>(v + 1) * w + (u + 1)] = kInf;
    }
  }
  std::vector<int> env;
  std::vector<double> z;
  std::vector<double> f(std::max(w, h));
  std::vector<double> out(std::max(w, h));
  for (int u = 0; u < w; ++u) {
    for (int v = 0; v < h; ++v) f[v] = grid[static_cast<std::size_t>(v) * w + u];
    distance_1d(f.data(), h, out.data(), env, z);
    for (int v = 0; v < h; ++v) grid[static_cast<std::size_t>(v) * w + u] = out[v];
  }
  for (int v = 0; v < h; ++v) {
    double* row = &grid[static_cast<std::size_t>(v) * w];
    std::copy(row, row + w, f.begin());
    distance_1d(f.data(), w, out.data(), env, z);
    std::copy(out.begin(), out.begin() + w, row);
  }
  DistanceMap dm;
  dm.width = mask.width;
  dm.height = mask.height;
  dm.values.resize(static_cast<std::size_t>(mask.width) * mask.height);
  for (int v = 0; v < mask.height; ++v) {
    for (int u = 0; u < mask.width; ++u) {
      const double sq = grid[static_cast<std::size_t>(v + 1) * w + (u + 1)];
      dm.values[static_cast<std::size_t>(v) * mask.width + u] = static_cast<float>(std::sqrt(sq));
    }
  }
  return dm;
}

PalmEstimate palm_center(const DistanceMap& dmap) {
  PalmEstimate best;
  float best_value = 0.0f;
  for (int v = 0; v < dmap.height; ++v) {
    for (int u = 0; u < dmap.width; ++u) {
      if (dmap(u, v) > best_value) {
        best_value = dmap(u, v);
        best.center = {u, v};
      }
    }
  }
  if (!(best_value > 0.0f)) throw DegenerateError("distance map has no positive value");
  best.radius = best_value;
  return best;
}

Mask largest_component(const Mask& mask) {
  std::vector<int> label(mask.bits.size(), -1);
  std::vector<std::size_t> sizes;
  std::vector<Pixel> stack;
  for (int v = 0; v < mask.height; ++v) {
    for (int u = 0; u < mask.width; ++u) {
      const std::size_t idx = static_cast<std::size_t>(v) * mask.width + u;
      if (!mask.bits[idx] || label[idx] >= 0) continue;
      const int id = static_cast<int>(sizes.size());
      std::size_t size = 0;
      label[idx] = id;
      stack.push_back({u, v});
      while (!stack.empty()) {
        const Pixel p = stack.back();
        stack.pop_back();
        ++size;
        for (const Pixel& d : kRing) {
          const int nu = p.u + d.u;
          const int nv = p.v + d.v;
          if (!mask.get(nu, nv)) continue;
          const std::size_t n = static_cast<std::size_t>(nv) * mask.width + nu;
          if (label[n] >= 0) continue;
          label[n] = id;
          stack.push_back({nu, nv});
        }
      }
      sizes.push_back(size);
    }
  }
  Mask out(mask.width, mask.height);
  if (sizes.empty()) return out;
  const int keep = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  for (std::size_t i = 0; i < label.size(); ++i) out.bits[i] = label[i] == keep ? 1 : 0;
  return out;
}

std::vector<Pixel> trace_boundary(const Mask& input) {
  const Mask mask = largest_component(input);
  Pixel start{-1, -1};
  for (int v = 0; v < mask.height && start.u < 0; ++v) {
    for (int u = 0; u < mask.width; ++u) {
      if (mask(u, v)) {
        start = {u, v};
        break;
      }
    }
  }
  if (start.u < 0) throw DegenerateError("cannot trace the boundary of an empty mask");

  // Moore-neighbour tracing. `back` is the ring index, seen from `cur`, of the
  // background pixel we arrived from; the search resumes clockwise after it.
  auto step = [&](Pixel cur, int back, Pixel& next, int& next_back) {
    for (int i = 1; i <= 8; ++i) {
      const int d = (back + i) % 8;
      const Pixel n{cur.u + kRing[d].u, cur.v + kRing[d].v};
      if (mask.get(n.u, n.v)) {
        const int pd = (d + 7) % 8;
        const Pixel prev{cur.u + kRing[pd].u, cur.v + kRing[pd].v};
        next = n;
        next_back = ring_index(prev.u - n.u, prev.v - n.v);
        return true;
      }
    }
    return false;
  };

  std::vector<Pixel> loop{start};
  Pixel first_next;
  int back = 0;  // west of the first raster pixel is background
  int first_back = 0;
  if (!step(start, back, first_next, first_back)) return loop;

  Pixel cur = first_next;
  back = first_back;
  const std::size_t cap = 4 * mask.count() + 16;
  while (loop.size() <= cap) {
    Pixel next;
    int next_back = 0;
    if (cur == start) {
      step(cur, back, next, next_back);
      if (next == first_next) break;
    }
    loop.push_back(cur);
    step(cur, back, next, next_back);
    cur = next;
    back = next_back;
  }
  return loop;
}

std::vector<Pixel> detect_fingertips(std::span<const Pixel> boundary, Pixel palm_center, double palm_radius,
                                     const DetectConfig& cfg) {
  cfg.validate();
  const int n = static_cast<int>(boundary.size());
  const int w = cfg.curvature_window;
  if (n < 2 * w + 1) return {};

  std::vector<double> dist(n);
  for (int i = 0; i < n; ++i) {
    const double du = boundary[i].u - palm_center.u;
    const double dv = boundary[i].v - palm_center.v;
    dist[i] = std::sqrt(du * du + dv * dv);
  }
  const double threshold = cfg.distance_threshold_ratio * palm_radius;
  auto at = [&](int i) { return ((i % n) + n) % n; };

  std::vector<int> candidates;
  for (int i = 0; i < n; ++i) {
    if (!(dist[i] > threshold)) continue;
    bool is_max = true;
    for (int k = -w; k <= w && is_max; ++k) is_max = dist[at(i + k)] <= dist[i];
    if (!is_max) continue;
    const Pixel& p = boundary[i];
    const Pixel& a = boundary[at(i - w)];
    const Pixel& b = boundary[at(i + w)];
    const double ax = a.u - p.u, ay = a.v - p.v, bx = b.u - p.u, by = b.v - p.v;
    const double na = std::hypot(ax, ay), nb = std::hypot(bx, by);
    if (na == 0.0 || nb == 0.0) continue;
    const double cosang = std::clamp((ax * bx + ay * by) / (na * nb), -1.0, 1.0);
    const double turning = M_PI - std::acos(cosang);
    if (turning >= cfg.curvature_min) candidates.push_back(i);
  }

  // Farthest first; drop maxima within one window (along the loop) of a kept one.
  std::stable_sort(candidates.begin(), candidates.end(), [&](int x, int y) { return dist[x] > dist[y]; });
  std::vector<int> kept;
  for (int c : candidates) {
    bool near = false;
    for (int k : kept) {
      const int gap = std::abs(c - k);
      if (std::min(gap, n - gap) < w) {
        near = true;
        break;
      }
    }
    if (!near) kept.push_back(c);
    if (static_cast<int>(kept.size()) == cfg.max_fingers) break;
  }
  std::vector<Pixel> tips;
  tips.reserve(kept.size());
  for (int k : kept) tips.push_back(boundary[k]);
  return tips;
}

Pixel locate_root(Pixel tip, Pixel palm_center, const DistanceMap& dmap, const DetectConfig& cfg) {
  if (!dmap.in_bounds(tip) || !dmap.in_bounds(palm_center)) throw BoundsError("root search outside the image");
  const double radius = dmap(palm_center);
  const double target = cfg.root_radius_fraction * radius;
  const double du = palm_center.u - tip.u;
  const double dv = palm_center.v - tip.v;
  const double len = std::hypot(du, dv);
  if (len == 0.0) return tip;
  const int steps = static_cast<int>(std::floor(len));
  for (int s = 0; s <= steps; ++s) {
    const double t = s / len;
    const Pixel p = PixelF{tip.u + t * du, tip.v + t * dv}.rounded();
    if (dmap.in_bounds(p) && dmap(p) >= target) return p;
  }
  // No crossing: the point at palm-radius distance from the centre, clamped to the segment.
  const double from_center = std::min(radius, len);
  return PixelF{palm_center.u - du / len * from_center, palm_center.v - dv / len * from_center}.rounded();
}

std::vector<PixelF> interpolate_joints(Pixel tip, Pixel root, const SkeletonSpec& skeleton, int finger,
                                       const DetectConfig& cfg) {
  const std::size_t chain = skeleton.finger_chains.at(finger).size();
  const std::size_t interior = chain - 2;
  std::vector<double> fractions = cfg.interpolation_fractions;
  if (fractions.size() != interior) {
    fractions.clear();
    for (std::size_t k = 1; k <= interior; ++k) fractions.push_back(static_cast<double>(k) / (interior + 1));
  }
  std::vector<PixelF> joints;
  joints.reserve(chain);
  joints.push_back({static_cast<double>(root.u), static_cast<double>(root.v)});
  for (double f : fractions) {
    joints.push_back({root.u + f * (tip.u - root.u), root.v + f * (tip.v - root.v)});
  }
  joints.push_back({static_cast<double>(tip.u), static_cast<double>(tip.v)});
  return joints;
}

FingerDetection detect_stretched_fingers(const DepthImage& img, const SkeletonSpec& skeleton,
                                         const DetectConfig& cfg) {
  const Mask mask = largest_component(foreground_mask(img));
  if (mask.count() == 0) throw NoHandError("image has no foreground pixels");
  FingerDetection out;
  const DistanceMap dmap = distance_transform(mask);
  out.palm = palm_center(dmap);
  out.boundary = trace_boundary(mask);
  const auto tips = detect_fingertips(out.boundary, out.palm.center, out.palm.radius, cfg);
  for (const Pixel& tip : tips) {
    DetectedFinger f;
    f.tip = tip;
    f.root = locate_root(tip, out.palm.center, dmap, cfg);
    f.tip_distance = std::hypot(tip.u - out.palm.center.u, tip.v - out.palm.center.v);
    // Chain length is common to all fingers of the built-in skeletons; use the middle finger's.
    f.joints = interpolate_joints(f.tip, f.root, skeleton, static_cast<int>(Finger::Middle), cfg);
    out.fingers.push_back(std::move(f));
  }
  return out;
}

std::optional<float> nearest_foreground_depth(const DepthImage& img, Pixel p, int max_radius) {
  if (img.is_foreground(p)) return img(p.u, p.v);
  // Rings of growing Chebyshev radius; within a ring keep the Euclidean-closest.
  for (int r = 1; r <= max_radius; ++r) {
    double best = std::numeric_limits<double>::infinity();
    std::optional<float> depth;
    for (int dv = -r; dv <= r; ++dv) {
      for (int du = -r; du <= r; ++du) {
        if (std::max(std::abs(du), std::abs(dv)) != r) continue;
        if (!img.is_foreground(p.u + du, p.v + dv)) continue;
        const double d2 = du * du + dv * dv;
        if (d2 < best) {
          best = d2;
          depth = img(p.u + du, p.v + dv);
        }
      }
    }
    if (depth) return depth;
  }
  return std::nullopt;
}

std::vector<Vec3> detected_joints_3d(const DetectedFinger& finger, const DepthImage& img,
                                     const CameraIntrinsics& intr) {
  std::vector<Vec3> out;
  out.reserve(finger.joints.size());
  for (const PixelF& j : finger.joints) {
    const auto depth = nearest_foreground_depth(img, j.rounded());
    if (!depth) throw NoHandError("no foreground near detected joint");
    out.push_back(backproject(j.u, j.v, *depth, intr));
  }
  return out;
}

double identity_cost(std::span<const Vec3> detected, const HandPose& baseline, int finger) {
  const auto& chain = baseline.skeleton->finger_chains.at(finger);
  if (detected.size() != chain.size()) throw DataError("detected chain length differs from skeleton chain");
  double cost = 0.0;
  for (std::size_t j = 0; j < chain.size(); ++j) cost += squared_distance(detected[j], baseline[chain[j]]);
  return cost;
}

std::vector<int> match_identity(std::span<const std::vector<Vec3>> detected_chains, const HandPose& baseline) {
  std::vector<std::tuple<double, int, int>> pairs;
  for (int d = 0; d < static_cast<int>(detected_chains.size()); ++d) {
    for (int f = 0; f < kFingerCount; ++f) pairs.emplace_back(identity_cost(detected_chains[d], baseline, f), d, f);
  }
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const auto& a, const auto& b) { return std::get<0>(a) < std::get<0>(b); });
  std::vector<int> identity(detected_chains.size(), -1);
  std::array<bool, kFingerCount> used{};
  for (const auto& [cost, d, f] : pairs) {
    if (identity[d] >= 0 || used[f]) continue;
    identity[d] = f;
    used[f] = true;
  }
  return identity;
}

std::vector<int> match_identity(std::span<DetectedFinger> fingers, const HandPose& baseline, const DepthImage& img,
                                const CameraIntrinsics& intr) {
  std::vector<std::vector<Vec3>> chains;
  chains.reserve(fingers.size());
  for (const auto& f : fingers) chains.push_back(detected_joints_3d(f, img, intr));
  auto identity = match_identity(std::span<const std::vector<Vec3>>(chains), baseline);
  for (std::size_t i = 0; i < fingers.size(); ++i) fingers[i].identity = identity[i];
  return identity;
}

}  // namespace ihpe
