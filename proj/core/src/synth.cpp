#include "ihpe/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ihpe {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct P2 {
  double x = 0.0;
  double y = 0.0;
};

P2 operator+(P2 a, P2 b) { return {a.x + b.x, a.y + b.y}; }
P2 operator-(P2 a, P2 b) { return {a.x - b.x, a.y - b.y}; }
P2 operator*(double s, P2 a) { return {s * a.x, s * a.y}; }
double dot(P2 a, P2 b) { return a.x * b.x + a.y * b.y; }

// Clockwise in the image for y pointing down.
P2 rotate(P2 a, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {a.x * c - a.y * s, a.x * s + a.y * c};
}

// Capsule whose axis depth varies linearly from a to b.
struct Capsule {
  P2 a;
  P2 b;
  double za = 0.0;
  double zb = 0.0;
  double radius = 0.0;

  // Front surface depth at p, or +inf when p misses the capsule.
  double surface(P2 p) const {
    const P2 ab = b - a;
    const double len2 = dot(ab, ab);
    double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const P2 c = a + t * ab;
    const P2 e = p - c;
    const double e2 = dot(e, e);
    if (e2 > radius * radius) return kInf;
    return za + t * (zb - za) - std::sqrt(radius * radius - e2);
  }
};

// Curled chain, as fractions of the palm radius from the palm centre.
constexpr double kCurlRadius[3] = {0.67, 0.45, 0.30};
// Height of curled joints above the palm surface, in finger widths.
constexpr double kCurlLift[3] = {2.0, 1.5, 0.5};

constexpr double kBaseAngleDeg[kFingerCount] = {-72.0, -27.0, -4.0, 18.0, 40.0};

}  // namespace

void SynthHandSpec::validate() const {
  camera.validate();
  if (image_width < 8 || image_height < 8) throw ConfigError("synthetic image too small");
  if (!(palm_depth_mm > 0.0) || !(palm_radius_mm > 0.0)) throw ConfigError("palm depth and radius must be positive");
  if (!(root_radius_ratio > 0.0 && root_radius_ratio < 1.0)) throw ConfigError("root_radius_ratio must be in (0, 1)");
  if (noise_mm < 0.0) throw ConfigError("noise must be non-negative");
  for (const auto& f : fingers) {
    if (!(f.length_mm > 0.0) || !(f.width_mm > 0.0)) throw ConfigError("finger length and width must be positive");
  }
}

SynthHandSpec SynthHandSpec::open_hand() {
  SynthHandSpec s;
  const double lengths[kFingerCount] = {50.0, 66.0, 72.0, 67.0, 54.0};
  const double widths[kFingerCount] = {11.0, 10.0, 10.0, 9.5, 9.0};
  for (int f = 0; f < kFingerCount; ++f) {
    s.fingers[f].angle_rad = kBaseAngleDeg[f] * M_PI / 180.0;
    s.fingers[f].length_mm = lengths[f];
    s.fingers[f].width_mm = widths[f];
  }
  return s;
}

SynthHand generate_synth(const SynthHandSpec& spec, std::uint64_t seed) {
  spec.validate();
  const SkeletonPtr skel = shared_skeleton("msra21");
  const auto& cam = spec.camera;
  const double z0 = spec.palm_depth_mm;
  const double R = spec.palm_radius_mm;

  auto to_pixel = [&](P2 p) { return PixelF{spec.center_u + p.x * cam.fx / z0, spec.center_v + p.y * cam.fy / z0}; };
  auto to_plane = [&](double u, double v) { return P2{(u - spec.center_u) * z0 / cam.fx, (v - spec.center_v) * z0 / cam.fy}; };
  auto plane_depth = [&](P2 p) { return z0 + spec.tilt_u * p.x + spec.tilt_v * p.y; };
  auto palm_surface = [&](P2 p) {
    const double r2 = dot(p, p) / (R * R);
    if (r2 > 1.0) return kInf;
    return plane_depth(p) - spec.palm_bulge_mm * std::sqrt(1.0 - r2);
  };
  auto palm_joint_depth = [&](P2 p) { return plane_depth(p) + spec.palm_joint_depth_mm; };

  const P2 up = rotate(P2{0.0, -1.0}, spec.rotation_rad);

  SynthHand out;
  out.pose = HandPose(skel);
  std::vector<Capsule> capsules;

  // Joint positions on the plane plus axis depth.
  struct JointLoc {
    P2 p;
    double z;
  };
  std::vector<JointLoc> loc(static_cast<std::size_t>(skel->joint_count));

  const P2 wrist = -0.8 * R * up;
  loc[skel->wrist()] = {wrist, palm_joint_depth(wrist)};

  for (int f = 0; f < kFingerCount; ++f) {
    const auto& fs = spec.fingers[f];
    const P2 dir = rotate(up, fs.angle_rad);
    const P2 root = spec.root_radius_ratio * R * dir;
    const double zr = palm_joint_depth(root);
    const auto& chain = skel->finger_chains[f];
    const int n = static_cast<int>(chain.size());
    const double radius = 0.5 * fs.width_mm;
    out.stretched[f] = fs.stretched;
    if (fs.stretched) {
      const P2 tip = root + fs.length_mm * dir;
      const double zt = zr + fs.depth_slope * fs.length_mm;
      for (int k = 0; k < n; ++k) {
        const double a = static_cast<double>(k) / (n - 1);
        loc[chain[k]] = {root + a * (tip - root), zr + a * (zt - zr)};
      }
      capsules.push_back({root, tip, zr, zt, radius});
      out.tip_pixels[f] = to_pixel(tip + radius * dir);
    } else {
      loc[chain[0]] = {root, zr};
      for (int k = 1; k < n; ++k) {
        const int s = std::min(k - 1, 2);
        const P2 p = kCurlRadius[s] * R * dir;
        const double surface = std::isfinite(palm_surface(p)) ? palm_surface(p) : plane_depth(p);
        loc[chain[k]] = {p, surface - kCurlLift[s] * fs.width_mm + radius};
      }
      for (int k = 0; k + 1 < n; ++k) {
        capsules.push_back({loc[chain[k]].p, loc[chain[k + 1]].p, loc[chain[k]].z, loc[chain[k + 1]].z, radius});
      }
      out.tip_pixels[f] = to_pixel(loc[chain.back()].p);
    }
    for (int k = 0; k < n; ++k) out.chain_pixels[f].push_back(to_pixel(loc[chain[k]].p));
  }

  for (int j = 0; j < skel->joint_count; ++j) {
    const PixelF px = to_pixel(loc[j].p);
    out.pose[j] = backproject(px.u, px.v, loc[j].z, cam);
  }

  // Extent of the silhouette in pixels.
  double umin = kInf, umax = -kInf, vmin = kInf, vmax = -kInf;
  auto grow = [&](P2 p, double r) {
    const PixelF a = to_pixel(p);
    const double ru = r * cam.fx / z0;
    const double rv = r * cam.fy / z0;
    umin = std::min(umin, a.u - ru);
    umax = std::max(umax, a.u + ru);
    vmin = std::min(vmin, a.v - rv);
    vmax = std::max(vmax, a.v + rv);
  };
  grow(P2{}, R);
  for (const auto& c : capsules) {
    grow(c.a, c.radius);
    grow(c.b, c.radius);
  }
  const int W = spec.image_width;
  const int H = spec.image_height;
  out.clipped = umin < 0.0 || vmin < 0.0 || umax > W - 1 || vmax > H - 1;

  std::vector<float> depth(static_cast<std::size_t>(W) * H, spec.background);
  const int u0 = std::max(0, static_cast<int>(std::floor(umin)));
  const int u1 = std::min(W - 1, static_cast<int>(std::ceil(umax)));
  const int v0 = std::max(0, static_cast<int>(std::floor(vmin)));
  const int v1 = std::min(H - 1, static_cast<int>(std::ceil(vmax)));
  for (int v = v0; v <= v1; ++v) {
    for (int u = u0; u <= u1; ++u) {
      const P2 p = to_plane(u, v);
      double z = palm_surface(p);
      for (const auto& c : capsules) z = std::min(z, c.surface(p));
      if (std::isfinite(z)) depth[static_cast<std::size_t>(v) * W + u] = static_cast<float>(z);
    }
  }
  if (spec.noise_mm > 0.0) {
    Rng rng(seed);
    for (float& d : depth) {
      if (d < spec.background) d = static_cast<float>(d + spec.noise_mm * rng.gaussian());
    }
  }
  out.image = DepthImage(W, H, std::move(depth), spec.background);
  return out;
}

SynthSubject synth_subject(std::uint64_t profile_seed, int subject) {
  Rng rng(derive_seed(profile_seed, static_cast<std::uint64_t>(subject), 0x5b));
  const double lengths[kFingerCount] = {50.0, 66.0, 72.0, 67.0, 54.0};
  const double widths[kFingerCount] = {11.0, 10.0, 10.0, 9.5, 9.0};
  SynthSubject s;
  s.palm_radius_mm = rng.uniform(38.0, 46.0);
  const double scale = rng.uniform(0.92, 1.08);
  for (int f = 0; f < kFingerCount; ++f) {
    s.length_mm[f] = lengths[f] * scale * rng.uniform(0.95, 1.05);
    s.width_mm[f] = widths[f] * rng.uniform(0.9, 1.1);
  }
  return s;
}

SynthHandSpec random_hand_spec(Rng& rng, const SynthSubject& subject, const std::array<bool, kFingerCount>& stretched,
                               const SynthVariation& var) {
  SynthHandSpec s;
  s.palm_radius_mm = subject.palm_radius_mm;
  s.palm_depth_mm = rng.uniform(var.depth_min_mm, var.depth_max_mm);
  s.center_u += rng.uniform(-var.center_jitter_u, var.center_jitter_u);
  s.center_v += rng.uniform(-var.center_jitter_v, var.center_jitter_v);
  s.rotation_rad = rng.uniform(-var.rotation_max_rad, var.rotation_max_rad);
  s.palm_bulge_mm = rng.uniform(6.0, 10.0);
  s.tilt_u = rng.uniform(-var.tilt_max, var.tilt_max);
  s.tilt_v = rng.uniform(-var.tilt_max, var.tilt_max);
  s.noise_mm = var.noise_mm;
  for (int f = 0; f < kFingerCount; ++f) {
    auto& fs = s.fingers[f];
    fs.stretched = stretched[f];
    fs.angle_rad = kBaseAngleDeg[f] * M_PI / 180.0 +
                   rng.uniform(-var.finger_angle_jitter_rad, var.finger_angle_jitter_rad);
    fs.length_mm = subject.length_mm[f];
    fs.width_mm = subject.width_mm[f];
    fs.depth_slope = rng.uniform(-var.depth_slope_max, var.depth_slope_max);
  }
  return s;
}

}  // namespace ihpe
