#include "ihpe/eval.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace ihpe {

namespace {

const SkeletonSpec& check_pairs(std::span<const HandPose> pred, std::span<const HandPose> gt) {
  if (pred.size() != gt.size()) {
    throw DataError("evaluation needs one prediction per ground truth (" + std::to_string(pred.size()) + " vs " +
                    std::to_string(gt.size()) + ")");
  }
  if (gt.empty()) {
    static const SkeletonSpec empty;
    return empty;
  }
  const SkeletonSpec& s = *gt.front().skeleton;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    gt[i].validate("ground truth " + std::to_string(i));
    pred[i].validate("prediction " + std::to_string(i));
    if (!gt[i].skeleton->same_layout(s) || !pred[i].skeleton->same_layout(s)) {
      throw DataError("sample " + std::to_string(i) + " uses a different skeleton");
    }
  }
  return s;
}

double chain_error(const HandPose& pred, const HandPose& gt, const std::vector<int>& chain) {
  double sum = 0.0;
  for (int j : chain) sum += distance(pred[j], gt[j]);
  return sum / static_cast<double>(chain.size());
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string cell(std::optional<double> v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *v);
  return buf;
}

nlohmann::json opt(std::optional<double> v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

// Fully saturated colour at hue h degrees.
std::array<std::uint8_t, 3> hue_color(double h) {
  const double x = 1.0 - std::abs(std::fmod(h / 60.0, 2.0) - 1.0);
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(h / 60.0) % 6) {
    case 0: r = 1, g = x; break;
    case 1: r = x, g = 1; break;
    case 2: g = 1, b = x; break;
    case 3: g = x, b = 1; break;
    case 4: r = x, b = 1; break;
    default: r = 1, b = x; break;
  }
  return {static_cast<std::uint8_t>(std::lround(r * 255)), static_cast<std::uint8_t>(std::lround(g * 255)),
          static_cast<std::uint8_t>(std::lround(b * 255))};
}

void draw_line(RgbImage& img, PixelF a, PixelF b, std::array<std::uint8_t, 3> c) {
  const double len = std::max(std::abs(b.u - a.u), std::abs(b.v - a.v));
  const int steps = static_cast<int>(std::ceil(len));
  for (int i = 0; i <= steps; ++i) {
    const double t = steps ? static_cast<double>(i) / steps : 0.0;
    const Pixel p = PixelF{a.u + t * (b.u - a.u), a.v + t * (b.v - a.v)}.rounded();
    img.set(p.u, p.v, c);
  }
}

}  // namespace

std::vector<double> mean_joint_error(std::span<const HandPose> pred, std::span<const HandPose> gt) {
  const SkeletonSpec& s = check_pairs(pred, gt);
  std::vector<double> out(static_cast<std::size_t>(s.joint_count), 0.0);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    for (int j = 0; j < s.joint_count; ++j) out[j] += distance(pred[i][j], gt[i][j]);
  }
  if (!gt.empty()) {
    for (double& e : out) e /= static_cast<double>(gt.size());
  }
  return out;
}

FingerErrors finger_and_tip_errors(std::span<const HandPose> pred, std::span<const HandPose> gt) {
  const SkeletonSpec& s = check_pairs(pred, gt);
  FingerErrors out;
  if (gt.empty()) return out;
  for (int f = 0; f < kFingerCount; ++f) {
    double fsum = 0.0, tsum = 0.0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      fsum += chain_error(pred[i], gt[i], s.finger_chains[f]);
      tsum += distance(pred[i][s.fingertip(f)], gt[i][s.fingertip(f)]);
    }
    out.finger[f] = fsum / static_cast<double>(gt.size());
    out.tip[f] = tsum / static_cast<double>(gt.size());
    out.mean_finger += out.finger[f] / kFingerCount;
    out.mean_tip += out.tip[f] / kFingerCount;
  }
  return out;
}

StretchedErrors stretched_errors(std::span<const HandPose> pred, std::span<const HandPose> gt,
                                 std::span<const std::optional<FingerFlags>> flags) {
  const SkeletonSpec& s = check_pairs(pred, gt);
  if (flags.size() != gt.size()) throw DataError("stretched flags must be given per sample");
  StretchedErrors out;
  std::array<double, kFingerCount> fsum{}, tsum{};
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!flags[i]) continue;
    for (int f = 0; f < kFingerCount; ++f) {
      if (!(*flags[i])[f]) continue;
      fsum[f] += chain_error(pred[i], gt[i], s.finger_chains[f]);
      tsum[f] += distance(pred[i][s.fingertip(f)], gt[i][s.fingertip(f)]);
      ++out.count[f];
    }
  }
  double mf = 0.0, mt = 0.0;
  int present = 0;
  for (int f = 0; f < kFingerCount; ++f) {
    if (out.count[f] == 0) continue;
    out.finger[f] = fsum[f] / static_cast<double>(out.count[f]);
    out.tip[f] = tsum[f] / static_cast<double>(out.count[f]);
    mf += *out.finger[f];
    mt += *out.tip[f];
    ++present;
  }
  if (present > 0) {
    out.mean_finger = mf / present;
    out.mean_tip = mt / present;
  }
  return out;
}

EvalReport evaluate(const std::string& method, std::span<const HandPose> pred, std::span<const HandPose> gt,
                    std::span<const std::optional<FingerFlags>> flags) {
  const SkeletonSpec& s = check_pairs(pred, gt);
  EvalReport r;
  r.method = method;
  r.skeleton = s.name;
  r.sample_count = gt.size();
  r.per_joint = mean_joint_error(pred, gt);
  for (double e : r.per_joint) r.mean_joint += e;
  if (!r.per_joint.empty()) r.mean_joint /= static_cast<double>(r.per_joint.size());
  r.fingers = finger_and_tip_errors(pred, gt);
  if (!flags.empty()) {
    bool any = false;
    for (const auto& f : flags) any = any || f.has_value();
    if (any) r.stretched = stretched_errors(pred, gt, flags);
  }
  return r;
}

std::vector<ReportRow> report_rows(const EvalReport& r) {
  std::vector<ReportRow> rows;
  const std::size_t n = r.sample_count;
  for (std::size_t j = 0; j < r.per_joint.size(); ++j) {
    rows.push_back({"joint", "joint_" + std::to_string(j), static_cast<int>(j), r.per_joint[j], n});
  }
  for (int f = 0; f < kFingerCount; ++f) rows.push_back({"finger", finger_name(f), f, r.fingers.finger[f], n});
  for (int f = 0; f < kFingerCount; ++f) rows.push_back({"fingertip", finger_name(f), f, r.fingers.tip[f], n});
  if (r.stretched) {
    const auto& st = *r.stretched;
    for (int f = 0; f < kFingerCount; ++f) {
      rows.push_back({"stretched_finger", finger_name(f), f, st.finger[f], st.count[f]});
    }
    for (int f = 0; f < kFingerCount; ++f) {
      rows.push_back({"stretched_fingertip", finger_name(f), f, st.tip[f], st.count[f]});
    }
  }
  rows.push_back({"summary", "mean_joint", 0, r.mean_joint, n});
  rows.push_back({"summary", "mean_finger", 0, r.fingers.mean_finger, n});
  rows.push_back({"summary", "mean_fingertip", 0, r.fingers.mean_tip, n});
  if (r.stretched) {
    std::size_t total = 0;
    for (auto c : r.stretched->count) total += c;
    rows.push_back({"summary", "stretched_mean_finger", 0, r.stretched->mean_finger, total});
    rows.push_back({"summary", "stretched_mean_fingertip", 0, r.stretched->mean_tip, total});
  }
  return rows;
}

std::string report_csv(const EvalReport& r) {
  std::string out = "section,name,index,mean_mm,count\n";
  for (const auto& row : report_rows(r)) {
    out += row.section + "," + row.name + "," + std::to_string(row.index) + "," +
           (row.mean_mm ? fmt(*row.mean_mm) : std::string()) + "," + std::to_string(row.count) + "\n";
  }
  return out;
}

std::vector<ReportRow> parse_report_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<ReportRow> rows;
  auto fail = [&](const std::string& why) {
    throw FormatError("report CSV line " + std::to_string(line_no) + ": " + why, line_no, true);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) {
      if (line != "section,name,index,mean_mm,count") fail("unexpected header");
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string field;
    while (std::getline(ls, field, ',')) f.push_back(field);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 5) fail("expected 5 fields");
    ReportRow row;
    row.section = f[0];
    row.name = f[1];
    auto parse_int = [&](const std::string& s, auto& v) {
      const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || p != s.data() + s.size()) fail("bad integer '" + s + "'");
    };
    parse_int(f[2], row.index);
    parse_int(f[4], row.count);
    if (!f[3].empty()) {
      double v = 0.0;
      const auto [p, ec] = std::from_chars(f[3].data(), f[3].data() + f[3].size(), v);
      if (ec != std::errc() || p != f[3].data() + f[3].size()) fail("bad number '" + f[3] + "'");
      row.mean_mm = v;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string report_json(const EvalReport& r) {
  using nlohmann::json;
  json j;
  j["method"] = r.method;
  j["skeleton"] = r.skeleton;
  j["sample_count"] = r.sample_count;
  j["mean_joint_mm"] = r.mean_joint;
  json joints = json::array();
  for (std::size_t k = 0; k < r.per_joint.size(); ++k) joints.push_back({{"index", k}, {"mean_mm", r.per_joint[k]}});
  j["joints"] = joints;
  json fingers = json::array(), tips = json::array();
  for (int f = 0; f < kFingerCount; ++f) {
    fingers.push_back({{"name", finger_name(f)}, {"mean_mm", r.fingers.finger[f]}, {"count", r.sample_count}});
    tips.push_back({{"name", finger_name(f)}, {"mean_mm", r.fingers.tip[f]}, {"count", r.sample_count}});
  }
  j["fingers"] = fingers;
  j["fingertips"] = tips;
  j["mean_finger_mm"] = r.fingers.mean_finger;
  j["mean_fingertip_mm"] = r.fingers.mean_tip;
  if (r.stretched) {
    const auto& st = *r.stretched;
    json sf = json::array(), stt = json::array();
    for (int f = 0; f < kFingerCount; ++f) {
      sf.push_back({{"name", finger_name(f)}, {"mean_mm", opt(st.finger[f])}, {"count", st.count[f]}});
      stt.push_back({{"name", finger_name(f)}, {"mean_mm", opt(st.tip[f])}, {"count", st.count[f]}});
    }
    j["stretched"] = {{"fingers", sf},
                      {"fingertips", stt},
                      {"mean_finger_mm", opt(st.mean_finger)},
                      {"mean_fingertip_mm", opt(st.mean_tip)}};
  } else {
    j["stretched"] = nullptr;
  }
  return j.dump(2) + "\n";
}

void emit_report(const EvalReport& report, const std::filesystem::path& path) {
  const std::string text = path.extension() == ".csv" ? report_csv(report) : report_json(report);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::string render_tables(std::span<const EvalReport> reports) {
  std::string header = "| method |";
  std::string rule = "|---|";
  for (const auto& r : reports) {
    header += " " + r.method + " |";
    rule += "---|";
  }
  auto row = [&](const std::string& label, auto get) {
    std::string s = "| " + label + " |";
    for (const auto& r : reports) s += " " + cell(get(r)) + " |";
    return s + "\n";
  };
  std::string out = "Average of all fingers error and all fingertips error\n\n" + header + "\n" + rule + "\n";
  out += row("all fingers (mm)", [](const EvalReport& r) { return std::optional<double>(r.fingers.mean_finger); });
  out += row("all fingertips (mm)", [](const EvalReport& r) { return std::optional<double>(r.fingers.mean_tip); });

  out += "\nAverage of stretching-out fingers error and stretching-out fingertips error\n\n" + header + "\n" + rule +
         "\n";
  out += row("stretching-out fingers (mm)", [](const EvalReport& r) {
    return r.stretched ? r.stretched->mean_finger : std::optional<double>();
  });
  out += row("stretching-out fingertips (mm)", [](const EvalReport& r) {
    return r.stretched ? r.stretched->mean_tip : std::optional<double>();
  });

  out += "\nPer finger (mm)\n\n" + header + "\n" + rule + "\n";
  for (int f = 0; f < kFingerCount; ++f) {
    const std::string name = finger_name(f);
    out += row(name + " finger", [f](const EvalReport& r) { return std::optional<double>(r.fingers.finger[f]); });
    out += row(name + " tip", [f](const EvalReport& r) { return std::optional<double>(r.fingers.tip[f]); });
    out += row(name + " stretched finger",
               [f](const EvalReport& r) { return r.stretched ? r.stretched->finger[f] : std::optional<double>(); });
    out += row(name + " stretched tip",
               [f](const EvalReport& r) { return r.stretched ? r.stretched->tip[f] : std::optional<double>(); });
  }
  return out;
}

std::array<std::uint8_t, 3> joint_color(int j, int count) {
  return hue_color(360.0 * j / std::max(count, 1));
}

RgbImage render_overlay(const DepthImage& img, const HandPose& pose, const CameraIntrinsics& camera) {
  RgbImage out(img.width(), img.height());
  float lo = img.background(), hi = 0.0f;
  for (float d : img.depths()) {
    if (d < img.background()) {
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
  }
  for (int v = 0; v < img.height(); ++v) {
    for (int u = 0; u < img.width(); ++u) {
      if (!img.is_foreground(u, v)) continue;
      const double t = hi > lo ? (img(u, v) - lo) / (hi - lo) : 0.0;
      const auto g = static_cast<std::uint8_t>(std::lround(230.0 - 180.0 * t));
      out.set(u, v, {g, g, g});
    }
  }
  const SkeletonSpec& s = *pose.skeleton;
  std::vector<PixelF> px(pose.size());
  std::vector<bool> ok(pose.size(), false);
  for (std::size_t j = 0; j < pose.size(); ++j) {
    if (pose[j].z > 0.0) {
      px[j] = project(pose[j], camera);
      ok[j] = true;
    }
  }
  const std::array<std::uint8_t, 3> white{255, 255, 255};
  for (int f = 0; f < kFingerCount; ++f) {
    const auto& chain = s.finger_chains[f];
    if (ok[s.wrist()] && ok[chain.front()]) draw_line(out, px[s.wrist()], px[chain.front()], white);
    for (std::size_t k = 1; k < chain.size(); ++k) {
      if (ok[chain[k - 1]] && ok[chain[k]]) draw_line(out, px[chain[k - 1]], px[chain[k]], white);
    }
  }
  for (std::size_t j = 0; j < pose.size(); ++j) {
    if (!ok[j]) continue;
    const Pixel c = px[j].rounded();
    const auto color = joint_color(static_cast<int>(j), static_cast<int>(pose.size()));
    for (int dv = -1; dv <= 1; ++dv) {
      for (int du = -1; du <= 1; ++du) out.set(c.u + du, c.v + dv, color);
    }
  }
  return out;
}

void write_overlay(const std::filesystem::path& path, const DepthImage& img, const HandPose& pose,
                   const CameraIntrinsics& camera) {
  write_rgb_png(path, render_overlay(img, pose, camera));
}

}  // namespace ihpe
