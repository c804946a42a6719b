#include "ihpe_cli/cli.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ihpe/config.hpp"
#include "ihpe/errors.hpp"
#include "ihpe/eval.hpp"
#include "ihpe/parallel.hpp"
#include "ihpe/pipeline.hpp"
#include "ihpe_cli/manifest.hpp"
#include "ihpe_cli/predictions.hpp"

namespace ihpe::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

/// Bad invocation detected after parsing; maps to kExitUsage.
class UsageError : public Error {
 public:
  using Error::Error;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct CommonOptions {
  std::string config;
  std::vector<std::string> overrides;
  std::uint64_t seed = 1;
  int threads = 1;
  std::string out;
  bool verbose = false;
};

struct DataOptions {
  std::string dataset;
  std::string format = "msra";
  std::string split = "train";
  int holdout = -1;
  std::size_t limit = 0;
};

enum class Role { Train, Test };

void add_common(CLI::App* cmd, CommonOptions& o, bool needs_out = true) {
  cmd->add_option("--config", o.config, "INI configuration file");
  cmd->add_option("--set", o.overrides, "Override one key, section.key=value (repeatable)");
  cmd->add_option("--seed", o.seed, "Random seed");
  cmd->add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);
  auto* out = cmd->add_option("--out", o.out, "Output directory");
  if (needs_out) out->required();
  cmd->add_flag("-v,--verbose", o.verbose, "Progress messages on stderr");
}

void add_data(CLI::App* cmd, DataOptions& d) {
  cmd->add_option("--dataset", d.dataset, "Dataset root directory")->required();
  cmd->add_option("--format", d.format, "Dataset layout")->check(CLI::IsMember({"msra", "icvl"}));
  cmd->add_option("--split", d.split, "ICVL split")->check(CLI::IsMember({"train", "test"}));
  cmd->add_option("--holdout", d.holdout,
                  "Held-out subject: excluded when training, the only subject when testing");
  cmd->add_option("--limit", d.limit, "Use at most this many samples");
}

Settings load_settings(const CommonOptions& o, Config* raw = nullptr) {
  Config cfg;
  if (!o.config.empty()) {
    if (!fs::exists(o.config)) throw UsageError("config file '" + o.config + "' does not exist");
    cfg = Config::load(o.config);
  }
  for (const auto& s : o.overrides) cfg.apply_override(s);
  if (raw) *raw = cfg;
  return resolve_settings(cfg);
}

json settings_json(const CommonOptions& o) {
  Config cfg;
  load_settings(o, &cfg);
  json j = json::object();
  for (const auto& [k, v] : cfg.values()) j[k] = v;
  return j;
}

RunManifest start_manifest(const std::string& command, const CommonOptions& o) {
  RunManifest m;
  m.command = command;
  m.config_path = o.config;
  m.seed = o.seed;
  m.threads = o.threads;
  m.settings = settings_json(o);
  return m;
}

DatasetIndex load_dataset(const DataOptions& d, const Settings& s, Role role) {
  if (!fs::exists(d.dataset)) throw UsageError("dataset path '" + d.dataset + "' does not exist");
  DatasetIndex index = d.format == "icvl" ? load_icvl(d.dataset, d.split == "test", s.icvl) : load_msra(d.dataset, s.msra);
  if (d.holdout >= 0) {
    auto [train, test] = split_leave_one_subject_out(index, d.holdout);
    index = role == Role::Train ? std::move(train) : std::move(test);
  }
  if (d.limit > 0 && index.samples.size() > d.limit) index.samples.resize(d.limit);
  if (index.samples.empty()) throw DataError("no samples selected from '" + d.dataset + "'");
  return index;
}

json data_json(const DataOptions& d, std::size_t samples) {
  return {{"dataset", d.dataset}, {"format", d.format}, {"split", d.split},
          {"holdout", d.holdout}, {"limit", d.limit},   {"samples", samples}};
}

std::vector<LabeledImage> load_images(const DatasetIndex& index, const DataOptions& d, const Settings& s, int threads) {
  return load_all(index, threads, d.format == "icvl" ? s.icvl_segment_band_mm : 0.0);
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir + "'");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  if (!out) throw IoError("cannot write '" + path.string() + "'");
}

std::string file_stem_for(const std::string& id) {
  std::string s = id;
  std::replace(s.begin(), s.end(), '/', '_');
  std::replace(s.begin(), s.end(), '\\', '_');
  return s;
}

std::vector<std::optional<FingerFlags>> flags_of(const DatasetIndex& index) {
  std::vector<std::optional<FingerFlags>> flags;
  flags.reserve(index.samples.size());
  for (const auto& e : index.samples) flags.push_back(e.stretched);
  return flags;
}

json pixel_json(PixelF p) { return json::array({p.u, p.v}); }
json pixel_json(Pixel p) { return json::array({p.u, p.v}); }
json vec_json(const Vec3& p) { return json::array({p.x, p.y, p.z}); }

PredictionRecord record_of(const std::string& id, const HandPose& pose, std::vector<std::uint8_t> updated = {}) {
  if (updated.empty()) updated.assign(pose.size(), 0);
  return {id, pose.joints, std::move(updated)};
}

std::string predictions_hash(std::span<const PredictionRecord> records) {
  std::string text;
  for (const auto& r : records) text += prediction_line(r) + '\n';
  return git_blob_hash({reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

void write_reports(const fs::path& dir, const EvalReport& report) {
  emit_report(report, dir / ("report_" + report.method + ".json"));
  emit_report(report, dir / ("report_" + report.method + ".csv"));
}

json report_summary(const EvalReport& r) {
  json j = {{"mean_joint_mm", r.mean_joint},
            {"mean_finger_mm", r.fingers.mean_finger},
            {"mean_fingertip_mm", r.fingers.mean_tip}};
  if (r.stretched && !r.stretched->empty()) {
    j["stretched_mean_finger_mm"] = *r.stretched->mean_finger;
    j["stretched_mean_fingertip_mm"] = *r.stretched->mean_tip;
  }
  return j;
}

// synth-generate ------------------------------------------------------------

int cmd_synth_generate(const CommonOptions& o, std::optional<std::size_t> count, std::ostream& out, std::ostream& err) {
  Settings s = load_settings(o);
  if (count) s.synth.count = *count;
  RunManifest m = start_manifest("synth-generate", o);
  ensure_dir(o.out);
  const auto t0 = Clock::now();
  if (o.verbose) err << "generating " << s.synth.count << " synthetic images\n";
  const auto samples = generate_synth_dataset(s.synth, o.seed, o.threads);
  std::size_t clipped = 0;
  for (const auto& x : samples) clipped += x.clipped ? 1 : 0;
  export_msra(samples, o.out, s.msra);
  const double secs = seconds_since(t0);
  m.outputs = {{"dataset", o.out}};
  m.results = {{"images", samples.size()}, {"clipped", clipped}};
  m.hashes = {{"dataset", git_tree_hash(o.out)}};
  m.timing = {{"seconds", secs}, {"images_per_sec", samples.size() / std::max(secs, 1e-9)}};
  m.write(fs::path(o.out) / kRunManifestName);
  out << "wrote " << samples.size() << " images to " << o.out << '\n';
  if (clipped) err << "warning: " << clipped << " images have joints outside the frame\n";
  return kExitOk;
}

// train-baseline / train-voting ----------------------------------------------

int cmd_train_baseline(const CommonOptions& o, const DataOptions& d, std::ostream& out, std::ostream& err) {
  Settings s = load_settings(o);
  RunManifest m = start_manifest("train-baseline", o);
  const auto index = load_dataset(d, s, Role::Train);
  ensure_dir(o.out);
  const auto t0 = Clock::now();
  const auto images = load_images(index, d, s, o.threads);
  const auto examples = pose_examples(images);
  s.cascade.camera = index.camera;
  s.cascade.features.focal_px = index.camera.fx;
  CascadeTrainOptions opts;
  opts.threads = o.threads;
  if (o.verbose) opts.progress = [&err](const std::string& msg) { err << msg << '\n'; };
  const auto model = train_cascade(examples, index.skeleton, s.cascade, o.seed, opts);
  save_cascade(model, o.out);
  const double secs = seconds_since(t0);

  const auto& st = model.stats;
  m.inputs = data_json(d, images.size());
  m.outputs = {{"model", o.out}};
  m.hashes = {{"model", git_tree_hash(o.out)}};
  m.results = {{"palm_forests", model.palm_forests().size()},
               {"finger_forests", model.finger_stage_count() * kFingerCount},
               {"palm_initial_error_mm", st.palm_initial_error},
               {"palm_stage_error_mm", st.palm_stage_error}};
  m.timing = {{"seconds", secs}, {"images_per_sec", images.size() / std::max(secs, 1e-9)}};
  m.write(fs::path(o.out) / kRunManifestName);
  out << "baseline model " << m.hashes["model"].get<std::string>() << " written to " << o.out << '\n';
  return kExitOk;
}

int cmd_train_voting(const CommonOptions& o, const DataOptions& d, std::ostream& out, std::ostream& err) {
  Settings s = load_settings(o);
  RunManifest m = start_manifest("train-voting", o);
  const auto index = load_dataset(d, s, Role::Train);
  ensure_dir(o.out);
  const auto t0 = Clock::now();
  const auto images = load_images(index, d, s, o.threads);
  const auto examples = pose_examples(images);
  s.voting.camera = index.camera;
  s.voting.features.focal_px = index.camera.fx;
  if (o.verbose) err << "training voting forest on " << images.size() << " images\n";
  TrainOptions opts;
  opts.threads = o.threads;
  const auto model = train_voting(examples, index.skeleton, s.voting, o.seed, opts);
  save_voting(model, o.out);
  const double secs = seconds_since(t0);

  m.inputs = data_json(d, images.size());
  m.outputs = {{"model", o.out}};
  m.hashes = {{"model", git_tree_hash(o.out)}};
  m.results = {{"trees", model.forest.trees().size()}};
  m.timing = {{"seconds", secs}, {"images_per_sec", images.size() / std::max(secs, 1e-9)}};
  m.write(fs::path(o.out) / kRunManifestName);
  out << "voting model " << m.hashes["model"].get<std::string>() << " written to " << o.out << '\n';
  return kExitOk;
}

// detect -------------------------------------------------------------------

int cmd_detect(const CommonOptions& o, const DataOptions& d, const std::string& baseline_dir, std::ostream& out,
               std::ostream&) {
  Settings s = load_settings(o);
  RunManifest m = start_manifest("detect", o);
  const auto index = load_dataset(d, s, Role::Test);
  std::optional<CascadeModel> cascade;
  if (!baseline_dir.empty()) {
    if (!fs::exists(baseline_dir)) throw UsageError("baseline model '" + baseline_dir + "' does not exist");
    cascade.emplace(load_cascade(baseline_dir));
  }
  ensure_dir(o.out);
  const auto t0 = Clock::now();
  const auto images = load_images(index, d, s, o.threads);
  std::vector<std::string> lines(images.size());
  std::vector<int> count_ok(images.size(), -1);
  parallel_for(images.size(), o.threads, [&](std::size_t i) {
    const auto& img = images[i].image;
    auto det = detect_stretched_fingers(img, *index.skeleton, s.detect);
    if (cascade) match_identity(det.fingers, predict_cascade(*cascade, img), img, index.camera);
    json fingers = json::array();
    for (const auto& f : det.fingers) {
      json chain = json::array();
      for (const auto& p : f.joints) chain.push_back(pixel_json(p));
      fingers.push_back({{"tip", pixel_json(f.tip)},
                         {"root", pixel_json(f.root)},
                         {"identity", f.identity},
                         {"name", f.identity >= 0 ? finger_name(f.identity) : ""},
                         {"tip_distance", f.tip_distance},
                         {"joints", chain}});
    }
    json line = {{"id", images[i].id},
                 {"palm", {{"center", pixel_json(det.palm.center)}, {"radius", det.palm.radius}}},
                 {"fingers", fingers},
                 {"stretched", images[i].stretched ? json(format_finger_flags(*images[i].stretched)) : json()}};
    lines[i] = line.dump();
    if (images[i].stretched) {
      const auto expected = std::count(images[i].stretched->begin(), images[i].stretched->end(), true);
      count_ok[i] = static_cast<long>(det.fingers.size()) == expected ? 1 : 0;
    }
  });
  const double secs = seconds_since(t0);
  const fs::path path = fs::path(o.out) / "detections.jsonl";
  {
    std::ofstream f(path);
    for (const auto& l : lines) f << l << '\n';
    if (!f) throw IoError("cannot write '" + path.string() + "'");
  }
  const auto labelled = std::count_if(count_ok.begin(), count_ok.end(), [](int v) { return v >= 0; });
  const auto correct = std::count(count_ok.begin(), count_ok.end(), 1);
  m.inputs = data_json(d, images.size());
  if (cascade) m.inputs["baseline"] = baseline_dir;
  m.outputs = {{"detections", path.string()}};
  m.hashes = {{"detections", git_blob_hash_file(path)}};
  if (cascade) m.hashes["baseline"] = git_tree_hash(baseline_dir);
  m.results = {{"images", images.size()}, {"labelled", labelled}, {"finger_count_correct", correct}};
  m.timing = {{"seconds", secs}, {"images_per_sec", images.size() / std::max(secs, 1e-9)}};
  m.write(fs::path(o.out) / kRunManifestName);
  out << "detections for " << images.size() << " images written to " << path.string() << '\n';
  if (labelled) out << "finger count correct on " << correct << "/" << labelled << " labelled images\n";
  return kExitOk;
}

// refine -------------------------------------------------------------------

struct ModelPaths {
  std::string baseline;
  std::string voting;
};

void require_models(const ModelPaths& p) {
  if (!fs::exists(p.baseline)) throw UsageError("baseline model '" + p.baseline + "' does not exist");
  if (!fs::exists(p.voting)) throw UsageError("voting model '" + p.voting + "' does not exist");
}

/// The testing distance threshold comes from the run configuration.
VotingModel load_voting_for_test(const std::string& dir, const Settings& s) {
  VotingModel model = load_voting(dir);
  model.config.distance_threshold_mm = s.voting.distance_threshold_mm;
  return model;
}

json votes_json(const std::string& id, const RefineResult& r) {
  json votes = json::array();
  for (const auto& v : r.votes)
    votes.push_back({{"joint", v.joint}, {"voter", pixel_json(v.voter)}, {"location", vec_json(v.location)}});
  json joints = json::array();
  for (std::size_t j = 0; j < r.pose.size(); ++j) {
    if (!r.updated[j]) continue;
    joints.push_back({{"index", j},
                      {"votes", r.vote_counts[j]},
                      {"interpolated", vec_json(r.interpolated[j])},
                      {"refined", vec_json(r.pose[j])}});
  }
  return {{"id", id}, {"joints", joints}, {"votes", votes}};
}

int cmd_refine(const CommonOptions& o, const DataOptions& d, const ModelPaths& paths, bool dump_votes,
               std::ostream& out, std::ostream& err) {
  Settings s = load_settings(o);
  RunManifest m = start_manifest("refine", o);
  require_models(paths);
  const auto index = load_dataset(d, s, Role::Test);
  const auto cascade = load_cascade(paths.baseline);
  const auto voting = load_voting_for_test(paths.voting, s);
  const Pipeline pipeline(cascade, voting, s.detect);
  if (!pipeline.skeleton().same_layout(*index.skeleton))
    throw ConfigError("models use skeleton '" + pipeline.skeleton().name + "' but the dataset uses '" +
                      index.skeleton->name + "'");
  ensure_dir(o.out);
  const fs::path votes_dir = fs::path(o.out) / "votes";
  if (dump_votes) ensure_dir(votes_dir.string());

  const auto t_load = Clock::now();
  const auto images = load_images(index, d, s, o.threads);
  const double load_secs = seconds_since(t_load);
  if (o.verbose) err << "refining " << images.size() << " images\n";

  const auto t0 = Clock::now();
  std::vector<PredictionRecord> baseline(images.size()), refined(images.size());
  std::vector<StageTimings> timings(images.size());
  parallel_for(images.size(), o.threads, [&](std::size_t i) {
    const auto r = pipeline.run(images[i].image, dump_votes);
    baseline[i] = record_of(images[i].id, r.baseline);
    refined[i] = record_of(images[i].id, r.refined.pose, r.refined.updated);
    timings[i] = r.timings;
    if (dump_votes) write_text(votes_dir / (file_stem_for(images[i].id) + ".json"), votes_json(images[i].id, r.refined).dump() + "\n");
  });
  const double secs = seconds_since(t0);

  const fs::path base_path = fs::path(o.out) / "predictions_baseline.jsonl";
  const fs::path ref_path = fs::path(o.out) / "predictions_refined.jsonl";
  write_predictions(base_path, baseline);
  write_predictions(ref_path, refined);

  std::vector<HandPose> truth, base_poses, ref_poses;
  for (std::size_t i = 0; i < images.size(); ++i) {
    truth.push_back(images[i].pose);
    base_poses.emplace_back(index.skeleton, baseline[i].joints);
    ref_poses.emplace_back(index.skeleton, refined[i].joints);
  }
  const auto flags = flags_of(index);
  std::vector<EvalReport> reports{evaluate("baseline", base_poses, truth, flags),
                                  evaluate("refined", ref_poses, truth, flags)};
  for (const auto& r : reports) write_reports(o.out, r);
  write_text(fs::path(o.out) / "tables.md", render_tables(reports));

  StageTimings total;
  for (const auto& t : timings) {
    total.cascade_ms += t.cascade_ms;
    total.detect_ms += t.detect_ms;
    total.vote_ms += t.vote_ms;
  }
  const double n = static_cast<double>(images.size());
  m.inputs = data_json(d, images.size());
  m.inputs["baseline"] = paths.baseline;
  m.inputs["voting"] = paths.voting;
  m.outputs = {{"baseline_predictions", base_path.string()},
               {"refined_predictions", ref_path.string()},
               {"tables", (fs::path(o.out) / "tables.md").string()}};
  if (dump_votes) m.outputs["votes"] = votes_dir.string();
  m.hashes = {{"baseline", git_tree_hash(paths.baseline)},
              {"voting", git_tree_hash(paths.voting)},
              {"baseline_predictions", git_blob_hash_file(base_path)},
              {"refined_predictions", git_blob_hash_file(ref_path)}};
  m.results = {{"images", images.size()},
               {"baseline", report_summary(reports[0])},
               {"refined", report_summary(reports[1])}};
  m.timing = {{"load_seconds", load_secs},
              {"seconds", secs},
              {"images_per_sec", n / std::max(secs, 1e-9)},
              {"stage_ms", {{"cascade", total.cascade_ms / n}, {"detect", total.detect_ms / n}, {"vote", total.vote_ms / n}}}};
  m.write(fs::path(o.out) / kRunManifestName);
  out << render_tables(reports);
  return kExitOk;
}

// evaluate -----------------------------------------------------------------

int cmd_evaluate(const CommonOptions& o, const DataOptions& d, const std::vector<std::string>& prediction_files,
                 std::vector<std::string> methods, bool overlays, std::ostream& out, std::ostream&) {
  Settings s = load_settings(o);
  RunManifest m = start_manifest("evaluate", o);
  if (!methods.empty() && methods.size() != prediction_files.size())
    throw UsageError("--method must be given once per --predictions file");
  for (const auto& p : prediction_files)
    if (!fs::exists(p)) throw UsageError("predictions file '" + p + "' does not exist");
  const auto index = load_dataset(d, s, Role::Test);
  std::map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < index.samples.size(); ++i) by_id[index.samples[i].id] = i;
  ensure_dir(o.out);
  const fs::path overlay_dir = fs::path(o.out) / "overlays";
  if (overlays) ensure_dir(overlay_dir.string());

  const auto t0 = Clock::now();
  std::vector<EvalReport> reports;
  m.inputs = data_json(d, index.samples.size());
  m.inputs["predictions"] = prediction_files;
  for (std::size_t k = 0; k < prediction_files.size(); ++k) {
    const std::string method = methods.empty() ? fs::path(prediction_files[k]).stem().string() : methods[k];
    const auto records = read_predictions(prediction_files[k]);
    std::vector<HandPose> preds, truth;
    std::vector<std::optional<FingerFlags>> flags;
    std::vector<std::size_t> rows;
    for (const auto& r : records) {
      const auto it = by_id.find(r.id);
      if (it == by_id.end()) throw DataError("prediction id '" + r.id + "' is not in the dataset selection");
      const auto& e = index.samples[it->second];
      preds.emplace_back(index.skeleton, r.joints);
      truth.push_back(e.pose);
      flags.push_back(e.stretched);
      rows.push_back(it->second);
    }
    reports.push_back(evaluate(method, preds, truth, flags));
    write_reports(o.out, reports.back());
    m.hashes[method] = git_blob_hash_file(prediction_files[k]);
    if (overlays) {
      const double band = d.format == "icvl" ? s.icvl_segment_band_mm : 0.0;
      parallel_for(rows.size(), o.threads, [&](std::size_t i) {
        const auto& e = index.samples[rows[i]];
        write_overlay(overlay_dir / (file_stem_for(e.id) + "_" + method + ".png"), load_image(index, e, band),
                      preds[i], index.camera);
      });
    }
  }
  write_text(fs::path(o.out) / "tables.md", render_tables(reports));
  const double secs = seconds_since(t0);
  m.outputs = {{"reports", o.out}};
  for (const auto& r : reports) m.results[r.method] = report_summary(r);
  m.timing = {{"seconds", secs}};
  m.write(fs::path(o.out) / kRunManifestName);
  out << render_tables(reports);
  return kExitOk;
}

// bench --------------------------------------------------------------------

int cmd_bench(const CommonOptions& o, const DataOptions& d, const ModelPaths& paths, std::size_t frames,
              std::ostream& out, std::ostream&) {
  Settings s = load_settings(o);
  RunManifest m = start_manifest("bench", o);
  m.threads = 1;
  require_models(paths);
  const auto index = load_dataset(d, s, Role::Test);
  const auto cascade = load_cascade(paths.baseline);
  const auto voting = load_voting_for_test(paths.voting, s);
  const Pipeline pipeline(cascade, voting, s.detect);
  ensure_dir(o.out);
  const auto images = load_images(index, d, s, o.threads);

  std::vector<PredictionRecord> poses;
  StageTimings total;
  const auto t0 = Clock::now();
  for (std::size_t f = 0; f < frames; ++f) {
    const auto& sample = images[f % images.size()];
    const auto r = pipeline.run(sample.image);
    total.cascade_ms += r.timings.cascade_ms;
    total.detect_ms += r.timings.detect_ms;
    total.vote_ms += r.timings.vote_ms;
    if (f < images.size()) poses.push_back(record_of(sample.id, r.refined.pose, r.refined.updated));
  }
  const double secs = seconds_since(t0);
  const double n = static_cast<double>(frames);
  const double fps = n / std::max(secs, 1e-9);

  m.inputs = data_json(d, images.size());
  m.inputs["baseline"] = paths.baseline;
  m.inputs["voting"] = paths.voting;
  m.inputs["frames"] = frames;
  m.outputs = {{"manifest", (fs::path(o.out) / kRunManifestName).string()}};
  m.hashes = {{"baseline", git_tree_hash(paths.baseline)},
              {"voting", git_tree_hash(paths.voting)},
              {"poses", predictions_hash(poses)}};
  m.results = {{"frames", frames}, {"distinct_images", poses.size()}};
  m.timing = {{"seconds", secs},
              {"fps", fps},
              {"ms_per_frame", 1000.0 * secs / n},
              {"stage_ms", {{"cascade", total.cascade_ms / n}, {"detect", total.detect_ms / n}, {"vote", total.vote_ms / n}}}};
  m.write(fs::path(o.out) / kRunManifestName);
  out << std::fixed << std::setprecision(2) << "frames " << frames << "  fps " << fps << "  cascade "
      << total.cascade_ms / n << " ms  detect " << total.detect_ms / n << " ms  vote " << total.vote_ms / n
      << " ms\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hand pose estimation from depth images", "ihpe"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "ihpe 0.1.0");

  CommonOptions common;
  DataOptions data;
  ModelPaths models;
  std::optional<std::size_t> synth_count;
  bool dump_votes = false;
  bool overlays = false;
  std::vector<std::string> prediction_files, methods;
  std::size_t frames = 200;

  auto* synth = app.add_subcommand("synth-generate", "Render a synthetic dataset in MSRA layout");
  add_common(synth, common);
  synth->add_option("--count", synth_count, "Number of images (overrides synth.count)")->check(CLI::PositiveNumber);

  auto* train_baseline = app.add_subcommand("train-baseline", "Train the cascaded baseline regressor");
  add_common(train_baseline, common);
  add_data(train_baseline, data);

  auto* train_voting_cmd = app.add_subcommand("train-voting", "Train the neighbour-pixel voting forest");
  add_common(train_voting_cmd, common);
  add_data(train_voting_cmd, data);

  auto* detect = app.add_subcommand("detect", "Dump stretched-finger detections as JSON lines");
  add_common(detect, common);
  add_data(detect, data);
  detect->add_option("--baseline", models.baseline, "Baseline model, enables identity matching");

  auto* refine_cmd = app.add_subcommand("refine", "Baseline, detection and voting refinement with reports");
  add_common(refine_cmd, common);
  add_data(refine_cmd, data);
  refine_cmd->add_option("--baseline", models.baseline, "Baseline model directory")->required();
  refine_cmd->add_option("--voting", models.voting, "Voting model directory")->required();
  refine_cmd->add_flag("--dump-votes", dump_votes, "Write every vote per image under <out>/votes");

  auto* eval_cmd = app.add_subcommand("evaluate", "Error reports for prediction files");
  add_common(eval_cmd, common);
  add_data(eval_cmd, data);
  eval_cmd->add_option("--predictions", prediction_files, "Predictions JSON-lines file (repeatable)")->required();
  eval_cmd->add_option("--method", methods, "Method label per predictions file");
  eval_cmd->add_flag("--overlays", overlays, "Write joint overlay images under <out>/overlays");

  auto* bench = app.add_subcommand("bench", "Single-threaded end-to-end throughput");
  add_common(bench, common);
  add_data(bench, data);
  bench->add_option("--baseline", models.baseline, "Baseline model directory")->required();
  bench->add_option("--voting", models.voting, "Voting model directory")->required();
  bench->add_option("--frames", frames, "Frames to process")->check(CLI::PositiveNumber);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*synth) return cmd_synth_generate(common, synth_count, out, err);
    if (*train_baseline) return cmd_train_baseline(common, data, out, err);
    if (*train_voting_cmd) return cmd_train_voting(common, data, out, err);
    if (*detect) return cmd_detect(common, data, models.baseline, out, err);
    if (*refine_cmd) return cmd_refine(common, data, models, dump_votes, out, err);
    if (*eval_cmd) return cmd_evaluate(common, data, prediction_files, methods, overlays, out, err);
    if (*bench) return cmd_bench(common, data, models, frames, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace ihpe::cli
