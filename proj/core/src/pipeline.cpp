#include "ihpe/pipeline.hpp"

#include <chrono>

namespace ihpe {

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

bool same_camera(const CameraIntrinsics& a, const CameraIntrinsics& b) {
  return a.fx == b.fx && a.fy == b.fy && a.cx == b.cx && a.cy == b.cy;
}

}  // namespace

Pipeline::Pipeline(const CascadeModel& cascade, const VotingModel& voting, DetectConfig detect)
    : cascade_(cascade), voting_(voting), detect_(std::move(detect)), predictor_(forest_predictor(voting.forest)) {
  detect_.validate();
  if (!cascade_.skeleton().same_layout(*voting_.skeleton)) {
    throw ConfigError("baseline model uses skeleton '" + cascade_.skeleton().name + "' but voting model uses '" +
                      voting_.skeleton->name + "'");
  }
  if (!same_camera(cascade_.config().camera, voting_.config.camera)) {
    throw ConfigError("baseline and voting models were trained with different camera intrinsics");
  }
}

PipelineResult Pipeline::run(const DepthImage& img, bool keep_votes) const {
  PipelineResult out;
  auto t0 = std::chrono::steady_clock::now();
  out.baseline = predict_cascade(cascade_, img);
  out.timings.cascade_ms = elapsed_ms(t0);

  t0 = std::chrono::steady_clock::now();
  out.detection = detect_stretched_fingers(img, cascade_.skeleton(), detect_);
  match_identity(out.detection.fingers, out.baseline, img, camera());
  out.timings.detect_ms = elapsed_ms(t0);

  t0 = std::chrono::steady_clock::now();
  out.refined = refine(img, out.baseline, out.detection.fingers, predictor_, voting_.config, keep_votes);
  out.timings.vote_ms = elapsed_ms(t0);
  return out;
}

}  // namespace ihpe
