#pragma once

#include "ihpe/cascade.hpp"
#include "ihpe/finger_detect.hpp"
#include "ihpe/voting.hpp"

namespace ihpe {

struct StageTimings {
  double cascade_ms = 0.0;
  double detect_ms = 0.0;
  double vote_ms = 0.0;
};

struct PipelineResult {
  HandPose baseline;
  FingerDetection detection;
  RefineResult refined;
  StageTimings timings;
};

/// Baseline cascade, stretched-finger detection with identity matching, then voting refinement.
/// Holds references to both models.
class Pipeline {
 public:
  /// Throws ConfigError when the models disagree on skeleton or camera.
  Pipeline(const CascadeModel& cascade, const VotingModel& voting, DetectConfig detect = {});

  PipelineResult run(const DepthImage& img, bool keep_votes = false) const;

  const CameraIntrinsics& camera() const { return cascade_.config().camera; }
  const SkeletonSpec& skeleton() const { return cascade_.skeleton(); }

 private:
  const CascadeModel& cascade_;
  const VotingModel& voting_;
  DetectConfig detect_;
  OffsetPredictor predictor_;
};

}  // namespace ihpe
