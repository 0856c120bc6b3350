#pragma once

#include "scenefit/contact.hpp"
#include "scenefit/deform.hpp"
#include "scenefit/optimizer.hpp"

#include <map>
#include <string>
#include <vector>

namespace scenefit {

/// One degree of freedom penalized by the bending prior: exp(sign * theta)
/// of the given axis-angle component. The sign convention makes
/// hyperextension positive.
struct BendDof {
  int joint = -1;
  int axis = 0;
  double sign = 1.0;
};

/// Every stage weight, robust scale, and optimizer schedule. The lambda and
/// sigma defaults are tuned on the synthetic suite and overridable from the
/// run manifest.
struct StageConfig {
  // Stage 1 weights
  double lambda_theta = 1.0;
  double lambda_alpha = 1.0;
  double lambda_beta = 10.0;
  // Stage 2 weights
  double lambda_obs = 1e4;
  double lambda_un = 1e4;
  double lambda_t_theta = 100.0;
  double lambda_t_gamma = 100.0;
  // Stage 3 weight
  double lambda_pen = 1e4;

  // robust kernel scales
  double sigma_joint_px = 100.0;  // reprojection residuals
  double sigma_contact_m = 0.05;  // contact / penetration residuals

  double contact_threshold = 0.5;  // tau over the contact probability map

  // optimizer schedules
  int stage1_iterations = 200;
  int stage1_refine_iterations = 100;
  int stage2_iterations = 300;
  double stage2_learning_rate = 0.01;
  int stage3_outer_iterations = 3;
  int stage3_iterations = 100;
  double stage3_learning_rate = 0.002;

  // shape handling: optimize beta in stage 1; share the per-sequence mean
  // and freeze it afterwards (per-frame mode available). Stage 2 can
  // re-open beta where contacts disambiguate the depth/shape trade.
  bool optimize_shape = true;
  bool shared_shape = true;
  bool optimize_shape_stage2 = false;

  std::vector<BendDof> bending;

  QuasiNewtonConfig stage1_optimizer() const {
    QuasiNewtonConfig cfg;
    cfg.max_iterations = stage1_iterations;
    return cfg;
  }
  AdamConfig stage2_optimizer() const {
    AdamConfig cfg;
    cfg.iterations = stage2_iterations;
    cfg.learning_rate = stage2_learning_rate;
    return cfg;
  }
  AdamConfig stage3_optimizer() const {
    AdamConfig cfg;
    cfg.iterations = stage3_iterations;
    cfg.learning_rate = stage3_learning_rate;
    return cfg;
  }

  void validate() const;
};

}  // namespace scenefit
