#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tandem/grpo.hpp"
#include "tandem/rng.hpp"
#include "tandem/toy_policy.hpp"

namespace tandem::oracle {

/// One seeded ToyPolicy problem: three policies over the same shape plus
/// rollout groups sampled from the old policy.
struct ToyInstance {
  ToyPolicy current;
  ToyPolicy old;
  ToyPolicy reference;
  std::vector<ToyGroup> groups;
  GrpoConfig config;
};

/// vocab 2..8, window 1..6, G 2..8, 1..3 groups, non-degenerate rewards.
/// With `on_policy` current == old and beta = 0.
ToyInstance make_toy_instance(Rng& rng, bool on_policy = false);

struct GradientReport {
  std::size_t instances = 0;
  std::size_t coordinates = 0;   // compared coordinates
  std::size_t kink_skipped = 0;  // FD stencil straddled a clip boundary
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
};

/// Central finite differences of toy_objective against grpo_gradient.
/// Relative error per coordinate is |a - n| / max(|a|, |n|, rel_floor).
/// Coordinates whose stencil moves any token's ratio across 1 +/- eps are
/// skipped: the objective is not differentiable there.
GradientReport gradient_check(const ToyInstance& instance, double h = 1e-5,
                              double rel_floor = 1e-5);
GradientReport gradient_check_suite(std::uint64_t seed, int instances, double h = 1e-5,
                                    double rel_floor = 1e-5);

struct AdvantageReport {
  std::size_t groups = 0;
  double max_abs_mean = 0.0;
  double max_std_deviation = 0.0;  // max |population std - 1|
  double max_affine_deviation = 0.0;
  bool degenerate_all_zero = true;
};

/// Random groups with G in 2..16: mean/std of normalized advantages, affine
/// invariance, and the all-equal rule.
AdvantageReport advantage_check(std::uint64_t seed, int groups);

/// Max |objective| over on-policy instances with beta = 0 (should be ~0).
double on_policy_objective_check(std::uint64_t seed, int instances);

/// Number of (A, eps) draws where clipped_term(1, A, eps) != A exactly.
std::size_t clip_identity_failures(std::uint64_t seed, int samples);

struct PreferenceReport {
  double tie_loss_error = 0.0;         // |dpo_loss(r, r) - ln 2|
  double max_grad_fd_error = 0.0;      // dpo_loss_grad vs central differences
  double max_complement_error = 0.0;   // |p(a,b) + p(b,a) - 1|
  double loss_at_ten = 0.0;
};

PreferenceReport preference_check(std::uint64_t seed, int samples);

struct RewardReport {
  std::size_t st_table_mismatches = 0;  // 3 x 2 table of r_task x r_format
  double iou_2_6_vs_4_8 = 0.0;
  double jigsaw_mean_n4 = 0.0;
  double max_j_grpo_error = 0.0;  // 8 combinations x 2 stages
  double alpha_stage1 = 0.0;
  double alpha_stage2 = 0.0;
};

RewardReport reward_check();

struct CheckLine {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct SuiteSettings {
  std::uint64_t seed = 7;
  int gradient_instances = 100;
  int advantage_groups = 1000;
  int clip_samples = 10000;
};

/// The full numeric oracle suite with its pass thresholds.
std::vector<CheckLine> run_numeric_suite(const SuiteSettings& settings);

}  // namespace tandem::oracle
