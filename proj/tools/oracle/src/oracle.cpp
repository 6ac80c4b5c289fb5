#include "tandem/oracle/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "tandem/reward.hpp"
#include "tandem/trace.hpp"

namespace tandem::oracle {
namespace {

std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", x);
  return buf;
}

int uniform_int(Rng& rng, int lo, int hi) {
  return lo + static_cast<int>(rng.uniform_index(static_cast<std::size_t>(hi - lo + 1)));
}

// Which side of the clip window every token's ratio falls on.
std::vector<int> clip_regions(const ToyInstance& inst, const ToyPolicy& current) {
  std::vector<int> regions;
  const double eps = inst.config.epsilon;
  for (const auto& g : inst.groups) {
    const TokenLogprobs lp = toy_token_logprobs(current, inst.old, inst.reference, g);
    for (std::size_t i = 0; i < lp.current.size(); ++i) {
      for (std::size_t t = 0; t < lp.current[i].size(); ++t) {
        const double rho = importance_ratio(lp.current[i][t], lp.old[i][t]);
        regions.push_back(rho < 1.0 - eps ? -1 : (rho > 1.0 + eps ? 1 : 0));
      }
    }
  }
  return regions;
}

double objective_at(const ToyInstance& inst, const ToyPolicy& current) {
  return toy_objective(current, inst.old, inst.reference, inst.groups, inst.config);
}

}  // namespace

ToyInstance make_toy_instance(Rng& rng, bool on_policy) {
  const int vocab = uniform_int(rng, 2, 8);
  const int window = uniform_int(rng, 1, 6);
  ToyInstance inst{ToyPolicy(vocab, window), ToyPolicy(vocab, window), ToyPolicy(vocab, window),
                   {}, GrpoConfig{}};
  inst.old.randomize(rng, 1.0);
  inst.reference.randomize(rng, 1.0);
  auto cur = inst.current.logits();
  const auto old = inst.old.logits();
  for (std::size_t k = 0; k < cur.size(); ++k) {
    cur[k] = old[k] + (on_policy ? 0.0 : 0.3 * (2.0 * rng.uniform01() - 1.0));
  }
  inst.config.epsilon = 0.2;
  inst.config.beta = on_policy ? 0.0 : 0.02 + 0.1 * rng.uniform01();

  const int n_groups = uniform_int(rng, 1, 3);
  for (int gi = 0; gi < n_groups; ++gi) {
    ToyGroup tg;
    tg.prompt_token = uniform_int(rng, 0, vocab - 1);
    tg.group.prompt_id = "p" + std::to_string(gi);
    const int g = uniform_int(rng, 2, 8);
    for (int i = 0; i < g; ++i) {
      tg.group.outputs.push_back(inst.old.sample(tg.prompt_token, uniform_int(rng, 1, window), rng));
      tg.group.rewards.push_back(rng.uniform01());
    }
    tg.group.compute_advantages(inst.config);
    inst.groups.push_back(std::move(tg));
  }
  return inst;
}

GradientReport gradient_check(const ToyInstance& inst, double h, double rel_floor) {
  GradientReport report;
  report.instances = 1;
  const std::vector<double> analytic =
      grpo_gradient(inst.current, inst.old, inst.reference, inst.groups, inst.config);
  ToyPolicy probe = inst.current;
  auto theta = probe.logits();
  for (std::size_t k = 0; k < theta.size(); ++k) {
    const double x = theta[k];
    theta[k] = x + h;
    const double f_plus = objective_at(inst, probe);
    const auto regions_plus = clip_regions(inst, probe);
    theta[k] = x - h;
    const double f_minus = objective_at(inst, probe);
    const auto regions_minus = clip_regions(inst, probe);
    theta[k] = x;
    if (regions_plus != regions_minus) {
      ++report.kink_skipped;
      continue;
    }
    const double numeric = (f_plus - f_minus) / (2.0 * h);
    const double abs_err = std::abs(analytic[k] - numeric);
    const double scale = std::max({std::abs(analytic[k]), std::abs(numeric), rel_floor});
    report.max_abs_error = std::max(report.max_abs_error, abs_err);
    report.max_rel_error = std::max(report.max_rel_error, abs_err / scale);
    ++report.coordinates;
  }
  return report;
}

GradientReport gradient_check_suite(std::uint64_t seed, int instances, double h,
                                    double rel_floor) {
  Rng rng(seed);
  GradientReport total;
  for (int n = 0; n < instances; ++n) {
    const GradientReport r = gradient_check(make_toy_instance(rng), h, rel_floor);
    total.instances += 1;
    total.coordinates += r.coordinates;
    total.kink_skipped += r.kink_skipped;
    total.max_abs_error = std::max(total.max_abs_error, r.max_abs_error);
    total.max_rel_error = std::max(total.max_rel_error, r.max_rel_error);
  }
  return total;
}

AdvantageReport advantage_check(std::uint64_t seed, int groups) {
  Rng rng(seed);
  AdvantageReport report;
  for (int n = 0; n < groups; ++n) {
    const int g = uniform_int(rng, 2, 16);
    std::vector<double> r(g);
    for (double& x : r) x = 10.0 * rng.uniform01() - 5.0;
    const auto a = compute_advantages(r, 1e-8);
    const double mean = std::accumulate(a.begin(), a.end(), 0.0) / g;
    double ss = 0.0;
    for (double x : a) ss += (x - mean) * (x - mean);
    report.max_abs_mean = std::max(report.max_abs_mean, std::abs(mean));
    report.max_std_deviation = std::max(report.max_std_deviation, std::abs(std::sqrt(ss / g) - 1.0));

    const double c = 0.5 + 3.0 * rng.uniform01();
    const double b = 10.0 * rng.uniform01() - 5.0;
    std::vector<double> shifted(g);
    for (int i = 0; i < g; ++i) shifted[i] = c * r[i] + b;
    const auto a2 = compute_advantages(shifted, 1e-8);
    for (int i = 0; i < g; ++i) {
      report.max_affine_deviation = std::max(report.max_affine_deviation, std::abs(a[i] - a2[i]));
    }

    const std::vector<double> flat(g, r[0]);
    for (double x : compute_advantages(flat, 1e-8)) {
      if (x != 0.0) report.degenerate_all_zero = false;
    }
    ++report.groups;
  }
  return report;
}

double on_policy_objective_check(std::uint64_t seed, int instances) {
  Rng rng(seed);
  double worst = 0.0;
  for (int n = 0; n < instances; ++n) {
    const ToyInstance inst = make_toy_instance(rng, true);
    worst = std::max(worst, std::abs(objective_at(inst, inst.current)));
  }
  return worst;
}

std::size_t clip_identity_failures(std::uint64_t seed, int samples) {
  Rng rng(seed);
  std::size_t failures = 0;
  for (int n = 0; n < samples; ++n) {
    const double a = 20.0 * rng.uniform01() - 10.0;
    const double eps = 1e-6 + 0.999 * rng.uniform01();
    if (clipped_term(1.0, a, eps) != a) ++failures;
  }
  return failures;
}

PreferenceReport preference_check(std::uint64_t seed, int samples) {
  Rng rng(seed);
  PreferenceReport report;
  const double h = 1e-5;
  for (int n = 0; n < samples; ++n) {
    const double r = 20.0 * rng.uniform01() - 10.0;
    report.tie_loss_error = std::max(report.tie_loss_error, std::abs(dpo_loss(r, r) - std::log(2.0)));

    const double rl = 4.0 * rng.uniform01() - 2.0;
    const double rw = rl + 20.0 * rng.uniform01() - 10.0;
    const double fd = (dpo_loss(rw + h, rl) - dpo_loss(rw - h, rl)) / (2.0 * h);
    report.max_grad_fd_error = std::max(report.max_grad_fd_error, std::abs(fd - dpo_loss_grad(rw, rl)));

    const double s = bt_preference_prob(rw, rl) + bt_preference_prob(rl, rw);
    report.max_complement_error = std::max(report.max_complement_error, std::abs(s - 1.0));
  }
  report.loss_at_ten = dpo_loss(10.0, 0.0);
  return report;
}

RewardReport reward_check() {
  RewardReport report;

  ReasoningTrace trace;
  trace.query_id = "q";
  trace.steps = {{1, "look", "inspect the clip", StepAction::Summary}};
  trace.final_summary = "done";
  trace.final_answer = "[2, 6]";
  const std::string well_formed = serialize_trace(trace);
  const std::string malformed = "no structure here";

  const Interval truth{4.0, 8.0};
  const std::pair<Interval, double> task_rows[] = {
      {{0.0, 1.0}, 0.0}, {{2.0, 6.0}, 1.0 / 3.0}, {{4.0, 8.0}, 1.0}};
  for (const auto& [pred, r_task] : task_rows) {
    for (const auto& [output, r_format] :
         {std::pair{well_formed, 1.0}, std::pair{malformed, 0.0}}) {
      const RewardBreakdown b =
          st_grpo_reward(RewardTask::TemporalGrounding, output, pred, "[4.0, 8.0]");
      if (b.r_task != r_task || b.r_format != r_format || b.total != 0.9 * r_task + 0.1 * r_format) {
        ++report.st_table_mismatches;
      }
    }
  }
  report.iou_2_6_vs_4_8 = iou_reward({2.0, 6.0}, truth);

  std::vector<int> perm = {1, 2, 3, 4};
  const std::vector<int> identity = perm;
  double sum = 0.0;
  int count = 0;
  do {
    sum += jigsaw_reward(perm, identity);
    ++count;
  } while (std::next_permutation(perm.begin(), perm.end()));
  report.jigsaw_mean_n4 = sum / count;

  for (const auto& [stage, alpha] : {std::pair{CurriculumStage::stage1(), 0.5},
                                     std::pair{CurriculumStage::stage2(), 0.3}}) {
    for (int judge = 0; judge <= 1; ++judge) {
      for (int answer = 0; answer <= 1; ++answer) {
        for (int format = 0; format <= 1; ++format) {
          const RewardBreakdown b = j_grpo_reward(judge ? 3 : 5, 3, answer, format, stage);
          const double expected = 0.9 * (alpha * judge + (1.0 - alpha) * answer) + 0.1 * format;
          report.max_j_grpo_error = std::max(report.max_j_grpo_error, std::abs(b.total - expected));
        }
      }
    }
  }
  report.alpha_stage1 = CurriculumStage::stage1().alpha();
  report.alpha_stage2 = CurriculumStage::stage2().alpha();
  return report;
}

std::vector<CheckLine> run_numeric_suite(const SuiteSettings& s) {
  std::vector<CheckLine> lines;

  const AdvantageReport adv = advantage_check(s.seed, s.advantage_groups);
  lines.push_back({"advantage normalization",
                   adv.max_abs_mean < 1e-12 && adv.max_std_deviation < 1e-12 &&
                       adv.max_affine_deviation < 1e-12 && adv.degenerate_all_zero,
                   std::to_string(adv.groups) + " groups, max |mean| " + sci(adv.max_abs_mean) +
                       ", max |std-1| " + sci(adv.max_std_deviation) + ", affine " +
                       sci(adv.max_affine_deviation)});

  const double onp = on_policy_objective_check(s.seed, s.gradient_instances);
  lines.push_back({"on-policy objective", onp < 1e-12, "max |J| " + sci(onp)});

  const GradientReport grad = gradient_check_suite(s.seed, s.gradient_instances);
  lines.push_back({"grpo gradient", grad.max_rel_error < 1e-6,
                   "max gradient rel. error " + sci(grad.max_rel_error) + " (abs " +
                       sci(grad.max_abs_error) + ") over " +
                       std::to_string(grad.coordinates) + " coordinates, " +
                       std::to_string(grad.instances) + " instances, " +
                       std::to_string(grad.kink_skipped) + " clip-boundary skips"});

  const std::size_t clip = clip_identity_failures(s.seed, s.clip_samples);
  lines.push_back({"clip identity", clip == 0,
                   std::to_string(clip) + " failures in " + std::to_string(s.clip_samples)});

  Rng rng(s.seed);
  bool kl_ok = true;
  for (int n = 0; n < s.clip_samples; ++n) {
    const double a = -10.0 * rng.uniform01();
    const double b = -10.0 * rng.uniform01();
    if (!(kl_penalty(a, b) >= 0.0) || kl_penalty(a, a) != 0.0) kl_ok = false;
  }
  lines.push_back({"kl penalty", kl_ok, "k3 non-negative and zero on identical policies"});

  const PreferenceReport pref = preference_check(s.seed, s.clip_samples);
  lines.push_back({"dpo / bradley-terry",
                   pref.tie_loss_error < 1e-12 && pref.max_grad_fd_error < 1e-8 &&
                       pref.max_complement_error < 1e-12 && pref.loss_at_ten < 1e-4,
                   "|loss(r,r)-ln2| " + sci(pref.tie_loss_error) + ", grad fd " +
                       sci(pref.max_grad_fd_error) + ", complement " +
                       sci(pref.max_complement_error) + ", loss(10) " + sci(pref.loss_at_ten)});

  const RewardReport rew = reward_check();
  lines.push_back({"st-grpo reward",
                   rew.st_table_mismatches == 0 && rew.iou_2_6_vs_4_8 == 1.0 / 3.0 &&
                       rew.jigsaw_mean_n4 == 0.25,
                   std::to_string(rew.st_table_mismatches) + " table mismatches, IoU " +
                       std::to_string(rew.iou_2_6_vs_4_8) + ", jigsaw mean " +
                       std::to_string(rew.jigsaw_mean_n4)});
  lines.push_back({"j-grpo reward",
                   rew.max_j_grpo_error <= 1e-15 && rew.alpha_stage1 == 0.5 &&
                       rew.alpha_stage2 == 0.3,
                   "max error " + sci(rew.max_j_grpo_error) + ", alpha " +
                       std::to_string(rew.alpha_stage1) + " -> " + std::to_string(rew.alpha_stage2)});
  return lines;
}

}  // namespace tandem::oracle
