#pragma once

#include <span>
#include <string>
#include <vector>

#include "tandem/jsonl.hpp"

namespace tandem {

enum class StdKind {
  Population,  // divide by G
  Sample,      // divide by G - 1
};

struct GrpoConfig {
  double epsilon = 0.2;  // clip width
  double beta = 0.04;    // KL weight
  double std_floor = 1e-8;
  StdKind std_kind = StdKind::Population;

  void validate() const;  // ConfigError
};

/// Â_i = (r_i - mean) / max(std, std_floor). All-equal rewards give all
/// zeros. Throws GroupTooSmall when fewer than two rewards are given.
std::vector<double> compute_advantages(std::span<const double> rewards, double std_floor,
                                       StdKind kind = StdKind::Population);

/// exp(logp_current - logp_old).
double importance_ratio(double logp_current, double logp_old);

/// min(rho * A, clip(rho, 1 - eps, 1 + eps) * A).
double clipped_term(double rho, double advantage, double epsilon);

/// d/d(rho) of clipped_term, with the unclipped branch taken on ties.
double clipped_term_slope(double rho, double advantage, double epsilon);

/// Per-token k3 estimator of KL(current || ref):
/// exp(d) - d - 1 with d = logp_ref - logp_current. Always >= 0.
double kl_penalty(double logp_current, double logp_ref);

struct RolloutGroup {
  std::string prompt_id;
  std::vector<std::vector<int>> outputs;  // token ids o_1..o_G
  std::vector<double> rewards;            // r_1..r_G
  std::vector<double> advantages;         // filled by compute_advantages

  std::size_t size() const { return outputs.size(); }
  void compute_advantages(const GrpoConfig& config);
};

/// Per-output, per-token log-probabilities under the three policies.
struct TokenLogprobs {
  std::vector<std::vector<double>> current;
  std::vector<std::vector<double>> old;
  std::vector<std::vector<double>> reference;
};

/// (1/G) Σ_i (1/|o_i|) Σ_t [clipped_term(ρ_it, Â_i, ε) - β · kl_penalty_it].
/// The KL penalty sits inside the token sum. Throws ShapeMismatch.
double grpo_objective(const RolloutGroup& group, const TokenLogprobs& logprobs,
                      const GrpoConfig& config);

/// σ(r1 - r2): probability that response 1 is preferred.
double bt_preference_prob(double r1, double r2);

/// -log σ(reward_w - reward_l), evaluated as softplus(-(reward_w - reward_l)).
double dpo_loss(double reward_w, double reward_l);

/// d dpo_loss / d(reward_w - reward_l) = -σ(-(reward_w - reward_l)).
double dpo_loss_grad(double reward_w, double reward_l);

/// β · (Σ logp_policy - Σ logp_ref): the implicit reward of standard DPO.
/// Throws ShapeMismatch when the token counts differ.
double implicit_reward(double beta, std::span<const double> logp_policy,
                       std::span<const double> logp_ref);

/// One round of iterative preference optimisation: the model tagged
/// `input_model` generates and the resulting pairs train `output_model`.
struct DpoRound {
  int round = 1;
  std::string input_model;
  std::string output_model;
  std::vector<std::string> stages;  // generate, assess, curate
  std::string pairs_file;

  bool operator==(const DpoRound&) const = default;
};

/// Rounds 1..total_rounds chaining `<base_tag>_t` -> `<base_tag>_{t+1}`.
/// Throws ConfigError when total_rounds < 1.
std::vector<DpoRound> iterative_dpo_round_plan(int total_rounds,
                                               const std::string& base_tag = "M");

/// Round tags strictly increase and each input tag equals the previous
/// round's output tag.
bool dpo_plan_is_chained(std::span<const DpoRound> plan);

Json to_json(std::span<const DpoRound> plan);
std::vector<DpoRound> dpo_plan_from_json(const Json& doc);  // SchemaError

}  // namespace tandem
