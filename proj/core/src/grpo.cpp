#include "tandem/grpo.hpp"

#include <algorithm>
#include <cmath>

#include "tandem/error.hpp"

namespace tandem {
namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

}  // namespace

void GrpoConfig::validate() const {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("grpo epsilon must lie in (0, 1)");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("grpo beta must be >= 0");
  if (!(std_floor > 0.0)) throw ConfigError("grpo std_floor must be > 0");
}

std::vector<double> compute_advantages(std::span<const double> rewards, double std_floor,
                                       StdKind kind) {
  const std::size_t g = rewards.size();
  if (g < 2) throw GroupTooSmall("advantages need a group of at least 2, got " + std::to_string(g));
  std::vector<double> out(g, 0.0);
  const auto [lo, hi] = std::minmax_element(rewards.begin(), rewards.end());
  if (*lo == *hi) return out;

  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(g);
  double ss = 0.0;
  for (double r : rewards) ss += (r - mean) * (r - mean);
  const double denom = kind == StdKind::Population ? static_cast<double>(g)
                                                   : static_cast<double>(g - 1);
  const double sd = std::max(std::sqrt(ss / denom), std_floor);
  for (std::size_t i = 0; i < g; ++i) out[i] = (rewards[i] - mean) / sd;
  return out;
}

double importance_ratio(double logp_current, double logp_old) {
  return std::exp(logp_current - logp_old);
}

double clipped_term(double rho, double advantage, double epsilon) {
  const double clipped = std::clamp(rho, 1.0 - epsilon, 1.0 + epsilon);
  return std::min(rho * advantage, clipped * advantage);
}

double clipped_term_slope(double rho, double advantage, double epsilon) {
  if (advantage > 0 && rho > 1.0 + epsilon) return 0.0;
  if (advantage < 0 && rho < 1.0 - epsilon) return 0.0;
  return advantage;
}

double kl_penalty(double logp_current, double logp_ref) {
  const double d = logp_ref - logp_current;
  // expm1 keeps precision when the policies nearly agree.
  return std::max(0.0, std::expm1(d) - d);
}

void RolloutGroup::compute_advantages(const GrpoConfig& config) {
  if (rewards.size() != outputs.size()) {
    throw ShapeMismatch(prompt_id + ": " + std::to_string(rewards.size()) + " rewards for " +
                        std::to_string(outputs.size()) + " outputs");
  }
  advantages = tandem::compute_advantages(rewards, config.std_floor, config.std_kind);
}

double grpo_objective(const RolloutGroup& group, const TokenLogprobs& lp,
                      const GrpoConfig& config) {
  const std::size_t g = group.size();
  if (group.advantages.size() != g || group.rewards.size() != g) {
    throw ShapeMismatch(group.prompt_id + ": advantages not computed for every output");
  }
  if (lp.current.size() != g || lp.old.size() != g || lp.reference.size() != g) {
    throw ShapeMismatch(group.prompt_id + ": log-prob tables do not match the group size");
  }
  if (g == 0) throw GroupTooSmall("empty rollout group");
  double total = 0.0;
  for (std::size_t i = 0; i < g; ++i) {
    const std::size_t n = group.outputs[i].size();
    if (n == 0 || lp.current[i].size() != n || lp.old[i].size() != n ||
        lp.reference[i].size() != n) {
      throw ShapeMismatch(group.prompt_id + ": log-prob lengths do not match output " +
                          std::to_string(i));
    }
    double sum = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double rho = importance_ratio(lp.current[i][t], lp.old[i][t]);
      sum += clipped_term(rho, group.advantages[i], config.epsilon) -
             config.beta * kl_penalty(lp.current[i][t], lp.reference[i][t]);
    }
    total += sum / static_cast<double>(n);
  }
  return total / static_cast<double>(g);
}

double bt_preference_prob(double r1, double r2) { return sigmoid(r1 - r2); }

double dpo_loss(double reward_w, double reward_l) { return softplus(-(reward_w - reward_l)); }

double dpo_loss_grad(double reward_w, double reward_l) { return -sigmoid(-(reward_w - reward_l)); }

double implicit_reward(double beta, std::span<const double> logp_policy,
                       std::span<const double> logp_ref) {
  if (logp_policy.size() != logp_ref.size()) {
    throw ShapeMismatch("implicit reward: policy and reference token counts differ");
  }
  double diff = 0.0;
  for (std::size_t t = 0; t < logp_policy.size(); ++t) diff += logp_policy[t] - logp_ref[t];
  return beta * diff;
}

std::vector<DpoRound> iterative_dpo_round_plan(int total_rounds, const std::string& base_tag) {
  if (total_rounds < 1) throw ConfigError("iterative DPO needs at least one round");
  std::vector<DpoRound> plan;
  for (int t = 1; t <= total_rounds; ++t) {
    plan.push_back({t,
                    base_tag + "_" + std::to_string(t),
                    base_tag + "_" + std::to_string(t + 1),
                    {"generate", "assess", "curate"},
                    "preference_pairs_round_" + std::to_string(t) + ".jsonl"});
  }
  return plan;
}

bool dpo_plan_is_chained(std::span<const DpoRound> plan) {
  for (std::size_t i = 1; i < plan.size(); ++i) {
    if (plan[i].round <= plan[i - 1].round) return false;
    if (plan[i].input_model != plan[i - 1].output_model) return false;
  }
  return true;
}

Json to_json(std::span<const DpoRound> plan) {
  Json rounds = Json::array();
  for (const auto& r : plan) {
    rounds.push_back({{"round", r.round},
                      {"input_model", r.input_model},
                      {"output_model", r.output_model},
                      {"stages", r.stages},
                      {"pairs_file", r.pairs_file}});
  }
  return {{"rounds", std::move(rounds)}};
}

std::vector<DpoRound> dpo_plan_from_json(const Json& doc) {
  std::vector<DpoRound> plan;
  try {
    for (const auto& r : doc.at("rounds")) {
      plan.push_back({r.at("round").get<int>(), r.at("input_model").get<std::string>(),
                      r.at("output_model").get<std::string>(),
                      r.at("stages").get<std::vector<std::string>>(),
                      r.at("pairs_file").get<std::string>()});
    }
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("dpo plan: ") + e.what());
  }
  return plan;
}

}  // namespace tandem
