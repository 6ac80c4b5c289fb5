#include "tandem/toy_policy.hpp"

#include <algorithm>
#include <cmath>

#include "tandem/error.hpp"

namespace tandem {
namespace {

double log_sum_exp(std::span<const double> xs) {
  const double m = *std::max_element(xs.begin(), xs.end());
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

void check_token(int token, int vocab, const char* what) {
  if (token < 0 || token >= vocab) {
    throw ShapeMismatch(std::string(what) + " " + std::to_string(token) + " outside vocabulary");
  }
}

}  // namespace

ToyPolicy::ToyPolicy(int vocab, int window) : vocab_(vocab), window_(window) {
  if (vocab < 2 || vocab > kMaxVocab) throw ShapeMismatch("toy vocabulary must lie in 2..16");
  if (window < 1 || window > kMaxWindow) throw ShapeMismatch("toy window must lie in 1..6");
  logits_.assign(static_cast<std::size_t>(window) * vocab * vocab, 0.0);
}

std::size_t ToyPolicy::row(int position, int prev_token) const {
  if (position < 0 || position >= window_) {
    throw ShapeMismatch("position " + std::to_string(position) + " outside the window");
  }
  check_token(prev_token, vocab_, "context token");
  return (static_cast<std::size_t>(position) * vocab_ + prev_token) * vocab_;
}

double ToyPolicy::log_prob(int position, int prev_token, int token) const {
  check_token(token, vocab_, "token");
  const std::span<const double> r(logits_.data() + row(position, prev_token), vocab_);
  return r[token] - log_sum_exp(r);
}

std::vector<double> ToyPolicy::sequence_log_probs(int prompt_token,
                                                  std::span<const int> sequence) const {
  if (sequence.size() > static_cast<std::size_t>(window_)) {
    throw ShapeMismatch("sequence longer than the policy window");
  }
  std::vector<double> out;
  int prev = prompt_token;
  for (std::size_t t = 0; t < sequence.size(); ++t) {
    out.push_back(log_prob(static_cast<int>(t), prev, sequence[t]));
    prev = sequence[t];
  }
  return out;
}

std::vector<int> ToyPolicy::sample(int prompt_token, int length, Rng& rng) const {
  if (length < 1 || length > window_) throw ShapeMismatch("sample length outside 1..window");
  std::vector<int> out;
  int prev = prompt_token;
  for (int t = 0; t < length; ++t) {
    const std::size_t base = row(t, prev);
    const double norm = log_sum_exp(std::span<const double>(logits_.data() + base, vocab_));
    double u = rng.uniform01();
    int token = vocab_ - 1;
    for (int v = 0; v < vocab_; ++v) {
      u -= std::exp(logits_[base + v] - norm);
      if (u < 0) {
        token = v;
        break;
      }
    }
    out.push_back(token);
    prev = token;
  }
  return out;
}

void ToyPolicy::randomize(Rng& rng, double scale) {
  for (double& x : logits_) x = scale * (2.0 * rng.uniform01() - 1.0);
}

TokenLogprobs toy_token_logprobs(const ToyPolicy& current, const ToyPolicy& old,
                                 const ToyPolicy& reference, const ToyGroup& group) {
  TokenLogprobs lp;
  for (const auto& o : group.group.outputs) {
    lp.current.push_back(current.sequence_log_probs(group.prompt_token, o));
    lp.old.push_back(old.sequence_log_probs(group.prompt_token, o));
    lp.reference.push_back(reference.sequence_log_probs(group.prompt_token, o));
  }
  return lp;
}

double toy_objective(const ToyPolicy& current, const ToyPolicy& old, const ToyPolicy& reference,
                     std::span<const ToyGroup> groups, const GrpoConfig& config) {
  if (groups.empty()) throw ShapeMismatch("toy objective needs at least one group");
  double total = 0.0;
  for (const auto& g : groups) {
    total += grpo_objective(g.group, toy_token_logprobs(current, old, reference, g), config);
  }
  return total / static_cast<double>(groups.size());
}

std::vector<double> grpo_gradient(const ToyPolicy& current, const ToyPolicy& old,
                                  const ToyPolicy& reference, std::span<const ToyGroup> groups,
                                  const GrpoConfig& config) {
  if (groups.empty()) throw ShapeMismatch("toy gradient needs at least one group");
  if (old.vocab() != current.vocab() || old.window() != current.window() ||
      reference.vocab() != current.vocab() || reference.window() != current.window()) {
    throw ShapeMismatch("toy policies must share vocabulary and window");
  }
  const int vocab = current.vocab();
  const auto logits = current.logits();
  std::vector<double> grad(logits.size(), 0.0);
  std::vector<double> probs(vocab);

  for (const auto& tg : groups) {
    const RolloutGroup& group = tg.group;
    const std::size_t g = group.size();
    if (group.advantages.size() != g) {
      throw ShapeMismatch(group.prompt_id + ": advantages not computed");
    }
    if (g == 0) throw GroupTooSmall("empty rollout group");
    for (std::size_t i = 0; i < g; ++i) {
      const auto& o = group.outputs[i];
      if (o.empty()) throw ShapeMismatch(group.prompt_id + ": empty output");
      const double weight = 1.0 / (static_cast<double>(groups.size()) * static_cast<double>(g) *
                                   static_cast<double>(o.size()));
      const auto lc = current.sequence_log_probs(tg.prompt_token, o);
      const auto lo = old.sequence_log_probs(tg.prompt_token, o);
      const auto lr = reference.sequence_log_probs(tg.prompt_token, o);
      int prev = tg.prompt_token;
      for (std::size_t t = 0; t < o.size(); ++t) {
        const double rho = importance_ratio(lc[t], lo[t]);
        // dJ/dlc for this token: surrogate slope times rho, minus beta * dk3/dlc.
        const double dl = clipped_term_slope(rho, group.advantages[i], config.epsilon) * rho -
                          config.beta * (1.0 - std::exp(lr[t] - lc[t]));
        const std::size_t base = current.row(static_cast<int>(t), prev);
        const std::span<const double> r = logits.subspan(base, vocab);
        const double norm = log_sum_exp(r);
        for (int v = 0; v < vocab; ++v) probs[v] = std::exp(r[v] - norm);
        for (int v = 0; v < vocab; ++v) {
          grad[base + v] += weight * dl * ((v == o[t] ? 1.0 : 0.0) - probs[v]);
        }
        prev = o[t];
      }
    }
  }
  return grad;
}

}  // namespace tandem
