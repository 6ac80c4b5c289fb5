#pragma once

#include <span>
#include <vector>

#include "tandem/grpo.hpp"
#include "tandem/rng.hpp"

namespace tandem {

/// Tabular categorical next-token policy used to exercise the GRPO objective
/// and its gradient at desk scale.
///
/// The distribution of token t depends on (t, previous token), where the
/// previous token of position 0 is the group's prompt token. Parameters are a
/// dense logits table of shape [window][vocab][vocab].
class ToyPolicy {
 public:
  static constexpr int kMaxVocab = 16;
  static constexpr int kMaxWindow = 6;

  ToyPolicy(int vocab, int window);  // ShapeMismatch outside the limits

  int vocab() const { return vocab_; }
  int window() const { return window_; }
  std::size_t parameter_count() const { return logits_.size(); }

  std::span<double> logits() { return logits_; }
  std::span<const double> logits() const { return logits_; }

  /// Offset of the logits row for (position, prev_token).
  std::size_t row(int position, int prev_token) const;

  double log_prob(int position, int prev_token, int token) const;
  /// Per-token log-probabilities of `sequence` after `prompt_token`.
  std::vector<double> sequence_log_probs(int prompt_token, std::span<const int> sequence) const;
  std::vector<int> sample(int prompt_token, int length, Rng& rng) const;

  void randomize(Rng& rng, double scale);

 private:
  int vocab_;
  int window_;
  std::vector<double> logits_;
};

struct ToyGroup {
  int prompt_token = 0;
  RolloutGroup group;
};

TokenLogprobs toy_token_logprobs(const ToyPolicy& current, const ToyPolicy& old,
                                 const ToyPolicy& reference, const ToyGroup& group);

/// Mean of grpo_objective over the groups.
double toy_objective(const ToyPolicy& current, const ToyPolicy& old, const ToyPolicy& reference,
                     std::span<const ToyGroup> groups, const GrpoConfig& config);

/// Analytic gradient of toy_objective with respect to current.logits().
/// Groups are reduced in input order.
std::vector<double> grpo_gradient(const ToyPolicy& current, const ToyPolicy& old,
                                  const ToyPolicy& reference, std::span<const ToyGroup> groups,
                                  const GrpoConfig& config);

}  // namespace tandem
