#include "tandem/curation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "tandem/error.hpp"
#include "tandem/rng.hpp"

namespace tandem {
namespace {

using Key = std::pair<std::string, int>;

std::string key_text(const Key& k) { return k.first + "#" + std::to_string(k.second); }

bool is_survivor(const AssessmentResult& r) { return r.answer_correct && r.path_score.has_value(); }

bool is_rejected_candidate(const AssessmentResult& r) { return !r.answer_correct && !r.error; }

void check_aligned(std::span<const AssessmentResult> results,
                   std::span<const ReasoningTrace> traces) {
  if (results.size() != traces.size()) {
    throw PreconditionError("assessment results and traces are not aligned");
  }
}

// Index of the best survivor, or npos.
std::size_t best_index(std::span<const AssessmentResult> results,
                       std::span<const ReasoningTrace> traces) {
  std::size_t best = std::string::npos;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (!is_survivor(results[i])) continue;
    if (best == std::string::npos) {
      best = i;
      continue;
    }
    const auto score = *results[i].path_score;
    const auto best_score = *results[best].path_score;
    if (score != best_score) {
      if (score > best_score) best = i;
      continue;
    }
    if (traces[i].steps.size() != traces[best].steps.size()) {
      if (traces[i].steps.size() < traces[best].steps.size()) best = i;
      continue;
    }
    if (traces[i].sample_index < traces[best].sample_index) best = i;
  }
  return best;
}

std::string stratum_name(const ScoreStratum& s) {
  return "flawed_" + std::to_string(s.lo) + "_" + std::to_string(s.hi);
}

// Moves `amount` onto the recipients in proportion to their weights.
void redistribute(std::vector<std::size_t>& counts, std::size_t amount,
                  const std::vector<std::size_t>& recipients, const std::vector<double>& weights) {
  std::vector<double> w;
  for (std::size_t r : recipients) w.push_back(weights[r]);
  if (std::all_of(w.begin(), w.end(), [](double x) { return x <= 0.0; })) {
    std::fill(w.begin(), w.end(), 1.0);
  }
  const auto share = apportion(amount, w);
  for (std::size_t k = 0; k < recipients.size(); ++k) counts[recipients[k]] += share[k];
}

}  // namespace

std::vector<AssessedGroup> join_assessments(std::span<const Query> queries,
                                            std::span<const ReasoningTrace> traces,
                                            std::span<const AssessmentResult> results) {
  std::map<std::string, AssessedGroup> groups;
  for (const auto& q : queries) {
    if (!groups.emplace(q.id, AssessedGroup{q, {}, {}}).second) {
      throw DataError("duplicate query id " + q.id);
    }
  }
  std::map<Key, const AssessmentResult*> by_key;
  for (const auto& r : results) {
    if (!by_key.emplace(Key{r.query_id, r.sample_index}, &r).second) {
      throw DataError("duplicate assessment for " + key_text({r.query_id, r.sample_index}));
    }
  }
  std::map<Key, const ReasoningTrace*> trace_keys;
  for (const auto& t : traces) {
    const Key key{t.query_id, t.sample_index};
    if (!trace_keys.emplace(key, &t).second) throw DataError("duplicate trace " + key_text(key));
    if (!groups.count(t.query_id)) throw DataError("trace for unknown query " + t.query_id);
    if (!by_key.count(key)) throw DataError("trace " + key_text(key) + " has no assessment");
  }
  for (const auto& [key, r] : by_key) {
    if (!trace_keys.count(key)) throw DataError("assessment " + key_text(key) + " has no trace");
  }
  for (const auto& [key, t] : trace_keys) {
    AssessedGroup& g = groups.at(key.first);
    g.traces.push_back(*t);
    g.results.push_back(*by_key.at(key));
  }
  std::vector<AssessedGroup> out;
  for (auto& [id, g] : groups) out.push_back(std::move(g));
  return out;
}

ReasoningTrace select_best_path(std::span<const AssessmentResult> results,
                                std::span<const ReasoningTrace> traces) {
  check_aligned(results, traces);
  const std::size_t best = best_index(results, traces);
  if (best == std::string::npos) {
    throw NoSurvivor(traces.empty() ? std::string("no traces")
                                    : traces.front().query_id + ": no answer-correct scored trace");
  }
  return traces[best];
}

ReasoningSftCorpus build_reasoning_sft(std::span<const AssessedGroup> groups) {
  ReasoningSftCorpus corpus;
  for (const auto& g : groups) {
    check_aligned(g.results, g.traces);
    const std::size_t best = best_index(g.results, g.traces);
    if (best == std::string::npos) {
      corpus.dropped.push_back(g.query.id);
      continue;
    }
    corpus.records.push_back({g.query, g.traces[best], *g.results[best].path_score});
  }
  return corpus;
}

Json to_json(const ReasoningSftRecord& r) {
  return {{"query", to_json(r.query)}, {"trace", to_json(r.trace)}, {"path_score", r.path_score}};
}

void SummaryCorpusSpec::validate() const {
  double sum = optimal_fraction + agent_pair_fraction + plain_qa_fraction;
  for (double f : {optimal_fraction, agent_pair_fraction, plain_qa_fraction}) {
    if (!(f >= 0.0)) throw ConfigError("summary corpus fractions must be >= 0");
  }
  std::vector<std::pair<int, int>> ranges;
  for (const auto& s : strata) {
    if (!(s.fraction >= 0.0)) throw ConfigError("stratum fractions must be >= 0");
    if (s.lo < 1 || s.hi > 100 || s.lo > s.hi) {
      throw ConfigError("stratum range [" + std::to_string(s.lo) + "," + std::to_string(s.hi) +
                        "] must lie within 1..100");
    }
    sum += s.fraction;
    ranges.emplace_back(s.lo, s.hi);
  }
  std::sort(ranges.begin(), ranges.end());
  for (std::size_t i = 1; i < ranges.size(); ++i) {
    if (ranges[i].first <= ranges[i - 1].second) throw ConfigError("stratum ranges overlap");
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("summary corpus fractions must sum to 1");
}

SummaryCorpusSpec SummaryCorpusSpec::defaults() {
  SummaryCorpusSpec spec;
  spec.strata = {{1, 33, 0.15}, {34, 66, 0.15}, {67, 99, 0.15}};
  spec.optimal_fraction = 0.30;
  spec.agent_pair_fraction = 0.10;
  spec.plain_qa_fraction = 0.15;
  return spec;
}

std::string_view to_string(SummaryRecordKind k) {
  switch (k) {
    case SummaryRecordKind::Optimal: return "optimal";
    case SummaryRecordKind::Flawed: return "flawed";
    case SummaryRecordKind::AgentPair: return "agent_pair";
    case SummaryRecordKind::PlainQa: return "plain_qa";
  }
  return "unknown";
}

Json to_json(const SummaryRecord& r) {
  Json doc = {{"kind", to_string(r.kind)},
              {"query", to_json(r.query)},
              {"target_answer", r.target_answer}};
  if (r.reasoning) doc["reasoning"] = to_json(*r.reasoning);
  if (r.path_score) doc["path_score"] = *r.path_score;
  if (r.flaws) doc["flaws"] = *r.flaws;
  if (r.stratum) doc["stratum"] = *r.stratum;
  return doc;
}

std::vector<std::size_t> apportion(std::size_t total, std::span<const double> weights) {
  std::vector<std::size_t> out(weights.size(), 0);
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (weights.empty() || !(sum > 0.0)) {
    if (total != 0) throw PreconditionError("cannot apportion over zero total weight");
    return out;
  }
  std::vector<double> remainder(weights.size(), 0.0);
  std::size_t given = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = static_cast<double>(total) * std::max(weights[i], 0.0) / sum;
    // Tolerate representation error such as 100 * 0.15 / 1.0 = 14.999...
    const double floored = std::floor(exact + 1e-9);
    out[i] = static_cast<std::size_t>(floored);
    remainder[i] = std::max(exact - floored, 0.0);
    given += out[i];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (std::abs(remainder[a] - remainder[b]) > 1e-12) return remainder[a] > remainder[b];
    return a < b;
  });
  for (std::size_t k = 0; given < total; k = (k + 1) % order.size()) {
    if (weights[order[k]] <= 0.0) continue;
    ++out[order[k]];
    ++given;
  }
  return out;
}

SummaryCorpus build_summary_corpus(std::span<const AssessedGroup> groups,
                                   const SummaryCorpusSpec& spec, std::uint64_t seed) {
  spec.validate();
  const std::size_t n_strata = spec.strata.size();
  const std::size_t n_cat = n_strata + 3;
  const std::size_t optimal = n_strata, agent_pair = n_strata + 1, plain_qa = n_strata + 2;

  // Candidate records per category, in deterministic (query id, sample) order.
  std::vector<std::vector<SummaryRecord>> pools(n_cat);
  for (const auto& g : groups) {
    check_aligned(g.results, g.traces);
    const std::size_t best = best_index(g.results, g.traces);
    for (std::size_t i = 0; i < g.traces.size(); ++i) {
      const AssessmentResult& r = g.results[i];
      SummaryRecord rec;
      rec.query = g.query;
      rec.reasoning = g.traces[i];
      rec.target_answer = g.query.ground_truth;
      rec.path_score = r.path_score;
      rec.flaws = r.flaws;
      if (i == best) {
        rec.kind = SummaryRecordKind::Optimal;
        pools[optimal].push_back(rec);
      } else if (r.path_score) {
        for (std::size_t s = 0; s < n_strata; ++s) {
          if (*r.path_score >= spec.strata[s].lo && *r.path_score <= spec.strata[s].hi) {
            rec.kind = SummaryRecordKind::Flawed;
            rec.stratum = s;
            pools[s].push_back(rec);
            break;
          }
        }
      }
      if (g.traces[i].source != TraceSource::Generated && !r.error) {
        SummaryRecord pair = rec;
        pair.kind = SummaryRecordKind::AgentPair;
        pair.stratum.reset();
        pools[agent_pair].push_back(std::move(pair));
      }
    }
    SummaryRecord qa;
    qa.kind = SummaryRecordKind::PlainQa;
    qa.query = g.query;
    qa.target_answer = g.query.ground_truth;
    pools[plain_qa].push_back(std::move(qa));
  }

  std::vector<double> weights;
  std::vector<std::string> names;
  for (const auto& s : spec.strata) {
    weights.push_back(s.fraction);
    names.push_back(stratum_name(s));
  }
  weights.insert(weights.end(),
                 {spec.optimal_fraction, spec.agent_pair_fraction, spec.plain_qa_fraction});
  names.insert(names.end(), {"optimal", "agent_pair", "plain_qa"});

  SummaryCorpus corpus;
  const std::size_t total = spec.total == 0 ? groups.size() : spec.total;
  const std::vector<std::size_t> requested = apportion(total, weights);
  std::vector<std::size_t> counts = requested;

  auto nonempty = [&](std::size_t from, std::size_t to) {
    std::vector<std::size_t> out;
    for (std::size_t c = from; c < to; ++c) {
      if (!pools[c].empty()) out.push_back(c);
    }
    return out;
  };
  const auto all_live = nonempty(0, n_cat);

  // Empty strata hand their share to the other strata first.
  const auto live_strata = nonempty(0, n_strata);
  for (std::size_t s = 0; s < n_strata; ++s) {
    if (!pools[s].empty() || counts[s] == 0) continue;
    const auto& to = live_strata.empty() ? all_live : live_strata;
    corpus.notices.push_back("InsufficientStratum: " + names[s] + " has no candidates; " +
                             std::to_string(counts[s]) + " record(s) reallocated");
    if (!to.empty()) redistribute(counts, counts[s], to, weights);
    counts[s] = 0;
  }
  for (std::size_t c = n_strata; c < n_cat; ++c) {
    if (!pools[c].empty() || counts[c] == 0) continue;
    corpus.notices.push_back("InsufficientStratum: " + names[c] + " has no candidates; " +
                             std::to_string(counts[c]) + " record(s) reallocated");
    if (!all_live.empty()) redistribute(counts, counts[c], all_live, weights);
    counts[c] = 0;
  }

  Rng rng(seed);
  for (std::size_t c = 0; c < n_cat; ++c) {
    const auto& pool = pools[c];
    std::vector<std::size_t> picked;
    if (counts[c] > 0 && !pool.empty()) {
      std::vector<std::size_t> idx(pool.size());
      std::iota(idx.begin(), idx.end(), 0);
      if (counts[c] <= pool.size()) {
        rng.shuffle(std::span<std::size_t>(idx));
        picked.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(counts[c]));
        std::sort(picked.begin(), picked.end());
      } else {
        // Too few candidates: use each once, then draw the rest with replacement.
        picked = idx;
        while (picked.size() < counts[c]) picked.push_back(rng.uniform_index(pool.size()));
      }
    }
    for (std::size_t i : picked) corpus.records.push_back(pool[i]);
    corpus.counts.push_back({names[c], requested[c], picked.size(), pool.size()});
  }
  return corpus;
}

Json to_json(const PreferencePair& p) {
  Json doc = {{"query_id", p.query_id},
              {"chosen", to_json(p.chosen)},
              {"rejected", to_json(p.rejected)},
              {"round", p.round},
              {"chosen_score", p.chosen_score}};
  if (p.rejected_score) doc["rejected_score"] = *p.rejected_score;
  return doc;
}

PairBuildResult build_preference_pairs(std::span<const AssessedGroup> groups, int round,
                                       int min_gap) {
  if (round < 1) throw PreconditionError("preference round must be >= 1");
  PairBuildResult out;
  for (const auto& g : groups) {
    check_aligned(g.results, g.traces);
    const std::size_t best = best_index(g.results, g.traces);
    if (best == std::string::npos) {
      out.skipped.push_back(g.query.id + ": no surviving trace");
      continue;
    }
    const int best_score = *g.results[best].path_score;

    std::size_t low = std::string::npos;
    for (std::size_t i = 0; i < g.traces.size(); ++i) {
      if (i == best || !is_survivor(g.results[i])) continue;
      if (low == std::string::npos || *g.results[i].path_score < *g.results[low].path_score ||
          (*g.results[i].path_score == *g.results[low].path_score &&
           g.traces[i].sample_index < g.traces[low].sample_index)) {
        low = i;
      }
    }
    if (low != std::string::npos && best_score - *g.results[low].path_score >= min_gap) {
      out.pairs.push_back({g.query.id, g.traces[best], g.traces[low], round, best_score,
                           *g.results[low].path_score});
      continue;
    }

    std::size_t incorrect = std::string::npos;
    for (std::size_t i = 0; i < g.traces.size(); ++i) {
      if (!is_rejected_candidate(g.results[i])) continue;
      if (incorrect == std::string::npos ||
          g.traces[i].sample_index < g.traces[incorrect].sample_index) {
        incorrect = i;
      }
    }
    if (incorrect != std::string::npos) {
      out.pairs.push_back(
          {g.query.id, g.traces[best], g.traces[incorrect], round, best_score, std::nullopt});
      continue;
    }
    out.skipped.push_back(g.query.id + ": no rejected candidate");
  }
  return out;
}

std::vector<PreferencePair> subsample_pairs(std::vector<PreferencePair> pairs, std::size_t limit,
                                            std::uint64_t seed) {
  if (pairs.size() <= limit) return pairs;
  std::vector<std::size_t> idx(pairs.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(idx));
  idx.resize(limit);
  std::sort(idx.begin(), idx.end());
  std::vector<PreferencePair> out;
  for (std::size_t i : idx) out.push_back(std::move(pairs[i]));
  return out;
}

PassKRecord passk_from_json(const Json& doc) {
  PassKRecord r;
  try {
    r.query_id = doc.at("query_id").get<std::string>();
    r.attempts = doc.at("attempts").get<int>();
    r.successes = doc.at("successes").get<int>();
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("pass@k record: ") + e.what());
  }
  if (r.attempts < 1 || r.successes < 0 || r.successes > r.attempts) {
    throw SchemaError(r.query_id + ": pass@k needs 0 <= successes <= attempts, attempts >= 1");
  }
  return r;
}

std::vector<std::string> reject_sample_passk(std::span<const PassKRecord> records,
                                             const PassKPolicy& policy) {
  if (!(policy.max_pass_rate >= 0.0 && policy.max_pass_rate <= 1.0)) {
    throw ConfigError("max_pass_rate must lie in [0, 1]");
  }
  std::vector<std::string> kept;
  for (const auto& r : records) {
    if (r.attempts != policy.k) {
      throw KMismatch(r.query_id + ": " + std::to_string(r.attempts) + " attempts, expected k=" +
                      std::to_string(policy.k));
    }
    const double rate = r.pass_rate();
    const bool keep = r.successes == 0 ? policy.retain_zero : rate <= policy.max_pass_rate + 1e-9;
    if (keep) kept.push_back(r.query_id);
  }
  return kept;
}

}  // namespace tandem
