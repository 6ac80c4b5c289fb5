#include "tandem/pipeline/config.hpp"

#include <fstream>
#include <set>

#include "tandem/digest.hpp"
#include "tandem/error.hpp"

namespace tandem::pipeline {
namespace {

// Strict view over one config object: every key read is recorded and
// finish() rejects the rest.
class Section {
 public:
  Section(const Json& doc, std::string where) : doc_(doc), where_(std::move(where)) {
    if (!doc_.is_object()) throw ConfigError(where_ + " must be a JSON object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return doc_.contains(key);
  }

  template <typename T>
  T get(const std::string& key, T fallback) {
    if (!has(key)) return fallback;
    try {
      return doc_.at(key).get<T>();
    } catch (const Json::exception&) {
      throw ConfigError(where_ + "." + key + " has the wrong type");
    }
  }

  template <typename T>
  T require(const std::string& key) {
    if (!has(key)) throw ConfigError(where_ + "." + key + " is required");
    return get<T>(key, T{});
  }

  Section child(const std::string& key) {
    static const Json empty = Json::object();
    return has(key) ? Section(doc_.at(key), where_ + "." + key) : Section(empty, where_ + "." + key);
  }

  const Json& raw(const std::string& key) {
    seen_.insert(key);
    return doc_.at(key);
  }

  void finish() const {
    for (const auto& [key, value] : doc_.items()) {
      if (!seen_.count(key)) throw ConfigError(where_ + ": unknown key '" + key + "'");
    }
  }

 private:
  const Json& doc_;
  std::string where_;
  std::set<std::string> seen_;
};

ModelEndpoint endpoint_from(const Json& doc, std::size_t index) {
  Section s(doc, "endpoints[" + std::to_string(index) + "]");
  ModelEndpoint e;
  e.name = s.require<std::string>("name");
  e.role = endpoint_role_from_string(s.require<std::string>("role"));
  e.base_url = s.get<std::string>("base_url", "");
  e.model = s.get<std::string>("model", "");
  e.timeout_s = s.get<double>("timeout_s", e.timeout_s);
  e.max_retries = s.get<int>("max_retries", e.max_retries);
  s.finish();
  e.validate();
  return e;
}

SummaryCorpusSpec summary_from(Section s) {
  SummaryCorpusSpec spec = SummaryCorpusSpec::defaults();
  if (s.has("strata")) {
    spec.strata.clear();
    const Json& strata = s.raw("strata");
    if (!strata.is_array()) throw ConfigError("curation.summary.strata must be an array");
    for (std::size_t i = 0; i < strata.size(); ++i) {
      Section st(strata[i], "curation.summary.strata[" + std::to_string(i) + "]");
      spec.strata.push_back({st.require<int>("lo"), st.require<int>("hi"),
                             st.require<double>("fraction")});
      st.finish();
    }
  }
  spec.optimal_fraction = s.get<double>("optimal", spec.optimal_fraction);
  spec.agent_pair_fraction = s.get<double>("agent_pair", spec.agent_pair_fraction);
  spec.plain_qa_fraction = s.get<double>("plain_qa", spec.plain_qa_fraction);
  spec.total = s.get<std::size_t>("total", spec.total);
  s.finish();
  spec.validate();
  return spec;
}

}  // namespace

RunConfig RunConfig::from_json(const Json& doc, const std::filesystem::path& base_dir) {
  RunConfig cfg;
  cfg.source = doc;
  Section root(doc, "config");

  if (!root.has("seed")) throw ConfigError("config.seed is mandatory");
  cfg.seed = root.get<std::uint64_t>("seed", 0);
  cfg.parallelism = root.get<std::size_t>("parallelism", cfg.parallelism);
  if (cfg.parallelism < 1) throw ConfigError("config.parallelism must be >= 1");
  cfg.work_dir = root.get<std::string>("work_dir", cfg.work_dir.string());

  {
    Section g = root.child("gateway");
    cfg.gateway.max_in_flight = g.get<std::size_t>("max_in_flight", cfg.gateway.max_in_flight);
    cfg.gateway.backoff_base =
        std::chrono::milliseconds(g.get<std::int64_t>("backoff_base_ms", cfg.gateway.backoff_base.count()));
    cfg.gateway.backoff_cap =
        std::chrono::milliseconds(g.get<std::int64_t>("backoff_cap_ms", cfg.gateway.backoff_cap.count()));
    cfg.gateway.backoff_factor = g.get<double>("backoff_factor", cfg.gateway.backoff_factor);
    g.finish();
    if (cfg.gateway.max_in_flight < 1) throw ConfigError("gateway.max_in_flight must be >= 1");
    cfg.gateway.seed = cfg.seed;
  }

  if (root.has("endpoints")) {
    const Json& list = root.raw("endpoints");
    if (!list.is_array()) throw ConfigError("config.endpoints must be an array");
    std::set<std::string> names;
    for (std::size_t i = 0; i < list.size(); ++i) {
      cfg.endpoints.push_back(endpoint_from(list[i], i));
      if (!names.insert(cfg.endpoints.back().name).second) {
        throw ConfigError("duplicate endpoint name '" + cfg.endpoints.back().name + "'");
      }
    }
  }

  {
    Section p = root.child("prompts");
    Prompts& pr = cfg.prompts;
    pr.step = p.get<std::string>("step", pr.step);
    pr.final_answer = p.get<std::string>("final", pr.final_answer);
    pr.judge = p.get<std::string>("judge", pr.judge);
    pr.scorer = p.get<std::string>("scorer", pr.scorer);
    pr.flaw = p.get<std::string>("flaw", pr.flaw);
    pr.reasoner = p.get<std::string>("reasoner", pr.reasoner);
    pr.summarizer = p.get<std::string>("summarizer", pr.summarizer);
    p.finish();
  }

  {
    Section g = root.child("generation");
    GenerationSettings& gs = cfg.generation;
    gs.generator = g.get<std::string>("generator", gs.generator);
    gs.n_samples = g.get<int>("n_samples", gs.n_samples);
    gs.max_steps = g.get<int>("max_steps", gs.max_steps);
    gs.temperature_min = g.get<double>("temperature_min", gs.temperature_min);
    gs.temperature_max = g.get<double>("temperature_max", gs.temperature_max);
    gs.top_p = g.get<double>("top_p", gs.top_p);
    gs.max_tokens = g.get<int>("max_tokens", gs.max_tokens);
    g.finish();
    if (gs.temperature_min > gs.temperature_max) {
      throw ConfigError("generation.temperature_min exceeds temperature_max");
    }
  }

  {
    Section a = root.child("assessment");
    AssessmentSettings& as = cfg.assessment;
    as.judge = a.get<std::string>("judge", as.judge);
    as.scorer = a.get<std::string>("scorer", as.scorer);
    as.flaw_annotator = a.get<std::string>("flaw_annotator", as.flaw_annotator);
    as.annotate_flaws = a.get<bool>("annotate_flaws", as.annotate_flaws);
    const auto exemplars = a.get<std::string>("exemplars", "");
    if (!exemplars.empty()) {
      std::filesystem::path p(exemplars);
      as.exemplars = p.is_absolute() ? p : base_dir / p;
    }
    a.finish();
  }

  {
    Section c = root.child("curation");
    CurationSettings& cs = cfg.curation;
    if (c.has("summary")) cs.summary = summary_from(c.child("summary"));
    cs.round = c.get<int>("round", cs.round);
    cs.dpo_rounds = c.get<int>("dpo_rounds", cs.dpo_rounds);
    cs.model_tag = c.get<std::string>("model_tag", cs.model_tag);
    cs.min_gap = c.get<int>("min_gap", cs.min_gap);
    cs.pairs_limit = c.get<std::size_t>("pairs_limit", cs.pairs_limit);
    {
      Section k = c.child("passk");
      cs.passk.k = k.get<int>("k", cs.passk.k);
      cs.passk.max_pass_rate = k.get<double>("max_pass_rate", cs.passk.max_pass_rate);
      cs.passk.retain_zero = k.get<bool>("retain_zero", cs.passk.retain_zero);
      k.finish();
    }
    c.finish();
    if (cs.round < 1 || cs.dpo_rounds < 1) throw ConfigError("curation rounds must be >= 1");
    if (cs.passk.k < 1) throw ConfigError("curation.passk.k must be >= 1");
    if (!(cs.passk.max_pass_rate >= 0.0 && cs.passk.max_pass_rate <= 1.0)) {
      throw ConfigError("curation.passk.max_pass_rate must lie in [0, 1]");
    }
  }

  {
    Section g = root.child("grpo");
    GrpoConfig& gc = cfg.grpo;
    gc.epsilon = g.get<double>("epsilon", gc.epsilon);
    gc.beta = g.get<double>("beta", gc.beta);
    gc.std_floor = g.get<double>("std_floor", gc.std_floor);
    const auto kind = g.get<std::string>("std_kind", "population");
    if (kind == "population") {
      gc.std_kind = StdKind::Population;
    } else if (kind == "sample") {
      gc.std_kind = StdKind::Sample;
    } else {
      throw ConfigError("grpo.std_kind must be population or sample");
    }
    g.finish();
    gc.validate();
  }

  {
    Section r = root.child("reward");
    cfg.reward.curriculum_switch = r.get<double>("curriculum_switch", cfg.reward.curriculum_switch);
    cfg.reward.graded_judge = r.get<bool>("graded_judge", cfg.reward.graded_judge);
    r.finish();
    if (!(cfg.reward.curriculum_switch > 0.0 && cfg.reward.curriculum_switch <= 1.0)) {
      throw ConfigError("reward.curriculum_switch must lie in (0, 1]");
    }
  }

  {
    Section e = root.child("evolve");
    EvolveSettings& es = cfg.evolve;
    es.reasoner = e.get<std::string>("reasoner", es.reasoner);
    es.summarizer = e.get<std::string>("summarizer", es.summarizer);
    es.max_iterations = e.get<int>("max_iterations", es.max_iterations);
    es.harvest_threshold = e.get<int>("harvest_threshold", es.harvest_threshold);
    es.cycle = e.get<int>("cycle", es.cycle);
    es.cycles = e.get<int>("cycles", es.cycles);
    es.reasoner_tag = e.get<std::string>("reasoner_tag", es.reasoner_tag);
    es.summarizer_tag = e.get<std::string>("summarizer_tag", es.summarizer_tag);
    es.reasoner_temperature = e.get<double>("reasoner_temperature", es.reasoner_temperature);
    e.finish();
    if (es.cycles < 1 || es.cycle < 1 || es.cycle > es.cycles) {
      throw ConfigError("evolve.cycle must lie in 1..evolve.cycles");
    }
  }

  {
    Section o = root.child("oracle");
    cfg.oracle.gradient_instances = o.get<int>("gradient_instances", cfg.oracle.gradient_instances);
    cfg.oracle.advantage_groups = o.get<int>("advantage_groups", cfg.oracle.advantage_groups);
    cfg.oracle.clip_samples = o.get<int>("clip_samples", cfg.oracle.clip_samples);
    o.finish();
  }

  root.finish();

  // Named endpoint references must exist with the right role.
  const std::pair<const std::string*, EndpointRole> refs[] = {
      {&cfg.generation.generator, EndpointRole::Generator},
      {&cfg.assessment.judge, EndpointRole::AnswerJudge},
      {&cfg.assessment.scorer, EndpointRole::PathScorer},
      {&cfg.assessment.flaw_annotator, EndpointRole::AnswerJudge},
      {&cfg.evolve.reasoner, EndpointRole::Reasoner},
      {&cfg.evolve.summarizer, EndpointRole::Summarizer},
  };
  for (const auto& [name, role] : refs) {
    if (!name->empty()) cfg.resolve(*name, role);
  }
  cfg.gen_loop().validate();
  cfg.evolve_config().validate();
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path,
                          std::optional<std::uint64_t> seed_override) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  Json doc = Json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw ConfigError(path.string() + ": not valid JSON");
  if (seed_override) {
    if (!doc.is_object()) throw ConfigError(path.string() + ": config must be a JSON object");
    doc["seed"] = *seed_override;
  }
  return from_json(doc, path.parent_path());
}

std::string RunConfig::hash() const { return sha256_hex(canonical_dump(source)); }

const ModelEndpoint& RunConfig::resolve(const std::string& name, EndpointRole role) const {
  for (const auto& e : endpoints) {
    if (name.empty() ? e.role == role : e.name == name) {
      if (e.role != role) {
        throw ConfigError("endpoint '" + name + "' has role " + std::string(to_string(e.role)) +
                          ", expected " + std::string(to_string(role)));
      }
      return e;
    }
  }
  if (name.empty()) {
    throw ConfigError("no endpoint with role " + std::string(to_string(role)) + " in the roster");
  }
  throw ConfigError("unknown endpoint '" + name + "'");
}

GenLoopConfig RunConfig::gen_loop() const {
  GenLoopConfig g;
  g.max_steps = generation.max_steps;
  g.n_samples = generation.n_samples;
  GenerationParams base;
  base.top_p = generation.top_p;
  base.max_tokens = generation.max_tokens;
  base.seed = static_cast<std::int64_t>(seed & 0x7fffffffffffffffULL);
  if (generation.n_samples >= 1) {
    g.param_schedule = GenLoopConfig::temperature_ladder(
        generation.n_samples, generation.temperature_min, generation.temperature_max, base);
  }
  g.step_prompt_template = prompts.step;
  g.answer_prompt_template = prompts.final_answer;
  return g;
}

AssessmentConfig RunConfig::assessment_config() const {
  AssessmentConfig a;
  a.judge_prompt = prompts.judge;
  a.scorer_prompt = prompts.scorer;
  a.flaw_prompt = prompts.flaw;
  a.annotate_flaws = assessment.annotate_flaws;
  return a;
}

EvolveConfig RunConfig::evolve_config() const {
  EvolveConfig e;
  e.reasoner_prompt = prompts.reasoner;
  e.summarizer_prompt = prompts.summarizer;
  e.max_iterations = evolve.max_iterations;
  e.harvest_threshold = evolve.harvest_threshold;
  e.reasoner_params.temperature = evolve.reasoner_temperature;
  return e;
}

}  // namespace tandem::pipeline
