#include "nluaug/experiments.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <future>
#include <limits>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "nluaug/error.hpp"

#ifndef NLUAUG_VERSION
#define NLUAUG_VERSION "0.0.0-unknown"
#endif

namespace nluaug {
namespace {

std::size_t toSize(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError("'" + key + "' expects a non-negative integer, got '" + v + "'");
  return out;
}

double toDouble(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
}

bool toBool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("'" + key + "' expects true or false, got '" + v + "'");
}

std::vector<std::size_t> toSizeList(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  for (std::string part; std::getline(ss, part, ',');) {
    part.erase(0, part.find_first_not_of(' '));
    part.erase(part.find_last_not_of(' ') + 1);
    out.push_back(toSize(key, part));
  }
  if (out.empty()) throw ConfigError("'" + key + "' expects a comma separated list");
  return out;
}

OptimizerKind toOptimizerKind(const std::string& key, const std::string& v) {
  if (v == "adam") return OptimizerKind::Adam;
  if (v == "sgd") return OptimizerKind::Sgd;
  throw ConfigError("'" + key + "' expects adam or sgd, got '" + v + "'");
}

std::string optimizerKindTag(OptimizerKind k) { return k == OptimizerKind::Adam ? "adam" : "sgd"; }

TokenScoreMode toScoreMode(const std::string& key, const std::string& v) {
  if (v == "real-probability") return TokenScoreMode::RealProbability;
  if (v == "next-token-mass") return TokenScoreMode::NextTokenMass;
  throw ConfigError("'" + key + "' expects real-probability or next-token-mass, got '" + v + "'");
}

std::string scoreModeTag(TokenScoreMode m) {
  return m == TokenScoreMode::RealProbability ? "real-probability" : "next-token-mass";
}

using Setter = std::function<void(ExperimentConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
#define NLUAUG_SIZE(KEY, FIELD) \
  t[KEY] = [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.FIELD = toSize(k, v); }
#define NLUAUG_DOUBLE(KEY, FIELD) \
  t[KEY] = [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.FIELD = toDouble(k, v); }
#define NLUAUG_BOOL(KEY, FIELD) \
  t[KEY] = [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.FIELD = toBool(k, v); }
    NLUAUG_SIZE("generator.embedding_dim", generator.embeddingDim);
    NLUAUG_SIZE("generator.hidden_dim", generator.hiddenDim);
    t["generator.max_len"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
      if (v == "auto") {
        c.autoMaxLen = true;
        return;
      }
      c.generator.maxLen = toSize(k, v);
      c.autoMaxLen = false;
    };
    NLUAUG_DOUBLE("generator.temperature", generator.temperature);

    NLUAUG_SIZE("token_discriminator.embedding_dim", tokenDisc.embeddingDim);
    NLUAUG_SIZE("token_discriminator.hidden_dim", tokenDisc.hiddenDim);
    t["token_discriminator.score_mode"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
      c.tokenDisc.mode = toScoreMode(k, v);
    };
    NLUAUG_SIZE("sentence_discriminator.embedding_dim", sentenceDisc.embeddingDim);
    t["sentence_discriminator.kernel_widths"] = [](ExperimentConfig& c, const std::string& k,
                                                   const std::string& v) {
      c.sentenceDisc.kernelWidths = toSizeList(k, v);
    };
    NLUAUG_SIZE("sentence_discriminator.filters_per_width", sentenceDisc.filtersPerWidth);
    NLUAUG_DOUBLE("sentence_discriminator.dropout", sentenceDisc.dropout);

    NLUAUG_SIZE("schedule.gen_pretrain_epochs", schedule.genPretrainEpochs);
    NLUAUG_SIZE("schedule.disc_pretrain_epochs", schedule.discPretrainEpochs);
    NLUAUG_SIZE("schedule.adversarial_epochs", schedule.adversarialEpochs);
    NLUAUG_SIZE("schedule.gen_updates_per_epoch", schedule.genUpdatesPerEpoch);
    NLUAUG_SIZE("schedule.disc_steps_per_epoch", schedule.discStepsPerEpoch);
    NLUAUG_SIZE("schedule.batch_size", schedule.batchSize);
    NLUAUG_SIZE("schedule.snapshot_every", schedule.snapshotEvery);
    NLUAUG_SIZE("schedule.snapshot_samples", schedule.snapshotSamples);
    NLUAUG_BOOL("schedule.center_rewards", schedule.centerRewards);
    NLUAUG_DOUBLE("schedule.gen_pretrain_lr", schedule.generatorPretrainOptimizer.learningRate);
    NLUAUG_DOUBLE("schedule.gen_adversarial_lr", schedule.generatorAdversarialOptimizer.learningRate);
    NLUAUG_DOUBLE("schedule.disc_lr", schedule.discriminatorOptimizer.learningRate);
    t["schedule.optimizer"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
      const auto kind = toOptimizerKind(k, v);
      c.schedule.generatorPretrainOptimizer.kind = kind;
      c.schedule.generatorAdversarialOptimizer.kind = kind;
      c.schedule.discriminatorOptimizer.kind = kind;
    };

    t["reward.policy"] = [](ExperimentConfig& c, const std::string&, const std::string& v) {
      c.schedule.policy.kind = parseRewardKind(v);
    };
    NLUAUG_SIZE("reward.rollouts", schedule.policy.rollouts);
    t["reward.sign"] = [](ExperimentConfig& c, const std::string&, const std::string& v) {
      c.schedule.policy.sign = parseSignConvention(v);
    };
    NLUAUG_BOOL("reward.strict_normalization", schedule.policy.strictNormalization);
    t["reward.roots"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
      if (v == "all") c.schedule.policy.roots = RolloutRoots::All;
      else if (v == "final") c.schedule.policy.roots = RolloutRoots::FinalOnly;
      else throw ConfigError("'" + k + "' expects all or final, got '" + v + "'");
    };

    NLUAUG_SIZE("nlu.word_emb_dim", nlu.wordEmbDim);
    NLUAUG_SIZE("nlu.char_emb_dim", nlu.charEmbDim);
    NLUAUG_SIZE("nlu.char_kernel", nlu.charKernel);
    NLUAUG_SIZE("nlu.encoder_layers", nlu.encoderLayers);
    NLUAUG_SIZE("nlu.encoder_hidden", nlu.encoderHidden);
    NLUAUG_SIZE("nlu.ic_hidden", nlu.icHidden);
    NLUAUG_SIZE("nlu.ner_hidden", nlu.nerHidden);
    NLUAUG_DOUBLE("nlu.dropout", nlu.dropout);
    NLUAUG_SIZE("nlu.icner_epochs", nlu.icnerEpochs);
    NLUAUG_SIZE("nlu.dc_epochs", nlu.dcEpochs);
    NLUAUG_SIZE("nlu.batch_size", nlu.batchSize);
    NLUAUG_DOUBLE("nlu.learning_rate", nlu.optimizer.learningRate);
    NLUAUG_DOUBLE("nlu.desk_scale", nlu.deskScale);
    NLUAUG_DOUBLE("nlu.epoch_scale", nlu.epochScale);
    NLUAUG_BOOL("nlu.full_scale", nlu.fullScale);

    t["sampling.strategy"] = [](ExperimentConfig& c, const std::string&, const std::string& v) {
      c.sampling = parseSamplingStrategy(v);
    };
    NLUAUG_SIZE("sampling.per_domain", perDomain);
    NLUAUG_BOOL("sampling.drop_golden_matches", dropGoldenMatches);
    t["sampling.bleu_references"] = [](ExperimentConfig& c, const std::string&, const std::string& v) {
      c.bleuReferences = parseBleuReferences(v);
    };

    NLUAUG_SIZE("embeddings.epochs", skipgram.epochs);
    NLUAUG_SIZE("embeddings.window", skipgram.window);
    NLUAUG_SIZE("embeddings.negatives", skipgram.negatives);
    NLUAUG_SIZE("embeddings.min_n", skipgram.minN);
    NLUAUG_SIZE("embeddings.max_n", skipgram.maxN);
    NLUAUG_DOUBLE("embeddings.learning_rate", skipgram.learningRate);
    t["embeddings.path"] = [](ExperimentConfig& c, const std::string&, const std::string& v) {
      c.pretrainedEmbeddings = v;
    };
    NLUAUG_BOOL("embeddings.freeze", freezeEmbeddings);

    t["run.seed"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
      c.seed = toSize(k, v);
    };
    NLUAUG_SIZE("run.repeats", repeats);
    NLUAUG_SIZE("run.jobs", jobs);
#undef NLUAUG_SIZE
#undef NLUAUG_DOUBLE
#undef NLUAUG_BOOL
    return t;
  }();
  return table;
}

std::vector<AnnotatedUtterance> concat(std::span<const AnnotatedUtterance> a,
                                       std::span<const AnnotatedUtterance> b) {
  std::vector<AnnotatedUtterance> out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

ExperimentReport trainAndEvaluate(std::span<const AnnotatedUtterance> train,
                                  std::span<const AnnotatedUtterance> test, const ExperimentConfig& config,
                                  const Rng& nluRng) {
  Rng rng = nluRng;
  const auto system = trainNluSystem(train, config.nlu, rng);
  auto report = evaluate(system, test);
  report.metadata["train_size"] = train.size();
  return report;
}

// Runs f(0..n-1) with at most `jobs` in flight; results keep index order.
template <class F>
auto runIndexed(std::size_t n, std::size_t jobs, F f) {
  using R = decltype(f(std::size_t{0}));
  std::vector<R> out;
  out.reserve(n);
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) out.push_back(f(i));
    return out;
  }
  for (std::size_t start = 0; start < n; start += jobs) {
    std::vector<std::future<R>> batch;
    for (std::size_t i = start; i < std::min(n, start + jobs); ++i)
      batch.push_back(std::async(std::launch::async, f, i));
    for (auto& fut : batch) out.push_back(fut.get());
  }
  return out;
}

ExperimentOutcome summarise(std::string name, std::vector<RepeatResult> runs, const ExperimentConfig& config) {
  ExperimentOutcome out;
  out.experiment = std::move(name);
  std::vector<ExperimentReport> b, t, c;
  for (const auto& r : runs) {
    b.push_back(r.baseline);
    t.push_back(r.treatment);
    c.push_back(r.control);
  }
  out.baseline = averageReports(b);
  out.treatment = averageReports(t);
  out.control = averageReports(c);
  for (auto* rep : {&out.baseline, &out.treatment, &out.control}) {
    rep->metadata["seed"] = config.seed;
    rep->metadata["policy"] = rewardKindTag(config.schedule.policy.kind);
    rep->metadata["sampling"] = samplingStrategyTag(config.sampling);
  }
  out.treatmentRows = compareReports(out.baseline, out.treatment);
  out.controlRows = compareReports(out.baseline, out.control);
  out.runs = std::move(runs);
  return out;
}

}  // namespace

BleuReferences parseBleuReferences(std::string_view tag) {
  if (tag == "goldens") return BleuReferences::Goldens;
  if (tag == "test") return BleuReferences::Test;
  throw ConfigError("unknown BLEU reference set '" + std::string(tag) + "' (expected goldens or test)");
}

std::string bleuReferencesTag(BleuReferences r) { return r == BleuReferences::Goldens ? "goldens" : "test"; }

void ExperimentConfig::validate() const {
  schedule.validate();
  schedule.policy.validate();
  nlu.validate();
  if (generator.embeddingDim == 0 || generator.hiddenDim == 0) throw ConfigError("generator dims must be >= 1");
  if (!autoMaxLen && generator.maxLen < 2) throw ConfigError("generator.max_len must be >= 2");
  if (tokenDisc.embeddingDim == 0 || tokenDisc.hiddenDim == 0) throw ConfigError("token discriminator dims must be >= 1");
  if (sentenceDisc.embeddingDim == 0 || sentenceDisc.filtersPerWidth == 0 || sentenceDisc.kernelWidths.empty())
    throw ConfigError("sentence discriminator dims must be >= 1");
  if (repeats == 0) throw ConfigError("run.repeats must be >= 1");
  if (jobs == 0) throw ConfigError("run.jobs must be >= 1");
  if (skipgram.minN == 0 || skipgram.minN > skipgram.maxN) throw ConfigError("embeddings n-gram range is empty");
}

nlohmann::ordered_json ExperimentConfig::toJson() const {
  nlohmann::ordered_json j;
  j["generator"] = {{"embedding_dim", generator.embeddingDim},
                    {"hidden_dim", generator.hiddenDim},
                    {"max_len", autoMaxLen ? nlohmann::ordered_json("auto") : nlohmann::ordered_json(generator.maxLen)},
                    {"temperature", generator.temperature}};
  j["token_discriminator"] = {{"embedding_dim", tokenDisc.embeddingDim},
                              {"hidden_dim", tokenDisc.hiddenDim},
                              {"score_mode", scoreModeTag(tokenDisc.mode)}};
  j["sentence_discriminator"] = {{"embedding_dim", sentenceDisc.embeddingDim},
                                 {"kernel_widths", sentenceDisc.kernelWidths},
                                 {"filters_per_width", sentenceDisc.filtersPerWidth},
                                 {"dropout", sentenceDisc.dropout}};
  j["schedule"] = {{"gen_pretrain_epochs", schedule.genPretrainEpochs},
                   {"disc_pretrain_epochs", schedule.discPretrainEpochs},
                   {"adversarial_epochs", schedule.adversarialEpochs},
                   {"gen_updates_per_epoch", schedule.genUpdatesPerEpoch},
                   {"disc_steps_per_epoch", schedule.discStepsPerEpoch},
                   {"batch_size", schedule.batchSize},
                   {"snapshot_every", schedule.snapshotEvery},
                   {"snapshot_samples", schedule.snapshotSamples},
                   {"center_rewards", schedule.centerRewards},
                   {"optimizer", optimizerKindTag(schedule.generatorPretrainOptimizer.kind)},
                   {"gen_pretrain_lr", schedule.generatorPretrainOptimizer.learningRate},
                   {"gen_adversarial_lr", schedule.generatorAdversarialOptimizer.learningRate},
                   {"disc_lr", schedule.discriminatorOptimizer.learningRate}};
  j["reward"] = {{"policy", rewardKindTag(schedule.policy.kind)},
                 {"rollouts", schedule.policy.rollouts},
                 {"sign", signConventionTag(schedule.policy.sign)},
                 {"strict_normalization", schedule.policy.strictNormalization},
                 {"roots", schedule.policy.roots == RolloutRoots::All ? "all" : "final"}};
  j["nlu"] = nlu.toJson();
  j["nlu_resolved"] = nlu.resolved().toJson();
  j["sampling"] = {{"strategy", samplingStrategyTag(sampling)},
                   {"per_domain", perDomain},
                   {"drop_golden_matches", dropGoldenMatches},
                   {"bleu_references", bleuReferencesTag(bleuReferences)}};
  j["embeddings"] = {{"epochs", skipgram.epochs},   {"window", skipgram.window},
                     {"negatives", skipgram.negatives}, {"min_n", skipgram.minN},
                     {"max_n", skipgram.maxN},       {"learning_rate", skipgram.learningRate},
                     {"path", pretrainedEmbeddings}, {"freeze", freezeEmbeddings}};
  j["run"] = {{"seed", seed}, {"repeats", repeats}};
  return j;
}

void applyConfigValue(ExperimentConfig& config, const std::string& key, const std::string& value) {
  const auto& t = setters();
  auto it = t.find(key);
  if (it == t.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second(config, key, value);
}

ExperimentConfig loadConfigIni(const std::filesystem::path& path, ExperimentConfig base) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("cannot read config " + path.string() + ": " + e.message() + " (line " +
                      std::to_string(e.line()) + ")");
  }
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw ConfigError("config " + path.string() + ": key '" + section + "' outside a section");
    for (const auto& [key, leaf] : body) applyConfigValue(base, section + "." + key, leaf.data());
  }
  return base;
}

std::map<std::string, std::vector<AnnotatedUtterance>> groupByDomain(std::span<const AnnotatedUtterance> corpus) {
  std::map<std::string, std::vector<AnnotatedUtterance>> out;
  for (const auto& u : corpus) out[u.domain].push_back(u);
  return out;
}

DomainGan trainDomainGan(std::span<const AnnotatedUtterance> goldens, const ExperimentConfig& config, Rng& rng,
                         const EmbeddingTable* pretrained,
                         std::span<const AnnotatedUtterance> qualityReferences) {
  if (goldens.empty()) throw DataError("GAN training needs at least one golden utterance");
  const auto vocab = Vocabulary::build(goldens);
  GeneratorConfig gc = config.generator;
  if (config.autoMaxLen) gc.maxLen = percentileLength(goldens, 0.99) + 2;

  EncodeOptions enc;
  enc.maxLen = std::numeric_limits<std::size_t>::max();
  std::vector<std::vector<int>> encoded;
  encoded.reserve(goldens.size());
  for (const auto& u : goldens) encoded.push_back(trainingSymbols(encodeSequence(u, vocab, enc)));

  DomainGan out;
  Rng init = rng.split("init");
  out.generator = std::make_unique<GeneratorModel>(vocab, gc, init);
  if (config.schedule.policy.needsTokenDiscriminator())
    out.tokenDisc = std::make_unique<TokenDiscriminator>(vocab.size(), config.tokenDisc, init);
  else
    out.sentenceDisc = std::make_unique<SentenceDiscriminator>(vocab.size(), config.sentenceDisc, init);

  if (pretrained != nullptr && !pretrained->empty()) {
    const auto words = ganRowWords(vocab);
    out.injectedRows = injectPretrained(out.generator->embedding(), words, *pretrained, config.freezeEmbeddings);
    if (out.tokenDisc) injectPretrained(out.tokenDisc->embedding(), words, *pretrained, config.freezeEmbeddings);
    if (out.sentenceDisc)
      injectPretrained(out.sentenceDisc->embedding(), words, *pretrained, config.freezeEmbeddings);
  }

  GanTrainer trainer(*out.generator, out.tokenDisc.get(), out.sentenceDisc.get(), config.schedule,
                     rng.split("train"));
  if (!qualityReferences.empty())
    trainer.setQualityReferences({qualityReferences.begin(), qualityReferences.end()});
  trainer.runPretraining(encoded);
  trainer.runAdversarial(encoded);
  out.log = trainer.log();
  out.counters = trainer.counters();
  return out;
}

Augmentation augment(const std::map<std::string, const GeneratorModel*>& generators,
                     const std::map<std::string, std::vector<AnnotatedUtterance>>& goldens,
                     const std::map<std::string, std::vector<AnnotatedUtterance>>& bleuReferences,
                     const ExperimentConfig& config, const std::string& modelTag, Rng& rng) {
  Augmentation out;
  const auto pool = generatePool(generators, config.perDomain, rng);
  out.rejected = pool.rejected;
  const auto pooled = groupByDomain(pool.utterances);
  for (const auto& [domain, gen] : generators) {
    (void)gen;
    auto g = goldens.find(domain);
    if (g == goldens.end()) throw DataError("no goldens for generator domain '" + domain + "'");
    auto p = pooled.find(domain);
    std::vector<AnnotatedUtterance> candidates;
    if (p != pooled.end()) candidates = p->second;
    if (config.dropGoldenMatches) candidates = dropGoldenMatches(candidates, g->second);
    std::vector<AnnotatedUtterance> selected;
    if (config.perDomain > 0) selected = applySampling(config.sampling, candidates, g->second.size());
    out.syntheticPerDomain[domain] = selected.size();
    if (!candidates.empty()) {
      auto refs = bleuReferences.find(domain);
      const auto& r = refs != bleuReferences.end() && !refs->second.empty() ? refs->second : g->second;
      out.quality.push_back(qualityRow(modelTag, false, domain, candidates, r, g->second.size()));
    }
    out.synthetic.insert(out.synthetic.end(), selected.begin(), selected.end());
  }
  return out;
}

nlohmann::ordered_json ExperimentOutcome::toJson(const ExperimentConfig& config) const {
  nlohmann::ordered_json j;
  j["experiment"] = experiment;
  j["config"] = config.toJson();
  j["baseline"] = baseline.toJson();
  j["treatment"] = treatment.toJson();
  j["control"] = control.toJson();
  j["comparison"] = comparisonJson(treatmentRows);
  j["control_comparison"] = comparisonJson(controlRows);
  auto runsJson = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < runs.size(); ++i) {
    nlohmann::ordered_json r;
    r["repeat"] = i;
    r["synthetic_per_domain"] = runs[i].syntheticPerDomain;
    r["baseline"] = runs[i].baseline.toJson();
    r["treatment"] = runs[i].treatment.toJson();
    r["control"] = runs[i].control.toJson();
    runsJson.push_back(std::move(r));
  }
  j["runs"] = std::move(runsJson);
  return j;
}

ExperimentOutcome runBootstrap(std::span<const AnnotatedUtterance> goldens, std::span<const AnnotatedUtterance> test,
                               const ExperimentConfig& config) {
  config.validate();
  if (goldens.empty()) throw DataError("bootstrap experiment needs goldens");
  if (test.empty()) throw DataError("bootstrap experiment needs a test set");
  const auto byDomain = groupByDomain(goldens);
  std::map<std::string, std::vector<AnnotatedUtterance>> refs;
  if (config.bleuReferences == BleuReferences::Test) refs = groupByDomain(test);
  const Rng root(config.seed);

  auto repeat = [&](std::size_t r) {
    const Rng rep = root.split("repeat").split(r);
    const Rng ganRng = rep.split("gan");
    const Rng nluRng = rep.split("nlu");
    RepeatResult res;
    Augmentation aug;
    // Nothing is sampled at perDomain 0, so the GANs are not trained.
    if (config.perDomain > 0) {
      std::map<std::string, DomainGan> gans;
      std::map<std::string, const GeneratorModel*> gens;
      for (const auto& [domain, data] : byDomain) {
        Rng dr = ganRng.split(domain);
        auto refIt = refs.find(domain);
        std::span<const AnnotatedUtterance> q;
        if (refIt != refs.end()) q = refIt->second;
        auto gan = trainDomainGan(data, config, dr, nullptr, q);
        res.ganLogs[domain] = gan.log.csv();
        gens[domain] = gan.generator.get();
        gans.emplace(domain, std::move(gan));
      }
      Rng sr = ganRng.split("sample");
      aug = augment(gens, byDomain, refs, config, rewardKindTag(config.schedule.policy.kind), sr);
    } else {
      for (const auto& [domain, data] : byDomain) aug.syntheticPerDomain[domain] = 0;
    }
    res.syntheticPerDomain = aug.syntheticPerDomain;
    res.quality = aug.quality;

    std::vector<AnnotatedUtterance> upsampled;
    for (const auto& [domain, data] : byDomain) {
      const auto n = aug.syntheticPerDomain[domain];
      if (n == 0) continue;
      auto extra = upsampleGoldens(data, n);
      upsampled.insert(upsampled.end(), extra.begin(), extra.end());
    }
    res.baseline = trainAndEvaluate(goldens, test, config, nluRng);
    res.treatment = trainAndEvaluate(concat(goldens, aug.synthetic), test, config, nluRng);
    res.control = trainAndEvaluate(concat(goldens, upsampled), test, config, nluRng);
    for (auto* rep2 : {&res.baseline, &res.treatment, &res.control}) rep2->metadata["repeat"] = r;
    return res;
  };
  return summarise("bootstrap", runIndexed(config.repeats, config.jobs, repeat), config);
}

ExperimentOutcome runLowResource(const std::string& lowDomain, std::span<const AnnotatedUtterance> goldens,
                                 std::span<const AnnotatedUtterance> fullTrain,
                                 std::span<const AnnotatedUtterance> test, const ExperimentConfig& config) {
  config.validate();
  std::vector<AnnotatedUtterance> low, robust;
  for (const auto& u : goldens)
    if (u.domain == lowDomain) low.push_back(u);
  for (const auto& u : fullTrain)
    if (u.domain != lowDomain) robust.push_back(u);
  if (low.empty()) throw DataError("no goldens for low-resource domain '" + lowDomain + "'");
  if (robust.empty()) throw DataError("no training data outside the low-resource domain '" + lowDomain + "'");
  if (test.empty()) throw DataError("low-resource experiment needs a test set");

  std::optional<EmbeddingTable> fixedTable;
  if (!config.pretrainedEmbeddings.empty()) fixedTable = loadVectorsText(config.pretrainedEmbeddings);
  SkipgramConfig sg = config.skipgram;
  sg.dim = config.generator.embeddingDim;
  const auto robustWords = wordSequences(robust);

  std::map<std::string, std::vector<AnnotatedUtterance>> lowGoldens{{lowDomain, low}};
  std::map<std::string, std::vector<AnnotatedUtterance>> refs;
  if (config.bleuReferences == BleuReferences::Test) {
    auto all = groupByDomain(test);
    if (all.count(lowDomain)) refs[lowDomain] = all[lowDomain];
  }
  const auto baselineTrain = concat(low, robust);
  const Rng root(config.seed);

  auto repeat = [&](std::size_t r) {
    const Rng rep = root.split("repeat").split(r);
    const Rng ganRng = rep.split("gan");
    const Rng nluRng = rep.split("nlu");
    RepeatResult res;
    Augmentation aug;
    if (config.perDomain > 0) {
      EmbeddingTable table;
      if (fixedTable) {
        table = *fixedTable;
      } else {
        Rng er = ganRng.split("embeddings");
        table = trainSubwordSkipgram(robustWords, sg, er).table();
      }
      Rng dr = ganRng.split(lowDomain);
      std::span<const AnnotatedUtterance> q;
      if (refs.count(lowDomain)) q = refs.at(lowDomain);
      auto gan = trainDomainGan(low, config, dr, &table, q);
      res.ganLogs[lowDomain] = gan.log.csv();
      std::map<std::string, const GeneratorModel*> gens{{lowDomain, gan.generator.get()}};
      Rng sr = ganRng.split("sample");
      aug = augment(gens, lowGoldens, refs, config, rewardKindTag(config.schedule.policy.kind), sr);
      for (auto& row : aug.quality) row.pretrainedEmbeddings = true;
    } else {
      aug.syntheticPerDomain[lowDomain] = 0;
    }
    res.syntheticPerDomain = aug.syntheticPerDomain;
    res.quality = aug.quality;
    const auto n = aug.syntheticPerDomain[lowDomain];
    const auto upsampled = n > 0 ? upsampleGoldens(low, n) : std::vector<AnnotatedUtterance>{};
    res.baseline = trainAndEvaluate(baselineTrain, test, config, nluRng);
    res.treatment = trainAndEvaluate(concat(baselineTrain, aug.synthetic), test, config, nluRng);
    res.control = trainAndEvaluate(concat(baselineTrain, upsampled), test, config, nluRng);
    for (auto* rep2 : {&res.baseline, &res.treatment, &res.control}) {
      rep2->metadata["repeat"] = r;
      rep2->metadata["low_domain"] = lowDomain;
    }
    return res;
  };
  auto out = summarise("lowresource", runIndexed(config.repeats, config.jobs, repeat), config);
  for (auto* rep : {&out.baseline, &out.treatment, &out.control}) rep->metadata["low_domain"] = lowDomain;
  return out;
}

// ---------------------------------------------------------------------------

std::string sha256File(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string() + " for hashing");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
    throw NumericalError("SHA-256 initialisation failed");
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

std::string versionString() { return NLUAUG_VERSION; }

void RunManifest::auditTestIsolation() const {
  namespace fs = std::filesystem;
  for (const auto& t : trainingInputs) {
    for (const auto& e : evaluationInputs) {
      std::error_code ec;
      const bool same = fs::exists(t) && fs::exists(e) && fs::equivalent(t, e, ec);
      if (same || (fs::exists(t) && fs::exists(e) && sha256File(t) == sha256File(e)))
        throw ConfigError("test isolation violated: training input " + t.string() + " is the evaluation input " +
                          e.string());
    }
  }
}

nlohmann::ordered_json RunManifest::toJson() const {
  auto files = [](const std::vector<std::filesystem::path>& paths, bool hash) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& p : paths) {
      nlohmann::ordered_json f;
      f["path"] = p.string();
      if (hash && std::filesystem::is_regular_file(p)) f["sha256"] = sha256File(p);
      arr.push_back(std::move(f));
    }
    return arr;
  };
  nlohmann::ordered_json j;
  j["command"] = command;
  j["version"] = versionString();
  j["seed"] = seed;
  j["training_inputs"] = files(trainingInputs, true);
  j["evaluation_inputs"] = files(evaluationInputs, true);
  j["outputs"] = files(outputs, true);
  j["test_isolation"] = "audited";
  j["config"] = config;
  return j;
}

void RunManifest::write(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << toJson().dump(2) << '\n';
}

}  // namespace nluaug
