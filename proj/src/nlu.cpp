#include "nluaug/nlu.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <tuple>

#include "nluaug/error.hpp"

namespace nluaug {

namespace {

constexpr int kCharPad = 256;
constexpr std::size_t kCharRows = 257;

std::size_t scaleDim(std::size_t d, double s) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(d) * s)));
}

}  // namespace

JointModelConfig JointModelConfig::resolved() const {
  JointModelConfig c = *this;
  if (fullScale) return c;
  c.wordEmbDim = scaleDim(wordEmbDim, deskScale);
  c.charEmbDim = scaleDim(charEmbDim, deskScale);
  c.encoderHidden = scaleDim(encoderHidden, deskScale);
  c.icHidden = scaleDim(icHidden, deskScale);
  c.nerHidden = scaleDim(nerHidden, deskScale);
  c.icnerEpochs = scaleDim(icnerEpochs, epochScale);
  c.dcEpochs = scaleDim(dcEpochs, epochScale);
  c.deskScale = 1.0;
  c.epochScale = 1.0;
  c.fullScale = true;
  return c;
}

void JointModelConfig::validate() const {
  for (auto [name, v] : {std::pair{"word_emb_dim", wordEmbDim}, {"char_emb_dim", charEmbDim},
                         {"char_kernel", charKernel}, {"encoder_layers", encoderLayers},
                         {"encoder_hidden", encoderHidden}, {"ic_hidden", icHidden},
                         {"ner_hidden", nerHidden}, {"batch_size", batchSize}})
    if (v < 1) throw ConfigError(std::string("NLU ") + name + " must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("NLU dropout must be in [0, 1)");
  if (deskScale <= 0.0 || epochScale <= 0.0) throw ConfigError("NLU scale multipliers must be positive");
}

nlohmann::ordered_json JointModelConfig::toJson() const {
  return {{"word_emb_dim", wordEmbDim},   {"char_emb_dim", charEmbDim},
          {"char_kernel", charKernel},    {"encoder_layers", encoderLayers},
          {"encoder_hidden", encoderHidden}, {"ic_hidden", icHidden},
          {"ner_hidden", nerHidden},      {"dropout", dropout},
          {"icner_epochs", icnerEpochs},  {"dc_epochs", dcEpochs},
          {"batch_size", batchSize},      {"learning_rate", optimizer.learningRate},
          {"desk_scale", deskScale},      {"epoch_scale", epochScale},
          {"full_scale", fullScale}};
}

JointModel::JointModel(std::vector<std::string> classes, std::vector<std::string> slotLabels,
                       bool withTagger, std::vector<std::string> words, const JointModelConfig& config,
                       Rng& initRng)
    : config_(config), classes_(std::move(classes)), hasTagger_(withTagger) {
  config_.validate();
  if (classes_.empty()) throw DataError("NLU model needs at least one class");
  for (std::size_t i = 0; i < classes_.size(); ++i) classIndex_[classes_[i]] = static_cast<int>(i);
  if (hasTagger_) {
    tags_.push_back("O");
    std::sort(slotLabels.begin(), slotLabels.end());
    slotLabels.erase(std::unique(slotLabels.begin(), slotLabels.end()), slotLabels.end());
    for (const auto& l : slotLabels) {
      tags_.push_back("B-" + l);
      tags_.push_back("I-" + l);
    }
    for (std::size_t i = 0; i < tags_.size(); ++i) tagIndex_[tags_[i]] = static_cast<int>(i);
  }
  words_.push_back("<unk>");
  for (auto& w : words)
    if (w != "<unk>" && wordIndex_.find(w) == wordIndex_.end()) {
      wordIndex_[w] = static_cast<int>(words_.size());
      words_.push_back(std::move(w));
    }
  wordIndex_["<unk>"] = 0;

  Rng rng = initRng.split("nlu");
  const auto& c = config_;
  wordEmbedding_ = &params_.add("nlu.word_embedding", uniformTable(words_.size(), c.wordEmbDim, 0.1, rng));
  charEmbedding_ = &params_.add("nlu.char_embedding", uniformTable(kCharRows, c.charEmbDim, 0.1, rng));
  charConvWeight_ = &params_.add("nlu.char_conv.weight",
                                 xavierUniform(c.charKernel * c.charEmbDim, c.charEmbDim, rng));
  charConvBias_ = &params_.add("nlu.char_conv.bias", Tensor::matrix(1, c.charEmbDim));
  std::size_t in = c.wordEmbDim + c.charEmbDim;
  for (std::size_t l = 0; l < c.encoderLayers; ++l) {
    const std::string p = "nlu.encoder." + std::to_string(l);
    EncoderLayer layer;
    layer.forward = Lstm::create(params_, p + ".fwd", in, c.encoderHidden, rng);
    layer.backward = Lstm::create(params_, p + ".bwd", in, c.encoderHidden, rng);
    layer.gain = &params_.add(p + ".norm.gain", Tensor::matrix(1, 2 * c.encoderHidden, 1.0));
    layer.bias = &params_.add(p + ".norm.bias", Tensor::matrix(1, 2 * c.encoderHidden));
    encoder_.push_back(layer);
    in = 2 * c.encoderHidden;
  }
  icHidden_ = Dense::create(params_, "nlu.ic.hidden", in, c.icHidden, rng);
  icOut_ = Dense::create(params_, "nlu.ic.output", c.icHidden, classes_.size(), rng);
  if (hasTagger_) {
    nerHidden_ = Dense::create(params_, "nlu.ner.hidden", in, c.nerHidden, rng);
    nerOut_ = Dense::create(params_, "nlu.ner.output", c.nerHidden, tags_.size(), rng);
    crf_ = CrfLayer::create(params_, "nlu.crf", tags_.size());
  }
}

int JointModel::classId(const std::string& label) const {
  auto it = classIndex_.find(label);
  if (it == classIndex_.end()) throw DataError("unknown class '" + label + "'");
  return it->second;
}

std::vector<int> JointModel::tagIds(const AnnotatedUtterance& u) const {
  std::vector<int> out(u.tokens.size(), 0);
  for (const auto& s : u.slots) {
    auto b = tagIndex_.find("B-" + s.label);
    auto i = tagIndex_.find("I-" + s.label);
    if (b == tagIndex_.end() || i == tagIndex_.end())
      throw DataError("slot label '" + s.label + "' is not in the tag set of this model");
    out[s.start] = b->second;
    for (std::size_t t = s.start + 1; t <= s.end; ++t) out[t] = i->second;
  }
  return out;
}

std::vector<SlotSpan> JointModel::spansFromTags(std::span<const int> tags) const {
  std::vector<SlotSpan> out;
  bool open = false;
  for (std::size_t t = 0; t < tags.size(); ++t) {
    const std::string& tag = tags_.at(static_cast<std::size_t>(tags[t]));
    if (tag == "O") {
      open = false;
      continue;
    }
    const std::string label = tag.substr(2);
    if (tag[0] == 'I' && open && out.back().label == label) {
      out.back().end = t;
    } else {
      out.push_back({t, t, label});
      open = true;
    }
  }
  return out;
}

JointModel::Encoded JointModel::encode(Graph& g, std::span<const std::string> tokens) const {
  if (tokens.empty()) throw DataError("cannot encode an empty utterance");
  std::vector<int> wordIds;
  for (const auto& w : tokens) {
    auto it = wordIndex_.find(w);
    wordIds.push_back(it == wordIndex_.end() ? 0 : it->second);
  }
  Var words = embedLookup(g, *wordEmbedding_, wordIds);

  const Var cw = g.param(*charConvWeight_), cb = g.param(*charConvBias_);
  std::vector<Var> charRows;
  for (const auto& w : tokens) {
    std::vector<int> ids;
    for (unsigned char ch : w) ids.push_back(ch);
    while (ids.size() < config_.charKernel) ids.push_back(kCharPad);
    Var chars = embedLookup(g, *charEmbedding_, ids);
    charRows.push_back(maxPoolOverTime(tanh(conv1d(chars, cw, cb, config_.charKernel))));
  }
  Var charFeatures = dropoutMask(concat(charRows, 0), config_.dropout);

  Var x = dropoutMask(concat({words, charFeatures}, 1), config_.dropout);
  for (const auto& layer : encoder_) {
    Var h = concat({layer.forward.run(g, x), layer.backward.run(g, x, true)}, 1);
    h = layerNorm(h, g.param(*layer.gain), g.param(*layer.bias));
    x = dropoutMask(h, config_.dropout);
  }
  return {x, maxPoolOverTime(x)};
}

Var JointModel::classLogits(Graph& g, Var pooled) const {
  return icOut_(g, dropoutMask(elu(icHidden_(g, pooled)), config_.dropout));
}

Var JointModel::emissionScores(Graph& g, Var tokens) const {
  return nerOut_(g, dropoutMask(elu(nerHidden_(g, tokens)), config_.dropout));
}

Var JointModel::loss(Graph& g, std::span<const std::string> tokens, int classId,
                     std::span<const int> tags) const {
  const auto enc = encode(g, tokens);
  const int cls[] = {classId};
  Var loss = scale(pick(logSoftmax(classLogits(g, enc.pooled)), cls), -1.0);
  if (hasTagger_) {
    if (tags.size() != tokens.size()) throw ShapeError("tag sequence length differs from token count");
    loss = add(loss, crfNegLogLikelihood(emissionScores(g, enc.tokens), g.param(*crf_.transitions), tags));
  }
  return loss;
}

Tensor JointModel::emissions(std::span<const std::string> tokens) const {
  Graph g(false);
  return emissionScores(g, encode(g, tokens).tokens).value();
}

JointModel::Prediction JointModel::predict(std::span<const std::string> tokens) const {
  Graph g(false);
  const auto enc = encode(g, tokens);
  const Tensor& logits = classLogits(g, enc.pooled).value();
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.cols(); ++i)
    if (logits(0, i) > logits(0, best)) best = i;
  Prediction p;
  p.label = classes_[best];
  if (hasTagger_) {
    const auto path = viterbiDecode(emissionScores(g, enc.tokens).value(), crf_.transitions->value).path;
    p.slots = spansFromTags(path);
  }
  return p;
}

namespace {

struct Example {
  const std::vector<std::string>* tokens;
  int cls;
  std::vector<int> tags;
};

void fit(JointModel& model, std::vector<Example> data, std::size_t epochs, const JointModelConfig& config,
         Rng& rng, TrainingReport* report) {
  Optimizer opt(config.optimizer);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t e = 0; e < epochs; ++e) {
    Rng epochRng = rng.split("epoch").split(e);
    epochRng.shuffle(order.begin(), order.end());
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batchSize) {
      const std::size_t end = std::min(order.size(), start + config.batchSize);
      const double inv = 1.0 / static_cast<double>(end - start);
      for (std::size_t i = start; i < end; ++i) {
        const auto& ex = data[order[i]];
        Graph g(true, &epochRng);
        Var l = model.loss(g, *ex.tokens, ex.cls, ex.tags);
        total += l.value().item();
        g.backward(scale(l, inv));
      }
      opt.step(model.params());
    }
    if (report) report->epochLoss.push_back(total / static_cast<double>(data.size()));
  }
}

std::vector<std::string> vocabularyOf(std::span<const AnnotatedUtterance> train) {
  std::set<std::string> words;
  for (const auto& u : train) words.insert(u.tokens.begin(), u.tokens.end());
  return {words.begin(), words.end()};
}

}  // namespace

JointModel trainJointICNER(std::span<const AnnotatedUtterance> train, const JointModelConfig& config,
                           Rng& rng, TrainingReport* report) {
  if (train.empty()) throw DataError("joint IC/NER training set is empty");
  const auto cfg = config.resolved();
  std::set<std::string> intents, labels;
  for (const auto& u : train) {
    if (u.domain != train.front().domain)
      throw DataError("joint IC/NER training data mixes domains '" + train.front().domain + "' and '" +
                      u.domain + "'");
    u.validate();
    intents.insert(u.intent);
    for (const auto& s : u.slots) labels.insert(s.label);
  }
  Rng initRng = rng.split("init");
  JointModel model({intents.begin(), intents.end()}, {labels.begin(), labels.end()}, true,
                   vocabularyOf(train), cfg, initRng);
  std::vector<Example> data;
  for (const auto& u : train) data.push_back({&u.tokens, model.classId(u.intent), model.tagIds(u)});
  Rng fitRng = rng.split("fit");
  fit(model, std::move(data), cfg.icnerEpochs, cfg, fitRng, report);
  return model;
}

JointModel trainDomainClassifier(std::span<const AnnotatedUtterance> train, const JointModelConfig& config,
                                 Rng& rng, TrainingReport* report) {
  if (train.empty()) throw DataError("domain classifier training set is empty");
  const auto cfg = config.resolved();
  std::set<std::string> domains;
  for (const auto& u : train) domains.insert(u.domain);
  Rng initRng = rng.split("init");
  JointModel model({domains.begin(), domains.end()}, {}, false, vocabularyOf(train), cfg, initRng);
  std::vector<Example> data;
  for (const auto& u : train) data.push_back({&u.tokens, model.classId(u.domain), {}});
  Rng fitRng = rng.split("fit");
  fit(model, std::move(data), cfg.dcEpochs, cfg, fitRng, report);
  return model;
}

NluSystem trainNluSystem(std::span<const AnnotatedUtterance> train, const JointModelConfig& config,
                         Rng& rng) {
  NluSystem sys;
  Rng dcRng = rng.split("domain-classifier");
  sys.domainClassifier = std::make_unique<JointModel>(trainDomainClassifier(train, config, dcRng));
  std::map<std::string, std::vector<AnnotatedUtterance>> byDomain;
  for (const auto& u : train) byDomain[u.domain].push_back(u);
  for (const auto& [domain, data] : byDomain) {
    Rng jRng = rng.split("joint").split(domain);
    sys.joint.emplace(domain, trainJointICNER(data, config, jRng));
  }
  return sys;
}

FramePrediction predictFrame(const NluSystem& system, std::span<const std::string> tokens) {
  FramePrediction f;
  f.domain = system.domainClassifier->predict(tokens).label;
  auto it = system.joint.find(f.domain);
  if (it == system.joint.end()) return f;
  auto p = it->second.predict(tokens);
  f.intent = std::move(p.label);
  f.slots = std::move(p.slots);
  return f;
}

double microF1(std::size_t tp, std::size_t fp, std::size_t fn) {
  if (tp + fp + fn == 0) return 1.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

ExperimentReport ExperimentReport::fromCounts(std::map<std::string, DomainCounts> counts) {
  ExperimentReport r;
  DomainCounts all;
  for (const auto& [d, c] : counts) {
    all.utterances += c.utterances;
    all.domainCorrect += c.domainCorrect;
    all.intentCorrect += c.intentCorrect;
    all.frameCorrect += c.frameCorrect;
    all.slotTp += c.slotTp;
    all.slotFp += c.slotFp;
    all.slotFn += c.slotFn;
    r.intentAccuracy[d] = c.utterances ? static_cast<double>(c.intentCorrect) / static_cast<double>(c.utterances) : 0.0;
    r.slotF1[d] = microF1(c.slotTp, c.slotFp, c.slotFn);
  }
  const double n = static_cast<double>(all.utterances);
  if (all.utterances) {
    r.domainAccuracy = static_cast<double>(all.domainCorrect) / n;
    r.overallIntentAccuracy = static_cast<double>(all.intentCorrect) / n;
    r.frameAccuracy = static_cast<double>(all.frameCorrect) / n;
  }
  r.overallSlotF1 = microF1(all.slotTp, all.slotFp, all.slotFn);
  r.counts = std::move(counts);
  return r;
}

nlohmann::ordered_json ExperimentReport::toJson() const {
  nlohmann::ordered_json j;
  j["domain_accuracy"] = domainAccuracy;
  j["intent_accuracy"] = intentAccuracy;
  j["overall_intent_accuracy"] = overallIntentAccuracy;
  j["slot_f1"] = slotF1;
  j["overall_slot_f1"] = overallSlotF1;
  j["frame_accuracy"] = frameAccuracy;
  auto& c = j["counts"] = nlohmann::ordered_json::object();
  for (const auto& [d, k] : counts)
    c[d] = {{"utterances", k.utterances}, {"domain_correct", k.domainCorrect},
            {"intent_correct", k.intentCorrect}, {"frame_correct", k.frameCorrect},
            {"slot_tp", k.slotTp}, {"slot_fp", k.slotFp}, {"slot_fn", k.slotFn}};
  j["metadata"] = metadata;
  return j;
}

ExperimentReport scoreFrames(std::span<const AnnotatedUtterance> gold,
                             std::span<const FramePrediction> predicted) {
  if (gold.size() != predicted.size())
    throw ShapeError("scoreFrames: " + std::to_string(gold.size()) + " gold utterances but " +
                     std::to_string(predicted.size()) + " predictions");
  using Key = std::tuple<std::size_t, std::size_t, std::string>;
  std::map<std::string, DomainCounts> counts;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const auto& u = gold[i];
    const auto& p = predicted[i];
    auto& c = counts[u.domain];
    ++c.utterances;
    const bool domainOk = p.domain == u.domain;
    const bool intentOk = domainOk && p.intent == u.intent;
    std::set<Key> g, q;
    for (const auto& s : u.slots) g.emplace(s.start, s.end, s.label);
    for (const auto& s : p.slots) q.emplace(s.start, s.end, s.label);
    std::size_t tp = 0;
    for (const auto& k : q) tp += g.count(k);
    const std::size_t fp = q.size() - tp, fn = g.size() - tp;
    c.domainCorrect += domainOk;
    c.intentCorrect += intentOk;
    c.frameCorrect += intentOk && fp == 0 && fn == 0;
    c.slotTp += tp;
    c.slotFp += fp;
    c.slotFn += fn;
  }
  return ExperimentReport::fromCounts(std::move(counts));
}

ExperimentReport evaluate(const NluSystem& system, std::span<const AnnotatedUtterance> test) {
  std::vector<FramePrediction> preds;
  preds.reserve(test.size());
  for (const auto& u : test) preds.push_back(predictFrame(system, u.tokens));
  return scoreFrames(test, preds);
}

ExperimentReport averageReports(std::span<const ExperimentReport> runs) {
  if (runs.empty()) throw ConfigError("cannot average zero reports");
  std::map<std::string, DomainCounts> counts;
  for (const auto& r : runs)
    for (const auto& [d, c] : r.counts) {
      auto& t = counts[d];
      t.utterances += c.utterances;
      t.domainCorrect += c.domainCorrect;
      t.intentCorrect += c.intentCorrect;
      t.frameCorrect += c.frameCorrect;
      t.slotTp += c.slotTp;
      t.slotFp += c.slotFp;
      t.slotFn += c.slotFn;
    }
  ExperimentReport out;
  out.counts = std::move(counts);
  const double n = static_cast<double>(runs.size());
  for (const auto& r : runs) {
    out.domainAccuracy += r.domainAccuracy / n;
    out.overallIntentAccuracy += r.overallIntentAccuracy / n;
    out.overallSlotF1 += r.overallSlotF1 / n;
    out.frameAccuracy += r.frameAccuracy / n;
    for (const auto& [d, v] : r.intentAccuracy) out.intentAccuracy[d] += v / n;
    for (const auto& [d, v] : r.slotF1) out.slotF1[d] += v / n;
  }
  out.metadata = runs.front().metadata;
  out.metadata["repeats"] = runs.size();
  return out;
}

std::vector<ComparisonRow> compareReports(const ExperimentReport& baseline, const ExperimentReport& treatment) {
  std::vector<ComparisonRow> rows;
  auto row = [&](std::string metric, std::string domain, double b, double t) {
    ComparisonRow r{std::move(metric), std::move(domain), 100.0 * b, 100.0 * t, 0.0};
    r.percentChange = b != 0.0 ? 100.0 * (t - b) / b : 0.0;
    rows.push_back(std::move(r));
  };
  auto at = [](const std::map<std::string, double>& m, const std::string& d) {
    auto it = m.find(d);
    return it == m.end() ? 0.0 : it->second;
  };
  std::set<std::string> domains;
  for (const auto& [d, v] : baseline.intentAccuracy) domains.insert(d);
  for (const auto& [d, v] : treatment.intentAccuracy) domains.insert(d);
  row("Domain accuracy", "", baseline.domainAccuracy, treatment.domainAccuracy);
  for (const auto& d : domains) row("Intent accuracy", d, at(baseline.intentAccuracy, d), at(treatment.intentAccuracy, d));
  row("Overall intent accuracy", "", baseline.overallIntentAccuracy, treatment.overallIntentAccuracy);
  for (const auto& d : domains) row("Slot F1", d, at(baseline.slotF1, d), at(treatment.slotF1, d));
  row("Overall slot F1", "", baseline.overallSlotF1, treatment.overallSlotF1);
  row("Overall frame accuracy", "", baseline.frameAccuracy, treatment.frameAccuracy);
  return rows;
}

std::string comparisonCsv(std::span<const ComparisonRow> rows) {
  std::string out = "metric,domain,baseline,treatment,percent_change\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, ",%.2f,%.2f,%+.2f\n", r.baseline, r.treatment, r.percentChange);
    out += r.metric + "," + r.domain + buf;
  }
  return out;
}

nlohmann::ordered_json comparisonJson(std::span<const ComparisonRow> rows) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : rows)
    arr.push_back({{"metric", r.metric},
                   {"domain", r.domain},
                   {"baseline", r.baseline},
                   {"treatment", r.treatment},
                   {"percent_change", r.percentChange}});
  return arr;
}

}  // namespace nluaug
