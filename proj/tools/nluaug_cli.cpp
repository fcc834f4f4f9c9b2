// Command-line front-end: data preparation, GAN training, generation and the
// two augmentation experiments.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nluaug/corpus.hpp"
#include "nluaug/error.hpp"
#include "nluaug/experiments.hpp"

namespace fs = std::filesystem;
using namespace nluaug;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

struct CommonOptions {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::optional<std::size_t> repeats;
  std::optional<std::string> policy;
  std::optional<std::size_t> rollouts;
  std::optional<std::string> sampling;
  std::optional<std::size_t> perDomain;
};

void addCommon(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "INI config file")->check(CLI::ExistingFile);
  cmd->add_option("--set", o.overrides, "Config override section.key=value (repeatable)");
  cmd->add_option("--seed", o.seed, "Random seed");
}

ExperimentConfig resolveConfig(const CommonOptions& o) {
  ExperimentConfig c;
  if (!o.config.empty()) c = loadConfigIni(o.config, c);
  for (const auto& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects section.key=value, got '" + kv + "'");
    applyConfigValue(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (o.seed) c.seed = *o.seed;
  if (o.jobs) c.jobs = *o.jobs;
  if (o.repeats) c.repeats = *o.repeats;
  if (o.policy) c.schedule.policy.kind = parseRewardKind(*o.policy);
  if (o.rollouts) c.schedule.policy.rollouts = *o.rollouts;
  if (o.sampling) c.sampling = parseSamplingStrategy(*o.sampling);
  if (o.perDomain) c.perDomain = *o.perDomain;
  c.validate();
  return c;
}

std::vector<AnnotatedUtterance> readCorpus(const fs::path& p) {
  auto data = readJsonl(p);
  if (data.empty()) throw DataError(p.string() + " contains no utterances");
  return data;
}

void writeText(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  if (!out) throw DataError("cannot write " + p.string());
  out << text;
}

std::string safeName(const std::string& domain) {
  std::string out;
  for (char ch : domain) out.push_back(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' ? ch : '_');
  return out;
}

std::string qualityCsv(const std::vector<QualityRow>& rows) {
  std::string s = qualityCsvHeader() + "\n";
  for (const auto& r : rows) s += qualityCsvRow(r) + "\n";
  return s;
}

// ---------------------------------------------------------------------------

struct PrepareOptions {
  std::string input, validation, test, format = "jsonl", out, key = "annotated";
  double goldenFraction = 0.20;
  bool skipMalformed = false;
};

int runPrepare(const PrepareOptions& o) {
  ParseOptions po;
  po.skipMalformed = o.skipMalformed;
  const auto format = parseSourceFormat(o.format);
  auto train = parseSourceDataset(o.input, format, po);
  if (!o.validation.empty()) {
    auto val = parseSourceDataset(o.validation, format, po);
    train.utterances.insert(train.utterances.end(), val.utterances.begin(), val.utterances.end());
    train.problems.insert(train.problems.end(), val.problems.begin(), val.problems.end());
  }
  if (train.utterances.empty()) throw DataError("no utterances in " + o.input);
  FrequencyKey key;
  if (o.key == "annotated") key = FrequencyKey::AnnotatedString;
  else if (o.key == "raw") key = FrequencyKey::RawText;
  else throw ConfigError("--key expects annotated or raw");

  auto split = selectPseudoGoldens(train.utterances, o.goldenFraction, key);
  if (!o.test.empty()) split.test = parseSourceDataset(o.test, format, po).utterances;

  fs::create_directories(o.out);
  const fs::path out(o.out);
  writeJsonl(out / "goldens.jsonl", split.pseudoGoldens);
  writeJsonl(out / "rare.jsonl", split.rare);
  writeJsonl(out / "test.jsonl", split.test);
  const auto counts = splitCountsCsv(splitCounts(split));
  writeText(out / "counts.csv", counts);
  std::cout << counts;
  for (const auto& w : split.warnings) std::cerr << "warning: " << w << '\n';
  for (const auto& p : train.problems) std::cerr << "skipped: " << p << '\n';

  RunManifest m;
  m.command = "prepare";
  m.trainingInputs = {o.input};
  if (!o.validation.empty()) m.trainingInputs.push_back(o.validation);
  if (!o.test.empty()) m.evaluationInputs = {o.test};
  m.outputs = {out / "goldens.jsonl", out / "rare.jsonl", out / "test.jsonl", out / "counts.csv"};
  m.config = {{"format", o.format}, {"golden_fraction", o.goldenFraction}, {"key", o.key}};
  m.auditTestIsolation();
  m.write(out / "MANIFEST.json");
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainGanOptions {
  std::string goldens, out, embeddings, references, domain;
};

int runTrainGan(const TrainGanOptions& o, const ExperimentConfig& c) {
  const auto goldens = readCorpus(o.goldens);
  std::optional<EmbeddingTable> table;
  if (!o.embeddings.empty()) table = loadVectorsText(o.embeddings);
  std::map<std::string, std::vector<AnnotatedUtterance>> refs;
  if (!o.references.empty()) refs = groupByDomain(readCorpus(o.references));

  const fs::path out(o.out);
  RunManifest m;
  m.command = "train-gan";
  m.seed = c.seed;
  m.trainingInputs = {o.goldens};
  if (!o.embeddings.empty()) m.trainingInputs.push_back(o.embeddings);
  if (!o.references.empty()) m.evaluationInputs = {o.references};
  m.auditTestIsolation();

  const Rng root(c.seed);
  for (const auto& [domain, data] : groupByDomain(goldens)) {
    if (!o.domain.empty() && domain != o.domain) continue;
    Rng rng = root.split("gan").split(domain);
    std::span<const AnnotatedUtterance> q;
    if (refs.count(domain)) q = refs.at(domain);
    auto gan = trainDomainGan(data, c, rng, table ? &*table : nullptr, q);
    const auto dir = out / safeName(domain);
    fs::create_directories(dir);
    gan.generator->save(dir / "generator");
    if (gan.tokenDisc) gan.tokenDisc->params().save(dir / "token_discriminator.params");
    if (gan.sentenceDisc) gan.sentenceDisc->params().save(dir / "sentence_discriminator.params");
    writeText(dir / "trainlog.csv", gan.log.csv());
    m.outputs.push_back(dir / "trainlog.csv");
    std::cout << domain << ": " << data.size() << " goldens, " << gan.counters.generatorUpdates
              << " generator updates, " << gan.counters.discriminatorSteps << " discriminator steps";
    if (table) std::cout << ", " << gan.injectedRows << " embedding rows injected";
    std::cout << '\n';
  }
  if (m.outputs.empty()) throw DataError("no goldens for domain '" + o.domain + "'");
  m.config = c.toJson();
  m.write(out / "MANIFEST.json");
  return 0;
}

// ---------------------------------------------------------------------------

struct GenerateOptions {
  std::string checkpoint, goldens, out, references, model = "gan";
};

int runGenerate(const GenerateOptions& o, const ExperimentConfig& c) {
  const auto goldens = groupByDomain(readCorpus(o.goldens));
  std::map<std::string, std::vector<AnnotatedUtterance>> refs;
  if (!o.references.empty()) refs = groupByDomain(readCorpus(o.references));
  std::vector<GeneratorModel> models;
  std::vector<std::string> domains;
  for (const auto& [domain, data] : goldens) {
    const auto dir = fs::path(o.checkpoint) / safeName(domain) / "generator";
    if (!fs::exists(dir)) throw DataError("no generator checkpoint for domain '" + domain + "' at " + dir.string());
    models.push_back(GeneratorModel::load(dir));
    domains.push_back(domain);
  }
  std::map<std::string, const GeneratorModel*> gens;
  for (std::size_t i = 0; i < models.size(); ++i) gens[domains[i]] = &models[i];

  Rng rng = Rng(c.seed).split("generate");
  const auto aug = augment(gens, goldens, refs, c, o.model, rng);
  const fs::path out(o.out);
  fs::create_directories(out.parent_path().empty() ? fs::path(".") : out.parent_path());
  writeJsonl(out, aug.synthetic);
  const auto qpath = fs::path(out).replace_extension(".quality.csv");
  writeText(qpath, qualityCsv(aug.quality));
  std::cout << qualityCsv(aug.quality);
  for (const auto& [d, n] : aug.syntheticPerDomain)
    std::cout << d << ": " << n << " synthetic (" << aug.rejected.at(d) << " undecodable draws)\n";

  RunManifest m;
  m.command = "generate";
  m.seed = c.seed;
  m.trainingInputs = {o.goldens};
  if (!o.references.empty()) m.evaluationInputs = {o.references};
  m.outputs = {out, qpath};
  m.config = c.toJson();
  m.auditTestIsolation();
  m.write(fs::path(out).replace_extension(".manifest.json"));
  return 0;
}

// ---------------------------------------------------------------------------

void writeOutcome(const fs::path& out, const ExperimentOutcome& r, const ExperimentConfig& c, RunManifest& m) {
  fs::create_directories(out);
  writeText(out / "report.json", r.toJson(c).dump(2) + "\n");
  writeText(out / "comparison.csv", comparisonCsv(r.treatmentRows));
  writeText(out / "control_comparison.csv", comparisonCsv(r.controlRows));
  std::vector<QualityRow> quality;
  for (std::size_t i = 0; i < r.runs.size(); ++i) {
    quality.insert(quality.end(), r.runs[i].quality.begin(), r.runs[i].quality.end());
    for (const auto& [domain, log] : r.runs[i].ganLogs) {
      const auto p = out / ("trainlog_" + safeName(domain) + "_run" + std::to_string(i) + ".csv");
      writeText(p, log);
      m.outputs.push_back(p);
    }
  }
  writeText(out / "quality.csv", qualityCsv(quality));
  m.outputs.insert(m.outputs.begin(), {out / "report.json", out / "comparison.csv",
                                       out / "control_comparison.csv", out / "quality.csv"});
  m.config = c.toJson();
  m.write(out / "MANIFEST.json");
  std::cout << "treatment vs baseline\n" << comparisonCsv(r.treatmentRows);
  std::cout << "upsampled control vs baseline\n" << comparisonCsv(r.controlRows);
}

struct ExperimentOptions {
  std::string goldens, test, out, lowDomain, fullTrain;
};

int runBootstrapCmd(const ExperimentOptions& o, const ExperimentConfig& c) {
  RunManifest m;
  m.command = "experiment-bootstrap";
  m.seed = c.seed;
  m.trainingInputs = {o.goldens};
  m.evaluationInputs = {o.test};
  m.auditTestIsolation();
  const auto outcome = runBootstrap(readCorpus(o.goldens), readCorpus(o.test), c);
  writeOutcome(o.out, outcome, c, m);
  return 0;
}

int runLowResourceCmd(const ExperimentOptions& o, const ExperimentConfig& c) {
  RunManifest m;
  m.command = "experiment-lowresource";
  m.seed = c.seed;
  m.trainingInputs = {o.goldens, o.fullTrain};
  if (!c.pretrainedEmbeddings.empty()) m.trainingInputs.push_back(c.pretrainedEmbeddings);
  m.evaluationInputs = {o.test};
  m.auditTestIsolation();
  const auto outcome =
      runLowResource(o.lowDomain, readCorpus(o.goldens), readCorpus(o.fullTrain), readCorpus(o.test), c);
  writeOutcome(o.out, outcome, c, m);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SeqGAN data augmentation for NLU"};
  app.require_subcommand(1);
  app.set_version_flag("--version", versionString());

  PrepareOptions prep;
  auto* prepare = app.add_subcommand("prepare", "Merge train+validation, split pseudo goldens and rare utterances");
  prepare->add_option("--input", prep.input, "Training split")->required()->check(CLI::ExistingFile);
  prepare->add_option("--validation", prep.validation, "Validation split merged into training")->check(CLI::ExistingFile);
  prepare->add_option("--test", prep.test, "Test split, copied untouched")->check(CLI::ExistingFile);
  prepare->add_option("--format", prep.format, "tsv or jsonl")->check(CLI::IsMember({"tsv", "jsonl"}));
  prepare->add_option("--out", prep.out, "Output directory")->required();
  prepare->add_option("--golden-fraction", prep.goldenFraction, "Share of each intent group taken as goldens")
      ->check(CLI::Range(0.0, 1.0));
  prepare->add_option("--key", prep.key, "Frequency key: annotated or raw")->check(CLI::IsMember({"annotated", "raw"}));
  prepare->add_flag("--skip-malformed", prep.skipMalformed, "Skip malformed records instead of failing");

  CommonOptions ganCommon;
  TrainGanOptions gan;
  auto* trainGan = app.add_subcommand("train-gan", "Train one SeqGAN per domain on the goldens");
  addCommon(trainGan, ganCommon);
  trainGan->add_option("--goldens", gan.goldens)->required()->check(CLI::ExistingFile);
  trainGan->add_option("--out", gan.out, "Checkpoint directory")->required();
  trainGan->add_option("--policy", ganCommon.policy, "token, token-mc or sentence-mc");
  trainGan->add_option("--rollouts", ganCommon.rollouts, "Monte Carlo rollouts N");
  trainGan->add_option("--pretrained-embeddings", gan.embeddings, "Vectors text file")->check(CLI::ExistingFile);
  trainGan->add_option("--references", gan.references, "BLEU references for quality snapshots")
      ->check(CLI::ExistingFile);
  trainGan->add_option("--domain", gan.domain, "Train only this domain");

  CommonOptions genCommon;
  GenerateOptions gen;
  auto* generate = app.add_subcommand("generate", "Sample an augmentation set from trained generators");
  addCommon(generate, genCommon);
  generate->add_option("--checkpoint", gen.checkpoint, "train-gan output directory")->required()->check(CLI::ExistingDirectory);
  generate->add_option("--goldens", gen.goldens)->required()->check(CLI::ExistingFile);
  generate->add_option("--per-domain", genCommon.perDomain, "Pool size per domain");
  generate->add_option("--sampling", genCommon.sampling, "topx, uniques or all");
  generate->add_option("--references", gen.references, "BLEU references (default: goldens)")->check(CLI::ExistingFile);
  generate->add_option("--model", gen.model, "Model tag for the quality table");
  generate->add_option("--out", gen.out, "Augmentation JSONL")->required();

  CommonOptions bootCommon;
  ExperimentOptions boot;
  auto* bootstrap = app.add_subcommand("experiment-bootstrap", "Goldens vs goldens + synthetic");
  addCommon(bootstrap, bootCommon);
  bootstrap->add_option("--goldens", boot.goldens)->required()->check(CLI::ExistingFile);
  bootstrap->add_option("--test", boot.test)->required()->check(CLI::ExistingFile);
  bootstrap->add_option("--policy", bootCommon.policy);
  bootstrap->add_option("--rollouts", bootCommon.rollouts);
  bootstrap->add_option("--sampling", bootCommon.sampling);
  bootstrap->add_option("--per-domain", bootCommon.perDomain);
  bootstrap->add_option("--repeats", bootCommon.repeats);
  bootstrap->add_option("--jobs", bootCommon.jobs, "Repeats run in parallel");
  bootstrap->add_option("--out", boot.out, "Report directory")->required();

  CommonOptions lowCommon;
  ExperimentOptions low;
  auto* lowres = app.add_subcommand("experiment-lowresource", "Low-resource domain with pre-trained embeddings");
  addCommon(lowres, lowCommon);
  lowres->add_option("--low-domain", low.lowDomain)->required();
  lowres->add_option("--goldens", low.goldens)->required()->check(CLI::ExistingFile);
  lowres->add_option("--full-train", low.fullTrain, "Full training data of the robust domains")
      ->required()->check(CLI::ExistingFile);
  lowres->add_option("--test", low.test)->required()->check(CLI::ExistingFile);
  lowres->add_option("--policy", lowCommon.policy);
  lowres->add_option("--rollouts", lowCommon.rollouts);
  lowres->add_option("--sampling", lowCommon.sampling);
  lowres->add_option("--per-domain", lowCommon.perDomain);
  lowres->add_option("--repeats", lowCommon.repeats);
  lowres->add_option("--jobs", lowCommon.jobs);
  lowres->add_option("--out", low.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*prepare) return runPrepare(prep);
    if (*trainGan) return runTrainGan(gan, resolveConfig(ganCommon));
    if (*generate) return runGenerate(gen, resolveConfig(genCommon));
    if (*bootstrap) return runBootstrapCmd(boot, resolveConfig(bootCommon));
    if (*lowres) return runLowResourceCmd(low, resolveConfig(lowCommon));
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const ShapeError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
