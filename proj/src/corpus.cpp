#include "nluaug/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "nluaug/error.hpp"

namespace nluaug {

namespace {

const std::vector<std::string>& specialSymbols() {
  static const std::vector<std::string> s{"<pad>", "<bos>", "<eos>", "<unk>"};
  return s;
}

// Positions of unescaped occurrences of ch.
std::vector<std::size_t> unescapedPositions(std::string_view s, char ch) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\') {
      ++i;
      continue;
    }
    if (s[i] == ch) out.push_back(i);
  }
  return out;
}

bool wellEscaped(std::string_view s) {
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s[i] == '\\') {
      if (i + 1 >= s.size()) return false;
      ++i;
    }
  return true;
}

std::vector<std::string> splitOn(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

void AnnotatedUtterance::validate() const {
  if (tokens.empty()) throw DataError("utterance has no tokens");
  if (domain.empty() || intent.empty()) throw DataError("utterance lacks domain or intent");
  for (const auto& t : tokens)
    if (t.empty() || t.find_first_of(" \t\r\n") != std::string::npos)
      throw DataError("token '" + t + "' is empty or contains whitespace");
  std::size_t nextFree = 0;
  for (const auto& s : slots) {
    if (s.end < s.start)
      throw DataError("slot '" + s.label + "' ends (" + std::to_string(s.end) +
                      ") before it starts (" + std::to_string(s.start) + ")");
    if (s.end >= tokens.size())
      throw DataError("slot '" + s.label + "' span [" + std::to_string(s.start) + "," +
                      std::to_string(s.end) + "] out of bounds for " +
                      std::to_string(tokens.size()) + " tokens");
    if (s.start < nextFree) throw DataError("slot spans overlap or are unsorted");
    if (s.label.empty() || s.label == kNoneLabel)
      throw DataError("slot label must be non-empty and not 'none'");
    nextFree = s.end + 1;
  }
}

std::vector<std::string> AnnotatedUtterance::labels() const {
  std::vector<std::string> out(tokens.size(), std::string(kNoneLabel));
  for (const auto& s : slots)
    for (std::size_t i = s.start; i <= s.end && i < out.size(); ++i) out[i] = s.label;
  return out;
}

std::string AnnotatedUtterance::text() const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

AnnotatedUtterance AnnotatedUtterance::fromLabels(std::vector<std::string> tokens,
                                                  std::string domain, std::string intent,
                                                  std::span<const std::string> labels) {
  if (labels.size() != tokens.size())
    throw DataError("label count " + std::to_string(labels.size()) + " differs from token count " +
                    std::to_string(tokens.size()));
  AnnotatedUtterance u;
  u.tokens = std::move(tokens);
  u.domain = std::move(domain);
  u.intent = std::move(intent);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == kNoneLabel) continue;
    if (!u.slots.empty() && u.slots.back().end + 1 == i && u.slots.back().label == labels[i])
      u.slots.back().end = i;
    else
      u.slots.push_back({i, i, labels[i]});
  }
  return u;
}

AnnotatedUtterance canonicalize(AnnotatedUtterance u) {
  std::vector<SlotSpan> merged;
  for (auto& s : u.slots) {
    if (!merged.empty() && merged.back().end + 1 == s.start && merged.back().label == s.label)
      merged.back().end = s.end;
    else
      merged.push_back(std::move(s));
  }
  u.slots = std::move(merged);
  return u;
}

// ---------------------------------------------------------------------------

std::string escapeSymbolPart(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '\\' || c == ':' || c == '/') out += '\\';
    out += c;
  }
  return out;
}

std::string unescapeSymbolPart(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) ++i;
    out += s[i];
  }
  return out;
}

std::string headerSymbol(std::string_view domain, std::string_view intent) {
  return escapeSymbolPart(domain) + "/" + escapeSymbolPart(intent);
}

std::string bodySymbol(std::string_view word, std::string_view label) {
  return escapeSymbolPart(word) + ":" + escapeSymbolPart(label);
}

std::optional<std::pair<std::string, std::string>> splitHeader(std::string_view symbol) {
  if (!wellEscaped(symbol)) return std::nullopt;
  const auto slashes = unescapedPositions(symbol, '/');
  if (slashes.size() != 1 || !unescapedPositions(symbol, ':').empty()) return std::nullopt;
  const auto a = symbol.substr(0, slashes[0]);
  const auto b = symbol.substr(slashes[0] + 1);
  if (a.empty() || b.empty()) return std::nullopt;
  return std::make_pair(unescapeSymbolPart(a), unescapeSymbolPart(b));
}

std::optional<std::pair<std::string, std::string>> splitBody(std::string_view symbol) {
  if (!wellEscaped(symbol)) return std::nullopt;
  const auto colons = unescapedPositions(symbol, ':');
  if (colons.size() != 1 || !unescapedPositions(symbol, '/').empty()) return std::nullopt;
  const auto a = symbol.substr(0, colons[0]);
  const auto b = symbol.substr(colons[0] + 1);
  if (a.empty() || b.empty()) return std::nullopt;
  return std::make_pair(unescapeSymbolPart(a), unescapeSymbolPart(b));
}

std::string annotatedString(const AnnotatedUtterance& u) {
  std::string out = headerSymbol(u.domain, u.intent);
  const auto labels = u.labels();
  for (std::size_t i = 0; i < u.tokens.size(); ++i) {
    out += ' ';
    out += bodySymbol(u.tokens[i], labels[i]);
  }
  return out;
}

AnnotatedUtterance parseAnnotatedString(std::string_view line) {
  std::istringstream in{std::string(line)};
  std::string sym;
  if (!(in >> sym)) throw DataError("empty sequence string");
  auto header = splitHeader(sym);
  if (!header) throw DataError("malformed header symbol '" + sym + "'");
  std::vector<std::string> tokens, labels;
  while (in >> sym) {
    auto body = splitBody(sym);
    if (!body) throw DataError("malformed body symbol '" + sym + "'");
    tokens.push_back(std::move(body->first));
    labels.push_back(std::move(body->second));
  }
  auto u = AnnotatedUtterance::fromLabels(std::move(tokens), std::move(header->first),
                                          std::move(header->second), labels);
  u.validate();
  return u;
}

// ---------------------------------------------------------------------------

Vocabulary::Vocabulary() : symbols_(specialSymbols()) { index(); }

void Vocabulary::index() {
  ids_.clear();
  isHeader_.assign(symbols_.size(), false);
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    if (!ids_.emplace(symbols_[i], static_cast<int>(i)).second)
      throw DataError("duplicate vocabulary symbol '" + symbols_[i] + "'");
    if (i >= kSpecialCount) {
      if (splitHeader(symbols_[i]))
        isHeader_[i] = true;
      else if (!splitBody(symbols_[i]))
        throw DataError("vocabulary symbol '" + symbols_[i] + "' is neither header nor body");
    }
  }
}

Vocabulary Vocabulary::build(std::span<const AnnotatedUtterance> corpus) {
  std::map<std::string, std::size_t> freq;
  for (const auto& u : corpus) {
    ++freq[headerSymbol(u.domain, u.intent)];
    const auto labels = u.labels();
    for (std::size_t i = 0; i < u.tokens.size(); ++i) ++freq[bodySymbol(u.tokens[i], labels[i])];
  }
  std::vector<std::pair<std::string, std::size_t>> items(freq.begin(), freq.end());
  std::stable_sort(items.begin(), items.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  for (auto& [sym, n] : items) v.symbols_.push_back(sym);
  v.index();
  return v;
}

Vocabulary Vocabulary::fromSymbols(std::vector<std::string> symbols) {
  if (symbols.size() < kSpecialCount ||
      !std::equal(specialSymbols().begin(), specialSymbols().end(), symbols.begin()))
    throw DataError("vocabulary must start with the four special symbols");
  Vocabulary v;
  v.symbols_ = std::move(symbols);
  v.index();
  return v;
}

int Vocabulary::find(std::string_view symbol) const {
  auto it = ids_.find(std::string(symbol));
  return it == ids_.end() ? -1 : it->second;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write vocabulary " + path.string());
  for (const auto& s : symbols_) out << s << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read vocabulary " + path.string());
  std::vector<std::string> symbols;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) symbols.push_back(line);
  return fromSymbols(std::move(symbols));
}

std::vector<int> TokenSequence::ids() const {
  std::vector<int> out;
  out.reserve(body.size() + 1);
  out.push_back(header);
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

TokenSequence encodeSequence(const AnnotatedUtterance& u, const Vocabulary& vocab,
                             const EncodeOptions& options) {
  if (u.tokens.size() > options.maxLen)
    throw DataError("utterance of " + std::to_string(u.tokens.size()) +
                    " tokens exceeds maxLen " + std::to_string(options.maxLen));
  auto resolve = [&](const std::string& sym) {
    const int id = vocab.find(sym);
    if (id >= 0) return id;
    if (!options.allowUnk) throw DataError("symbol '" + sym + "' not in vocabulary");
    return Vocabulary::kUnk;
  };
  TokenSequence seq;
  seq.header = resolve(headerSymbol(u.domain, u.intent));
  const auto labels = u.labels();
  for (std::size_t i = 0; i < u.tokens.size(); ++i)
    seq.body.push_back(resolve(bodySymbol(u.tokens[i], labels[i])));
  return seq;
}

AnnotatedUtterance decodeSequence(const TokenSequence& seq, const Vocabulary& vocab) {
  auto u = decodeGenerated(seq.ids(), vocab);
  if (!u) throw DataError("token sequence does not decode to a well-formed utterance");
  return *u;
}

std::optional<AnnotatedUtterance> decodeGenerated(std::span<const int> ids, const Vocabulary& vocab) {
  if (!ids.empty() && ids.back() == Vocabulary::kEos) ids = ids.first(ids.size() - 1);
  if (ids.size() < 2) return std::nullopt;
  const auto valid = [&](int id) { return id >= 0 && static_cast<std::size_t>(id) < vocab.size(); };
  if (!valid(ids[0]) || !vocab.isHeader(ids[0])) return std::nullopt;
  auto header = splitHeader(vocab.symbol(ids[0]));
  std::vector<std::string> tokens, labels;
  for (std::size_t i = 1; i < ids.size(); ++i) {
    if (!valid(ids[i]) || !vocab.isBody(ids[i])) return std::nullopt;
    auto body = splitBody(vocab.symbol(ids[i]));
    tokens.push_back(std::move(body->first));
    labels.push_back(std::move(body->second));
  }
  return AnnotatedUtterance::fromLabels(std::move(tokens), std::move(header->first),
                                        std::move(header->second), labels);
}

std::size_t percentileLength(std::span<const AnnotatedUtterance> corpus, double percentile) {
  if (corpus.empty()) throw DataError("percentileLength of empty corpus");
  std::vector<std::size_t> lens;
  for (const auto& u : corpus) lens.push_back(u.tokens.size());
  std::sort(lens.begin(), lens.end());
  const auto rank = static_cast<std::size_t>(std::ceil(percentile * static_cast<double>(lens.size()) - 1e-9));
  return lens[std::clamp<std::size_t>(rank, 1, lens.size()) - 1];
}

// ---------------------------------------------------------------------------

CorpusSplit selectPseudoGoldens(std::span<const AnnotatedUtterance> train, double fraction,
                                FrequencyKey keyKind) {
  if (train.empty()) throw DataError("cannot select goldens from an empty corpus");
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw ConfigError("golden fraction must be in (0, 1], got " + std::to_string(fraction));

  std::map<std::string, std::vector<std::size_t>> groups;
  std::vector<std::string> keys(train.size()), annotated(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    annotated[i] = annotatedString(train[i]);
    keys[i] = keyKind == FrequencyKey::AnnotatedString ? annotated[i] : train[i].text();
    groups[headerSymbol(train[i].domain, train[i].intent)].push_back(i);
  }

  CorpusSplit split;
  for (auto& [group, members] : groups) {
    if (members.empty()) {
      split.warnings.push_back("empty group " + group + " skipped");
      continue;
    }
    std::map<std::string, std::size_t> freq;
    // Representative per key: smallest annotated string, so the choice does
    // not depend on input order.
    std::map<std::string, std::size_t> representative;
    for (std::size_t i : members) {
      ++freq[keys[i]];
      auto [it, inserted] = representative.emplace(keys[i], i);
      if (!inserted && annotated[i] < annotated[it->second]) it->second = i;
    }
    std::vector<std::size_t> order = members;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (freq[keys[a]] != freq[keys[b]]) return freq[keys[a]] > freq[keys[b]];
      return keys[a] < keys[b];
    });
    const auto take = static_cast<std::size_t>(
        std::ceil(fraction * static_cast<double>(order.size()) - 1e-9));
    std::set<std::string> golden;
    std::vector<std::string> goldenOrder, rareOrder;
    for (std::size_t r = 0; r < order.size(); ++r) {
      const auto& k = keys[order[r]];
      if (r < take) {
        if (golden.insert(k).second) goldenOrder.push_back(k);
      } else if (!golden.count(k) &&
                 (rareOrder.empty() || rareOrder.back() != k)) {
        rareOrder.push_back(k);
      }
    }
    for (const auto& k : goldenOrder) split.pseudoGoldens.push_back(train[representative[k]]);
    for (const auto& k : rareOrder) split.rare.push_back(train[representative[k]]);
  }
  return split;
}

std::vector<SplitCountRow> splitCounts(const CorpusSplit& split) {
  struct Acc {
    std::set<std::string> utterances, intents, labels;
  };
  std::map<std::string, std::pair<Acc, Acc>> byDomain;
  auto add = [](Acc& acc, const AnnotatedUtterance& u) {
    acc.utterances.insert(annotatedString(u));
    acc.intents.insert(u.intent);
    for (const auto& s : u.slots) acc.labels.insert(s.label);
  };
  for (const auto& u : split.pseudoGoldens) add(byDomain[u.domain].first, u);
  for (const auto& u : split.rare) add(byDomain[u.domain].second, u);
  std::vector<SplitCountRow> rows;
  for (const auto& [domain, accs] : byDomain) {
    rows.push_back({domain, "pseudo Goldens", accs.first.utterances.size(),
                    accs.first.intents.size(), accs.first.labels.size()});
    rows.push_back({domain, "Rare", accs.second.utterances.size(), accs.second.intents.size(),
                    accs.second.labels.size()});
  }
  return rows;
}

std::string splitCountsCsv(std::span<const SplitCountRow> rows) {
  std::ostringstream os;
  os << "domain,utterance_group,unique_utterance_count,unique_intent_count,unique_label_count\n";
  for (const auto& r : rows)
    os << r.domain << ',' << r.group << ',' << r.uniqueUtterances << ',' << r.uniqueIntents << ','
       << r.uniqueLabels << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{lower(text)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

SourceFormat parseSourceFormat(std::string_view tag) {
  if (tag == "tsv-fb") return SourceFormat::TsvFb;
  if (tag == "jsonl") return SourceFormat::Jsonl;
  throw ConfigError("unknown format tag '" + std::string(tag) + "' (expected tsv-fb or jsonl)");
}

AnnotatedUtterance parseJsonlRecord(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("invalid JSON: ") + e.what());
  }
  try {
    AnnotatedUtterance u;
    if (j.contains("tokens"))
      for (const auto& t : j.at("tokens")) u.tokens.push_back(lower(t.get<std::string>()));
    else
      u.tokens = tokenize(j.at("text").get<std::string>());
    u.domain = j.at("domain").get<std::string>();
    u.intent = j.at("intent").get<std::string>();
    for (const auto& s : j.value("slots", nlohmann::json::array())) {
      SlotSpan span;
      if (s.is_array()) {
        span.start = s.at(0).get<std::size_t>();
        span.end = s.at(1).get<std::size_t>();
        span.label = s.at(2).get<std::string>();
      } else {
        const auto start = s.at("start").get<long long>();
        const auto end = s.at("end").get<long long>();
        if (start < 0 || end < 0) throw DataError("negative slot index");
        span.start = static_cast<std::size_t>(start);
        span.end = static_cast<std::size_t>(end);
        span.label = s.at("label").get<std::string>();
      }
      u.slots.push_back(std::move(span));
    }
    u.provenance = j.value("provenance", "");
    u.validate();
    return canonicalize(std::move(u));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad record: ") + e.what());
  }
}

std::string toJsonlRecord(const AnnotatedUtterance& u) {
  nlohmann::ordered_json j;
  j["text"] = u.text();
  j["domain"] = u.domain;
  j["intent"] = u.intent;
  j["slots"] = nlohmann::ordered_json::array();
  for (const auto& s : u.slots)
    j["slots"].push_back({{"start", s.start}, {"end", s.end}, {"label", s.label}});
  if (!u.provenance.empty()) j["provenance"] = u.provenance;
  return j.dump();
}

namespace {

AnnotatedUtterance parseTsvRecord(std::string_view line, const TsvColumns& cols) {
  const auto fields = splitOn(line, '\t');
  const auto need = std::max({cols.intent, cols.slots, cols.text}) + 1;
  if (fields.size() < need)
    throw DataError("expected at least " + std::to_string(need) + " tab-separated columns, got " +
                    std::to_string(fields.size()));
  AnnotatedUtterance u;
  const auto& label = fields[cols.intent];
  const auto slash = label.find('/');
  if (slash == std::string::npos || slash == 0 || slash + 1 == label.size())
    throw DataError("intent column '" + label + "' is not domain/intent");
  u.domain = label.substr(0, slash);
  u.intent = label.substr(slash + 1);

  // Token byte offsets in the original text.
  const std::string& text = fields[cols.text];
  std::vector<std::pair<std::size_t, std::size_t>> offsets;
  for (std::size_t i = 0; i < text.size();) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i >= text.size()) break;
    const std::size_t b = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    offsets.emplace_back(b, i);
    u.tokens.push_back(lower(std::string_view(text).substr(b, i - b)));
  }

  const std::string& slotField = fields[cols.slots];
  if (!slotField.empty()) {
    for (const auto& entry : splitOn(slotField, ',')) {
      if (entry.empty()) continue;
      const auto parts = splitOn(entry, ':');
      if (parts.size() < 3) throw DataError("slot entry '" + entry + "' is not start:end:label");
      std::size_t a = 0, b = 0;
      try {
        a = std::stoul(parts[0]);
        b = std::stoul(parts[1]);
      } catch (const std::exception&) {
        throw DataError("slot entry '" + entry + "' has non-numeric offsets");
      }
      std::string lab = parts[2];
      for (std::size_t k = 3; k < parts.size(); ++k) lab += ":" + parts[k];
      if (b <= a || b > text.size())
        throw DataError("slot entry '" + entry + "' has an invalid character range");
      std::optional<std::size_t> first, last;
      for (std::size_t t = 0; t < offsets.size(); ++t)
        if (offsets[t].first < b && offsets[t].second > a) {
          if (!first) first = t;
          last = t;
        }
      if (!first) throw DataError("slot entry '" + entry + "' covers no token");
      u.slots.push_back({*first, *last, lab});
    }
    std::sort(u.slots.begin(), u.slots.end());
  }
  u.validate();
  return canonicalize(std::move(u));
}

}  // namespace

ParseResult parseSourceDataset(const std::filesystem::path& path, SourceFormat format,
                               const ParseOptions& options) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  ParseResult result;
  std::string line;
  std::size_t lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      result.utterances.push_back(format == SourceFormat::Jsonl ? parseJsonlRecord(line)
                                                                : parseTsvRecord(line, options.columns));
    } catch (const DataError& e) {
      std::string msg = path.string() + ":" + std::to_string(lineNo) + ": " + e.what();
      if (!options.skipMalformed) throw DataError(msg);
      result.problems.push_back(std::move(msg));
    }
  }
  return result;
}

void writeJsonl(const std::filesystem::path& path, std::span<const AnnotatedUtterance> corpus) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& u : corpus) out << toJsonlRecord(u) << '\n';
}

std::vector<AnnotatedUtterance> readJsonl(const std::filesystem::path& path) {
  return parseSourceDataset(path, SourceFormat::Jsonl).utterances;
}

void writeSequenceStrings(const std::filesystem::path& path, std::span<const AnnotatedUtterance> corpus) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& u : corpus) out << annotatedString(u) << '\n';
}

std::vector<AnnotatedUtterance> readSequenceStrings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<AnnotatedUtterance> out;
  std::string line;
  std::size_t lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parseAnnotatedString(line));
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(lineNo) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace nluaug
