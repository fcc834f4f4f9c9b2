#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace nluaug {

inline constexpr std::string_view kNoneLabel = "none";

/// Slot over tokens [start, end], both inclusive.
struct SlotSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string label;

  friend auto operator<=>(const SlotSpan&, const SlotSpan&) = default;
};

/// One annotated user request. Tokens are lowercased whitespace tokens;
/// tokens outside every slot carry the implicit label "none".
struct AnnotatedUtterance {
  std::vector<std::string> tokens;
  std::string domain;
  std::string intent;
  std::vector<SlotSpan> slots;
  /// Free-form origin tag ("synthetic" for generated data); not part of equality.
  std::string provenance;

  /// Throws DataError if spans overlap, are unsorted, out of bounds or use
  /// the reserved "none" label, or if the text is empty.
  void validate() const;
  /// Per-token labels ("none" outside spans).
  std::vector<std::string> labels() const;
  std::string text() const;

  /// Builds an utterance from per-token labels; maximal runs of one label
  /// become one span.
  static AnnotatedUtterance fromLabels(std::vector<std::string> tokens, std::string domain,
                                       std::string intent, std::span<const std::string> labels);

  friend bool operator==(const AnnotatedUtterance& a, const AnnotatedUtterance& b) {
    return a.tokens == b.tokens && a.domain == b.domain && a.intent == b.intent &&
           a.slots == b.slots;
  }
};

/// Merges adjacent spans that share a label (the token-label view cannot
/// separate them) and returns the result.
AnnotatedUtterance canonicalize(AnnotatedUtterance u);

// ---------------------------------------------------------------------------
// Symbol view. Components are escaped with a backslash before '\\', ':' and '/'.

std::string escapeSymbolPart(std::string_view s);
std::string unescapeSymbolPart(std::string_view s);
std::string headerSymbol(std::string_view domain, std::string_view intent);
std::string bodySymbol(std::string_view word, std::string_view label);
/// Splits "domain/intent"; nullopt if the symbol is not a header.
std::optional<std::pair<std::string, std::string>> splitHeader(std::string_view symbol);
/// Splits "word:label"; nullopt if the symbol is not a body symbol.
std::optional<std::pair<std::string, std::string>> splitBody(std::string_view symbol);

/// Space separated symbols, header first: the sequence-string form.
std::string annotatedString(const AnnotatedUtterance& u);
AnnotatedUtterance parseAnnotatedString(std::string_view line);

// ---------------------------------------------------------------------------

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kSpecialCount = 4;

  Vocabulary();
  /// Every header and body symbol of the corpus, ordered by descending
  /// frequency then lexicographically, after the four specials.
  static Vocabulary build(std::span<const AnnotatedUtterance> corpus);
  /// Rebuild from a symbol list in id order (specials included).
  static Vocabulary fromSymbols(std::vector<std::string> symbols);

  std::size_t size() const { return symbols_.size(); }
  /// -1 when absent.
  int find(std::string_view symbol) const;
  const std::string& symbol(int id) const { return symbols_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& symbols() const { return symbols_; }
  bool isSpecial(int id) const { return id >= 0 && id < kSpecialCount; }
  bool isHeader(int id) const { return id >= kSpecialCount && isHeader_.at(static_cast<std::size_t>(id)); }
  bool isBody(int id) const { return id >= kSpecialCount && !isHeader_.at(static_cast<std::size_t>(id)); }

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.symbols_ == b.symbols_; }

 private:
  void index();
  std::vector<std::string> symbols_;
  std::vector<bool> isHeader_;
  std::unordered_map<std::string, int> ids_;
};

/// GAN-facing encoding: header id followed by body ids.
struct TokenSequence {
  int header = Vocabulary::kUnk;
  std::vector<int> body;

  /// header, body... (no EOS)
  std::vector<int> ids() const;
  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

struct EncodeOptions {
  std::size_t maxLen = 64;  ///< maximum body length
  bool allowUnk = false;
};

TokenSequence encodeSequence(const AnnotatedUtterance& u, const Vocabulary& vocab,
                             const EncodeOptions& options = {});
/// Throws DataError on specials or misplaced header/body symbols.
AnnotatedUtterance decodeSequence(const TokenSequence& seq, const Vocabulary& vocab);
/// Decodes generated ids (header, body..., optional trailing EOS); nullopt
/// when they do not form a well-formed utterance.
std::optional<AnnotatedUtterance> decodeGenerated(std::span<const int> ids, const Vocabulary& vocab);

/// Nearest-rank percentile of token counts (used for the default maxLen).
std::size_t percentileLength(std::span<const AnnotatedUtterance> corpus, double percentile = 0.99);

// ---------------------------------------------------------------------------
// Golden selection

enum class FrequencyKey { AnnotatedString, RawText };

struct CorpusSplit {
  std::vector<AnnotatedUtterance> pseudoGoldens;
  std::vector<AnnotatedUtterance> rare;
  std::vector<AnnotatedUtterance> test;
  std::vector<std::string> warnings;
};

/// Per domain-intent group: occurrences sorted by descending frequency of
/// their key (ties lexicographic), the first ceil(fraction * groupSize)
/// occurrences are deduplicated into the goldens, and the remaining unique
/// keys form the rare set.
CorpusSplit selectPseudoGoldens(std::span<const AnnotatedUtterance> train, double fraction = 0.20,
                                FrequencyKey key = FrequencyKey::AnnotatedString);

struct SplitCountRow {
  std::string domain;
  std::string group;  ///< "pseudo Goldens" or "Rare"
  std::size_t uniqueUtterances = 0;
  std::size_t uniqueIntents = 0;
  std::size_t uniqueLabels = 0;
};

/// Rows per domain (goldens first, then rare), domains sorted.
std::vector<SplitCountRow> splitCounts(const CorpusSplit& split);
std::string splitCountsCsv(std::span<const SplitCountRow> rows);

// ---------------------------------------------------------------------------
// File formats

enum class SourceFormat { TsvFb, Jsonl };
SourceFormat parseSourceFormat(std::string_view tag);

/// Column layout for tab-separated sources. Slot column holds comma
/// separated "charStart:charEnd:label" entries with an exclusive end.
struct TsvColumns {
  std::size_t intent = 0;  ///< "domain/intent"
  std::size_t slots = 1;
  std::size_t text = 2;
};

struct ParseOptions {
  TsvColumns columns;
  /// Skip malformed records (listed in problems) instead of throwing.
  bool skipMalformed = false;
};

struct ParseResult {
  std::vector<AnnotatedUtterance> utterances;
  std::vector<std::string> problems;
};

ParseResult parseSourceDataset(const std::filesystem::path& path, SourceFormat format,
                               const ParseOptions& options = {});
AnnotatedUtterance parseJsonlRecord(std::string_view line);
std::string toJsonlRecord(const AnnotatedUtterance& u);

void writeJsonl(const std::filesystem::path& path, std::span<const AnnotatedUtterance> corpus);
std::vector<AnnotatedUtterance> readJsonl(const std::filesystem::path& path);
void writeSequenceStrings(const std::filesystem::path& path, std::span<const AnnotatedUtterance> corpus);
std::vector<AnnotatedUtterance> readSequenceStrings(const std::filesystem::path& path);

std::vector<std::string> tokenize(std::string_view text);

}  // namespace nluaug
