#ifndef MDFN_CORPUS_H_
#define MDFN_CORPUS_H_

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mdfn {

// Token-level disfluency tag. I marks tokens to remove (reparandum and,
// by default, interregnum); O marks fluent material.
enum class Tag : std::uint8_t { kO = 0, kI = 1 };

char tag_char(Tag t);
Tag tag_from_char(char c);  // throws DataError on anything but 'I'/'O'

struct Utterance {
  std::string id;
  std::vector<std::string> tokens;
  std::vector<Tag> tags;
  // One real per token, a prosodic cue score for that token's frames.
  // 0 everywhere for plain fluent speech.
  std::vector<double> channel;

  // Checks the parallel arrays line up, tokens are non-empty, channel is
  // finite. Throws DataError.
  void validate() const;

  // Tokens that survive after dropping all I-tagged ones.
  std::vector<std::string> fluent_tokens() const;
};

// Text cleanup: drops partial words (token ends with '-' or U+2014 before
// any other change), lowercases ASCII letters, strips Unicode punctuation
// (general category P*), drops tokens that end up empty. index_map[i] is the
// original position of surviving token i. Applying the function to its own
// output changes nothing.
struct PreprocessResult {
  std::vector<std::string> tokens;
  std::vector<std::size_t> index_map;
  bool empty() const { return tokens.empty(); }
};
PreprocessResult preprocess_tokens(const std::vector<std::string>& raw);

// Keeps tags (or any parallel array) aligned with preprocessed tokens.
template <typename T>
std::vector<T> apply_index_map(const std::vector<T>& values,
                               const std::vector<std::size_t>& index_map) {
  std::vector<T> out;
  out.reserve(index_map.size());
  for (std::size_t i : index_map) out.push_back(values[i]);
  return out;
}

enum class CorpusSplit { kTrain, kDev, kTest, kExcluded };
const char* split_name(CorpusSplit s);

// Conversation-file split by id prefix: sw2*/sw3* train, sw45xx-sw49xx dev,
// sw40xx/sw41xx test, everything else excluded. literal_sw23 narrows train
// to the literal sw23xx block for comparisons against that convention.
CorpusSplit assign_split(std::string_view file_id, bool literal_sw23 = false);

enum class DisfluencyType : std::uint8_t {
  kRepetition = 0,
  kRepair,
  kRestart,
  kDeletion,
  kSubstitution,
};
constexpr std::size_t kDisfluencyTypeCount = 5;
const char* disfluency_type_name(DisfluencyType t);

// Where and how to insert a disfluency into a fluent sentence.
// position is the index of the fluent token the inserted material precedes.
struct DisfluencySpec {
  DisfluencyType type = DisfluencyType::kRepetition;
  std::size_t position = 0;
  std::size_t reparandum_len = 1;
  std::optional<std::string> interregnum;  // e.g. "uh", inserted after the reparandum
};

struct InjectorConfig {
  double cue_probability = 0.9;  // chance the inserted tokens carry the cue
  double cue_value = 1.0;
  bool tag_interregnum = true;   // interregnum tagged I (and removed) by default
};

// Builds a disfluent utterance from a fluent sentence. Inserted tokens are
// tagged I, original tokens O, so dropping the I tokens recovers the input.
// Reparandum content by type:
//   repetition   copy of the next reparandum_len fluent tokens
//   repair       copy of the next reparandum_len - 1 tokens plus a fresh word
//   restart      fresh words (an abandoned start)
//   deletion     fresh words (an abandoned fragment)
//   substitution fresh words, each different from the fluent token it precedes
// Throws DataError when position/len do not fit the sentence.
Utterance inject_disfluency(const std::vector<std::string>& fluent, const DisfluencySpec& spec,
                            std::uint64_t seed, const InjectorConfig& config = {},
                            std::string id = "");

// Line format: id TAB tokens TAB tags TAB channel, inner fields space-joined.
// '#' starts a comment line, blank lines are skipped. Backslash escapes in id
// and tokens cover backslash, tab, newline, space, '#'. Channel values are
// shortest-round-trip decimals, so write-read-write is byte identical.
std::vector<Utterance> read_corpus(const std::string& path);
void write_corpus(const std::string& path, const std::vector<Utterance>& utterances);
std::string format_utterance_line(const Utterance& utt);
Utterance parse_utterance_line(const std::string& line, std::size_t line_number);

// Tag-only files: id TAB space-joined tags. read_tags also accepts full
// corpus lines and keeps just id + tags.
void write_tags(const std::string& path, const std::vector<Utterance>& utterances,
                const std::vector<std::vector<Tag>>& tags);
std::vector<std::pair<std::string, std::vector<Tag>>> read_tags(const std::string& path);

// Synthetic corpus: fluent sentences from a fixed lexicon (no adjacent
// duplicates), one injected disfluency per non-fluent utterance.
struct GeneratorConfig {
  std::size_t count = 100;
  std::uint64_t seed = 0;
  double fluent_fraction = 1.0 / 6.0;
  std::array<double, kDisfluencyTypeCount> type_weights{1, 1, 1, 1, 1};
  double interregnum_probability = 0.25;  // restarts only
  std::size_t min_sentence_len = 5;
  std::size_t max_sentence_len = 9;
  InjectorConfig injector;
  std::string id_prefix = "synth";
};
std::vector<Utterance> generate_corpus(const GeneratorConfig& config);

// Paired corpus for the audio-vs-text experiment. Each pair shares its token
// text (a sentence with one immediately repeated word); the disfluent copy
// tags the first occurrence I and cues its channel, the fluent copy is all O
// with a zero channel. Text alone cannot separate the two.
struct AmbiguousConfig {
  std::size_t pair_count = 100;
  std::uint64_t seed = 0;
  double cue_value = 1.0;
  std::size_t min_sentence_len = 5;
  std::size_t max_sentence_len = 9;
  std::string id_prefix = "ambig";
};
std::vector<Utterance> generate_ambiguous_corpus(const AmbiguousConfig& config);

const std::vector<std::string>& builtin_lexicon();

}  // namespace mdfn

#endif  // MDFN_CORPUS_H_
