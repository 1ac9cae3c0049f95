#include "mdfn/corpus.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mdfn/error.h"
#include "mdfn/rng.h"
#include "mdfn/unicode_punct.h"

namespace mdfn {

namespace {

// Decodes one UTF-8 codepoint starting at s[i]; advances i. Malformed bytes
// are passed through as their own codepoints so cleanup never throws.
char32_t decode_utf8(const std::string& s, std::size_t& i) {
  unsigned char c0 = static_cast<unsigned char>(s[i]);
  std::size_t len = 1;
  char32_t cp = c0;
  if ((c0 & 0x80) == 0x00) {
    len = 1;
  } else if ((c0 & 0xE0) == 0xC0) {
    len = 2;
    cp = c0 & 0x1F;
  } else if ((c0 & 0xF0) == 0xE0) {
    len = 3;
    cp = c0 & 0x0F;
  } else if ((c0 & 0xF8) == 0xF0) {
    len = 4;
    cp = c0 & 0x07;
  } else {
    i++;
    return c0;
  }
  if (i + len > s.size()) {
    i++;
    return c0;
  }
  for (std::size_t k = 1; k < len; k++) {
    unsigned char ck = static_cast<unsigned char>(s[i + k]);
    if ((ck & 0xC0) != 0x80) {
      i++;
      return c0;
    }
    cp = (cp << 6) | (ck & 0x3F);
  }
  i += len;
  return cp;
}

void encode_utf8(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool ends_with_partial_marker(const std::string& token) {
  if (!token.empty() && token.back() == '-') return true;
  // U+2014 em dash
  return token.size() >= 3 && token.compare(token.size() - 3, 3, "\xE2\x80\x94") == 0;
}

std::string clean_token(const std::string& raw) {
  std::string out;
  out.reserve(raw.size());
  std::size_t i = 0;
  while (i < raw.size()) {
    char32_t cp = decode_utf8(raw, i);
    if (is_punct_codepoint(cp)) continue;
    if (cp >= 'A' && cp <= 'Z') cp = cp - 'A' + 'a';
    encode_utf8(cp, out);
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s, std::size_t line_number, const char* field) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw DataError("line " + std::to_string(line_number) + ": bad decimal '" + s + "' in " +
                    field + " field");
  }
  return v;
}

std::string escape_field(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case ' ': out += "\\s"; break;
      case '#': out += "\\#"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string unescape_field(const std::string& s, std::size_t line_number) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); i++) {
    if (s[i] != '\\') {
      out.push_back(s[i]);
      continue;
    }
    if (i + 1 >= s.size()) {
      throw DataError("line " + std::to_string(line_number) + ": dangling escape");
    }
    switch (s[++i]) {
      case '\\': out.push_back('\\'); break;
      case 't': out.push_back('\t'); break;
      case 'n': out.push_back('\n'); break;
      case 's': out.push_back(' '); break;
      case '#': out.push_back('#'); break;
      default:
        throw DataError("line " + std::to_string(line_number) + ": unknown escape '\\" +
                        std::string(1, s[i]) + "'");
    }
  }
  return out;
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    std::size_t p = s.find(sep, start);
    if (p == std::string::npos) {
      parts.push_back(s.substr(start));
      return parts;
    }
    parts.push_back(s.substr(start, p - start));
    start = p + 1;
  }
}

std::string fresh_word(Rng& rng, const std::string* avoid) {
  const auto& lex = builtin_lexicon();
  for (int attempt = 0; attempt < 64; attempt++) {
    const std::string& w = lex[rng.below(lex.size())];
    if (avoid == nullptr || w != *avoid) return w;
  }
  throw DataError("lexicon too small to draw a distinct word");
}

std::vector<std::string> sample_sentence(Rng& rng, std::size_t min_len, std::size_t max_len) {
  std::size_t n = min_len + rng.below(max_len - min_len + 1);
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; i++) {
    // No accidental adjacent duplicates: those are reserved for injected
    // repetitions, which keeps the synthetic task well posed.
    const std::string* avoid = out.empty() ? nullptr : &out.back();
    out.push_back(fresh_word(rng, avoid));
  }
  return out;
}

DisfluencyType pick_type(Rng& rng, const std::array<double, kDisfluencyTypeCount>& weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (total <= 0.0) throw DataError("generator: type weights sum to zero");
  double r = rng.uniform() * total;
  for (std::size_t i = 0; i < kDisfluencyTypeCount; i++) {
    r -= weights[i];
    if (r < 0.0) return static_cast<DisfluencyType>(i);
  }
  return DisfluencyType::kSubstitution;
}

std::string sequence_id(const std::string& prefix, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "-%06zu", index);
  return prefix + buf;
}

}  // namespace

char tag_char(Tag t) { return t == Tag::kI ? 'I' : 'O'; }

Tag tag_from_char(char c) {
  if (c == 'I') return Tag::kI;
  if (c == 'O') return Tag::kO;
  throw DataError(std::string("bad tag character '") + c + "', expected I or O");
}

void Utterance::validate() const {
  if (tokens.empty()) throw DataError("utterance " + id + ": no tokens");
  if (tags.size() != tokens.size() || channel.size() != tokens.size()) {
    throw DataError("utterance " + id + ": " + std::to_string(tokens.size()) + " tokens, " +
                    std::to_string(tags.size()) + " tags, " + std::to_string(channel.size()) +
                    " channel values");
  }
  for (const std::string& t : tokens) {
    if (t.empty()) throw DataError("utterance " + id + ": empty token");
  }
  for (double c : channel) {
    if (!std::isfinite(c)) throw DataError("utterance " + id + ": non-finite channel value");
  }
}

std::vector<std::string> Utterance::fluent_tokens() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < tokens.size(); i++) {
    if (tags[i] == Tag::kO) out.push_back(tokens[i]);
  }
  return out;
}

PreprocessResult preprocess_tokens(const std::vector<std::string>& raw) {
  PreprocessResult result;
  for (std::size_t i = 0; i < raw.size(); i++) {
    if (ends_with_partial_marker(raw[i])) continue;
    std::string cleaned = clean_token(raw[i]);
    if (cleaned.empty()) continue;
    result.tokens.push_back(std::move(cleaned));
    result.index_map.push_back(i);
  }
  return result;
}

const char* split_name(CorpusSplit s) {
  switch (s) {
    case CorpusSplit::kTrain: return "train";
    case CorpusSplit::kDev: return "dev";
    case CorpusSplit::kTest: return "test";
    case CorpusSplit::kExcluded: return "excluded";
  }
  return "?";
}

CorpusSplit assign_split(std::string_view file_id, bool literal_sw23) {
  auto has_prefix = [&](std::string_view p) {
    return file_id.size() >= p.size() && file_id.substr(0, p.size()) == p;
  };
  if (has_prefix("sw4")) {
    if (file_id.size() >= 4) {
      char c = file_id[3];
      if (c >= '5' && c <= '9') return CorpusSplit::kDev;
      if (c == '0' || c == '1') return CorpusSplit::kTest;
    }
    return CorpusSplit::kExcluded;
  }
  if (literal_sw23) {
    return has_prefix("sw23") ? CorpusSplit::kTrain : CorpusSplit::kExcluded;
  }
  if (has_prefix("sw2") || has_prefix("sw3")) return CorpusSplit::kTrain;
  return CorpusSplit::kExcluded;
}

const char* disfluency_type_name(DisfluencyType t) {
  switch (t) {
    case DisfluencyType::kRepetition: return "repetition";
    case DisfluencyType::kRepair: return "repair";
    case DisfluencyType::kRestart: return "restart";
    case DisfluencyType::kDeletion: return "deletion";
    case DisfluencyType::kSubstitution: return "substitution";
  }
  return "?";
}

Utterance inject_disfluency(const std::vector<std::string>& fluent, const DisfluencySpec& spec,
                            std::uint64_t seed, const InjectorConfig& config, std::string id) {
  const std::size_t m = fluent.size();
  const std::size_t k = spec.reparandum_len;
  const std::size_t pos = spec.position;
  if (m == 0) throw DataError("inject: empty fluent sentence");
  if (k == 0) throw DataError("inject: reparandum length must be positive");
  for (const std::string& t : fluent) {
    if (t.empty()) throw DataError("inject: empty token in fluent sentence");
  }
  if (pos >= m) {
    throw DataError("inject: position " + std::to_string(pos) + " outside sentence of " +
                    std::to_string(m) + " tokens");
  }

  Rng rng(mix64(seed));
  std::vector<std::string> reparandum;
  reparandum.reserve(k);
  switch (spec.type) {
    case DisfluencyType::kRepetition: {
      if (pos + k > m) {
        throw DataError("inject: repetition of " + std::to_string(k) + " tokens at " +
                        std::to_string(pos) + " does not fit " + std::to_string(m) + " tokens");
      }
      for (std::size_t i = 0; i < k; i++) reparandum.push_back(fluent[pos + i]);
      break;
    }
    case DisfluencyType::kRepair: {
      if (pos + k - 1 > m) {
        throw DataError("inject: repair of " + std::to_string(k) + " tokens at " +
                        std::to_string(pos) + " does not fit " + std::to_string(m) + " tokens");
      }
      for (std::size_t i = 0; i + 1 < k; i++) reparandum.push_back(fluent[pos + i]);
      const std::string* avoid = pos + k - 1 < m ? &fluent[pos + k - 1] : nullptr;
      reparandum.push_back(fresh_word(rng, avoid));
      break;
    }
    case DisfluencyType::kRestart:
    case DisfluencyType::kDeletion: {
      for (std::size_t i = 0; i < k; i++) reparandum.push_back(fresh_word(rng, nullptr));
      break;
    }
    case DisfluencyType::kSubstitution: {
      if (pos + k > m) {
        throw DataError("inject: substitution of " + std::to_string(k) + " tokens at " +
                        std::to_string(pos) + " does not fit " + std::to_string(m) + " tokens");
      }
      for (std::size_t i = 0; i < k; i++) reparandum.push_back(fresh_word(rng, &fluent[pos + i]));
      break;
    }
  }

  bool cued = rng.coin(config.cue_probability);
  Utterance utt;
  utt.id = std::move(id);
  utt.tokens.reserve(m + k + 1);
  for (std::size_t i = 0; i < pos; i++) {
    utt.tokens.push_back(fluent[i]);
    utt.tags.push_back(Tag::kO);
    utt.channel.push_back(0.0);
  }
  for (std::string& w : reparandum) {
    utt.tokens.push_back(std::move(w));
    utt.tags.push_back(Tag::kI);
    utt.channel.push_back(cued ? config.cue_value : 0.0);
  }
  if (spec.interregnum) {
    utt.tokens.push_back(*spec.interregnum);
    utt.tags.push_back(config.tag_interregnum ? Tag::kI : Tag::kO);
    utt.channel.push_back(cued && config.tag_interregnum ? config.cue_value : 0.0);
  }
  for (std::size_t i = pos; i < m; i++) {
    utt.tokens.push_back(fluent[i]);
    utt.tags.push_back(Tag::kO);
    utt.channel.push_back(0.0);
  }
  return utt;
}

std::string format_utterance_line(const Utterance& utt) {
  utt.validate();
  std::string line = escape_field(utt.id);
  line.push_back('\t');
  for (std::size_t i = 0; i < utt.tokens.size(); i++) {
    if (i) line.push_back(' ');
    line += escape_field(utt.tokens[i]);
  }
  line.push_back('\t');
  for (std::size_t i = 0; i < utt.tags.size(); i++) {
    if (i) line.push_back(' ');
    line.push_back(tag_char(utt.tags[i]));
  }
  line.push_back('\t');
  for (std::size_t i = 0; i < utt.channel.size(); i++) {
    if (i) line.push_back(' ');
    line += format_double(utt.channel[i]);
  }
  return line;
}

Utterance parse_utterance_line(const std::string& line, std::size_t line_number) {
  std::vector<std::string> fields = split_on(line, '\t');
  if (fields.size() != 4) {
    throw DataError("line " + std::to_string(line_number) +
                    ": expected 4 tab-separated fields (id, tokens, tags, channel), got " +
                    std::to_string(fields.size()));
  }
  Utterance utt;
  utt.id = unescape_field(fields[0], line_number);
  std::vector<std::string> toks = split_on(fields[1], ' ');
  std::vector<std::string> tags = split_on(fields[2], ' ');
  std::vector<std::string> chans = split_on(fields[3], ' ');
  if (tags.size() != toks.size() || chans.size() != toks.size()) {
    throw DataError("line " + std::to_string(line_number) + ": field lengths differ (" +
                    std::to_string(toks.size()) + " tokens, " + std::to_string(tags.size()) +
                    " tags, " + std::to_string(chans.size()) + " channel values)");
  }
  for (std::size_t i = 0; i < toks.size(); i++) {
    std::string tok = unescape_field(toks[i], line_number);
    if (tok.empty()) {
      throw DataError("line " + std::to_string(line_number) + ": empty token in tokens field");
    }
    utt.tokens.push_back(std::move(tok));
    if (tags[i].size() != 1 || (tags[i][0] != 'I' && tags[i][0] != 'O')) {
      throw DataError("line " + std::to_string(line_number) + ": bad tag '" + tags[i] +
                      "' in tags field");
    }
    utt.tags.push_back(tag_from_char(tags[i][0]));
    utt.channel.push_back(parse_double(chans[i], line_number, "channel"));
  }
  utt.validate();
  return utt;
}

std::vector<Utterance> read_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus file: " + path);
  std::vector<Utterance> out;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    line_number++;
    if (line.empty() || line[0] == '#') continue;
    out.push_back(parse_utterance_line(line, line_number));
  }
  return out;
}

void write_corpus(const std::string& path, const std::vector<Utterance>& utterances) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write corpus file: " + path);
  for (const Utterance& u : utterances) {
    out << format_utterance_line(u) << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

void write_tags(const std::string& path, const std::vector<Utterance>& utterances,
                const std::vector<std::vector<Tag>>& tags) {
  if (utterances.size() != tags.size()) {
    throw DataError("write_tags: " + std::to_string(utterances.size()) + " utterances vs " +
                    std::to_string(tags.size()) + " tag rows");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write tags file: " + path);
  for (std::size_t i = 0; i < utterances.size(); i++) {
    out << escape_field(utterances[i].id) << '\t';
    for (std::size_t j = 0; j < tags[i].size(); j++) {
      if (j) out << ' ';
      out << tag_char(tags[i][j]);
    }
    out << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

std::vector<std::pair<std::string, std::vector<Tag>>> read_tags(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open tags file: " + path);
  std::vector<std::pair<std::string, std::vector<Tag>>> out;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    line_number++;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields = split_on(line, '\t');
    std::size_t tag_field;
    if (fields.size() == 2) {
      tag_field = 1;  // id TAB tags
    } else if (fields.size() == 4) {
      tag_field = 2;  // full corpus line
    } else {
      throw DataError("line " + std::to_string(line_number) +
                      ": expected 2 fields (id, tags) or a 4-field corpus line, got " +
                      std::to_string(fields.size()));
    }
    std::vector<Tag> tags;
    for (const std::string& t : split_on(fields[tag_field], ' ')) {
      if (t.size() != 1 || (t[0] != 'I' && t[0] != 'O')) {
        throw DataError("line " + std::to_string(line_number) + ": bad tag '" + t + "'");
      }
      tags.push_back(tag_from_char(t[0]));
    }
    out.emplace_back(unescape_field(fields[0], line_number), std::move(tags));
  }
  return out;
}

std::vector<Utterance> generate_corpus(const GeneratorConfig& config) {
  if (config.min_sentence_len == 0 || config.min_sentence_len > config.max_sentence_len) {
    throw DataError("generator: bad sentence length range");
  }
  Rng rng(mix64(config.seed ^ 0x636f7270));
  std::vector<Utterance> out;
  out.reserve(config.count);
  for (std::size_t n = 0; n < config.count; n++) {
    std::vector<std::string> sentence =
        sample_sentence(rng, config.min_sentence_len, config.max_sentence_len);
    std::string id = sequence_id(config.id_prefix, n);
    if (rng.coin(config.fluent_fraction)) {
      Utterance utt;
      utt.id = std::move(id);
      utt.tokens = std::move(sentence);
      utt.tags.assign(utt.tokens.size(), Tag::kO);
      utt.channel.assign(utt.tokens.size(), 0.0);
      out.push_back(std::move(utt));
      continue;
    }
    const std::size_t m = sentence.size();
    DisfluencySpec spec;
    spec.type = pick_type(rng, config.type_weights);
    switch (spec.type) {
      case DisfluencyType::kRepetition:
        spec.reparandum_len = 1 + rng.below(2);  // 1-2
        spec.position = rng.below(m - spec.reparandum_len + 1);
        break;
      case DisfluencyType::kRepair:
        spec.reparandum_len = 2 + rng.below(2);  // 2-3
        spec.position = rng.below(m - spec.reparandum_len + 2);
        break;
      case DisfluencyType::kRestart:
        spec.reparandum_len = 1 + rng.below(3);  // 1-3
        spec.position = 0;
        if (rng.coin(config.interregnum_probability)) spec.interregnum = "uh";
        break;
      case DisfluencyType::kDeletion:
        spec.reparandum_len = 1 + rng.below(3);  // 1-3
        spec.position = rng.below(m);
        break;
      case DisfluencyType::kSubstitution:
        spec.reparandum_len = 1 + rng.below(2);  // 1-2
        spec.position = rng.below(m - spec.reparandum_len + 1);
        break;
    }
    out.push_back(inject_disfluency(sentence, spec, rng.next_u64(), config.injector,
                                    std::move(id)));
  }
  return out;
}

std::vector<Utterance> generate_ambiguous_corpus(const AmbiguousConfig& config) {
  if (config.min_sentence_len == 0 || config.min_sentence_len > config.max_sentence_len) {
    throw DataError("generator: bad sentence length range");
  }
  Rng rng(mix64(config.seed ^ 0x616d6269));
  std::vector<Utterance> out;
  out.reserve(config.pair_count * 2);
  for (std::size_t n = 0; n < config.pair_count; n++) {
    std::vector<std::string> sentence =
        sample_sentence(rng, config.min_sentence_len, config.max_sentence_len);
    std::size_t p = rng.below(sentence.size());
    std::vector<std::string> tokens;
    tokens.reserve(sentence.size() + 1);
    tokens.insert(tokens.end(), sentence.begin(), sentence.begin() + p + 1);
    tokens.push_back(sentence[p]);  // immediate repeat
    tokens.insert(tokens.end(), sentence.begin() + p + 1, sentence.end());

    Utterance disfluent;
    disfluent.id = sequence_id(config.id_prefix, n) + "-d";
    disfluent.tokens = tokens;
    disfluent.tags.assign(tokens.size(), Tag::kO);
    disfluent.tags[p] = Tag::kI;
    disfluent.channel.assign(tokens.size(), 0.0);
    disfluent.channel[p] = config.cue_value;

    Utterance fluent;
    fluent.id = sequence_id(config.id_prefix, n) + "-f";
    fluent.tokens = std::move(tokens);
    fluent.tags.assign(fluent.tokens.size(), Tag::kO);
    fluent.channel.assign(fluent.tokens.size(), 0.0);

    out.push_back(std::move(disfluent));
    out.push_back(std::move(fluent));
  }
  return out;
}

const std::vector<std::string>& builtin_lexicon() {
  static const std::vector<std::string> lex = {
      "i",    "you",  "he",    "she",  "we",    "they", "it",    "the",  "a",
      "my",   "your", "his",   "her",  "our",   "that", "this",  "is",   "was",
      "are",  "were", "do",    "did",  "go",    "went", "see",   "saw",  "like",
      "want", "know", "think", "get",  "got",   "have", "had",   "say",  "said",
      "make", "made", "take",  "took", "home",  "work", "cats",  "dogs", "news",
      "game", "car",  "bus",   "pen",  "book",  "day",  "night", "week", "year",
      "time", "way",  "up",    "down", "with",  "over", "under", "here", "there",
  };
  return lex;
}

}  // namespace mdfn
