#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "mdfn/corpus.h"
#include "mdfn/error.h"

using namespace mdfn;

namespace {

std::filesystem::path tmp_file(const char* stem) {
  static int counter = 0;
  return std::filesystem::temp_directory_path() /
         (std::string(stem) + "." + std::to_string(++counter) + ".tsv");
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return s;
}

bool same_utterance(const Utterance& a, const Utterance& b) {
  return a.id == b.id && a.tokens == b.tokens && a.tags == b.tags && a.channel == b.channel;
}

bool message_contains(const std::exception& e, const std::string& needle) {
  return std::string(e.what()).find(needle) != std::string::npos;
}

}  // namespace

TEST_SUITE("corpus") {

TEST_CASE("preprocess drops partial words, punctuation, case") {
  PreprocessResult r = preprocess_tokens({"But,", "I", "do", "abso-"});
  CHECK(r.tokens == std::vector<std::string>{"but", "i", "do"});
  CHECK(r.index_map == std::vector<std::size_t>{0, 1, 2});

  // Partial-word check runs before cleanup, on the raw token.
  r = preprocess_tokens({"well\xE2\x80\x94", "yes"});
  CHECK(r.tokens == std::vector<std::string>{"yes"});
  CHECK(r.index_map == std::vector<std::size_t>{1});

  // Tokens that clean to nothing disappear, and the map skips them.
  r = preprocess_tokens({"?!", "Don\xE2\x80\x99t", "...", "STOP."});
  CHECK(r.tokens == std::vector<std::string>{"dont", "stop"});
  CHECK(r.index_map == std::vector<std::size_t>{1, 3});

  // Non-ASCII letters pass through; only ASCII is lowercased.
  r = preprocess_tokens({"Qu\xC3\xA9?"});
  CHECK(r.tokens == std::vector<std::string>{"qu\xC3\xA9"});

  CHECK(preprocess_tokens({}).empty());
  CHECK(preprocess_tokens({"-", "--", "\xE2\x80\x94"}).empty());
}

TEST_CASE("preprocess is idempotent") {
  std::vector<std::vector<std::string>> inputs = {
      {"But,", "I", "do", "abso-"},
      {"Don\xE2\x80\x99t", "STOP.", "(now)", "ok"},
      {"a", "b-", "c,d", "?!", "Mixed-Case"},
  };
  for (const auto& raw : inputs) {
    PreprocessResult once = preprocess_tokens(raw);
    PreprocessResult twice = preprocess_tokens(once.tokens);
    CHECK(twice.tokens == once.tokens);
    for (std::size_t i = 0; i < twice.index_map.size(); i++) {
      CHECK(twice.index_map[i] == i);
    }
  }
}

TEST_CASE("apply_index_map keeps parallel arrays aligned") {
  PreprocessResult r = preprocess_tokens({"But,", "I", "do", "abso-"});
  std::vector<Tag> tags = {Tag::kO, Tag::kI, Tag::kO, Tag::kI};
  std::vector<Tag> kept = apply_index_map(tags, r.index_map);
  CHECK(kept == std::vector<Tag>{Tag::kO, Tag::kI, Tag::kO});
}

TEST_CASE("file ids map to the conventional splits") {
  CHECK(assign_split("sw2005.dps") == CorpusSplit::kTrain);
  CHECK(assign_split("sw3123.dps") == CorpusSplit::kTrain);
  CHECK(assign_split("sw4617.dps") == CorpusSplit::kDev);
  CHECK(assign_split("sw4917.dps") == CorpusSplit::kDev);
  CHECK(assign_split("sw4104.dps") == CorpusSplit::kTest);
  CHECK(assign_split("sw4004.dps") == CorpusSplit::kTest);
  CHECK(assign_split("sw4210.dps") == CorpusSplit::kExcluded);
  CHECK(assign_split("sw4310.dps") == CorpusSplit::kExcluded);
  CHECK(assign_split("sw4") == CorpusSplit::kExcluded);
  CHECK(assign_split("other") == CorpusSplit::kExcluded);

  CHECK(assign_split("sw2300.dps", true) == CorpusSplit::kTrain);
  CHECK(assign_split("sw2005.dps", true) == CorpusSplit::kExcluded);
  CHECK(assign_split("sw3123.dps", true) == CorpusSplit::kExcluded);
  CHECK(assign_split("sw4617.dps", true) == CorpusSplit::kDev);
}

TEST_CASE("repetition insertion copies the next tokens and tags them I") {
  std::vector<std::string> fluent = {"but", "i", "grew", "up", "with", "cats"};
  DisfluencySpec spec;
  spec.type = DisfluencyType::kRepetition;
  spec.position = 1;
  spec.reparandum_len = 1;
  InjectorConfig cfg;
  cfg.cue_probability = 1.0;
  Utterance utt = inject_disfluency(fluent, spec, 7, cfg, "x");
  CHECK(utt.tokens ==
        std::vector<std::string>{"but", "i", "i", "grew", "up", "with", "cats"});
  CHECK(utt.tags == std::vector<Tag>{Tag::kO, Tag::kI, Tag::kO, Tag::kO, Tag::kO, Tag::kO,
                                     Tag::kO});
  CHECK(utt.channel ==
        std::vector<double>{0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0});

  spec.reparandum_len = 2;
  utt = inject_disfluency(fluent, spec, 7, cfg, "x");
  CHECK(utt.tokens == std::vector<std::string>{"but", "i", "grew", "i", "grew", "up", "with",
                                               "cats"});
  CHECK(utt.tags == std::vector<Tag>{Tag::kO, Tag::kI, Tag::kI, Tag::kO, Tag::kO, Tag::kO,
                                     Tag::kO, Tag::kO});
}

TEST_CASE("cue channel follows the cue coin") {
  std::vector<std::string> fluent = {"we", "like", "dogs"};
  DisfluencySpec spec;
  spec.type = DisfluencyType::kRepetition;
  spec.position = 0;
  spec.reparandum_len = 1;

  InjectorConfig never;
  never.cue_probability = 0.0;
  Utterance utt = inject_disfluency(fluent, spec, 3, never);
  CHECK(utt.channel == std::vector<double>{0.0, 0.0, 0.0, 0.0});

  InjectorConfig always;
  always.cue_probability = 1.0;
  always.cue_value = 0.25;
  utt = inject_disfluency(fluent, spec, 3, always);
  CHECK(utt.channel == std::vector<double>{0.25, 0.0, 0.0, 0.0});
}

TEST_CASE("repair ends with a fresh word, substitution differs everywhere") {
  std::vector<std::string> fluent = {"i", "want", "the", "book"};
  DisfluencySpec spec;
  spec.type = DisfluencyType::kRepair;
  spec.position = 1;
  spec.reparandum_len = 2;
  for (std::uint64_t seed = 0; seed < 20; seed++) {
    Utterance utt = inject_disfluency(fluent, spec, seed, {}, "r");
    REQUIRE(utt.tokens.size() == 6);
    CHECK(utt.tokens[1] == "want");       // copied continuation start
    CHECK(utt.tokens[2] != "the");        // fresh word differs from what follows
    CHECK(utt.fluent_tokens() == fluent);
  }

  spec.type = DisfluencyType::kSubstitution;
  spec.position = 0;
  spec.reparandum_len = 2;
  for (std::uint64_t seed = 0; seed < 20; seed++) {
    Utterance utt = inject_disfluency(fluent, spec, seed, {}, "s");
    REQUIRE(utt.tokens.size() == 6);
    CHECK(utt.tokens[0] != "i");
    CHECK(utt.tokens[1] != "want");
    CHECK(utt.fluent_tokens() == fluent);
  }
}

TEST_CASE("interregnum tagging is configurable") {
  std::vector<std::string> fluent = {"we", "went", "home"};
  DisfluencySpec spec;
  spec.type = DisfluencyType::kRestart;
  spec.position = 0;
  spec.reparandum_len = 2;
  spec.interregnum = "uh";

  InjectorConfig cued;
  cued.cue_probability = 1.0;
  Utterance utt = inject_disfluency(fluent, spec, 11, cued, "a");
  REQUIRE(utt.tokens.size() == 6);
  CHECK(utt.tokens[2] == "uh");
  CHECK(utt.tags[2] == Tag::kI);
  CHECK(utt.channel[2] == 1.0);
  CHECK(utt.fluent_tokens() == fluent);

  cued.tag_interregnum = false;
  utt = inject_disfluency(fluent, spec, 11, cued, "b");
  CHECK(utt.tokens[2] == "uh");
  CHECK(utt.tags[2] == Tag::kO);
  CHECK(utt.channel[2] == 0.0);
  // With the interregnum kept, removing I tokens keeps "uh" in the output.
  CHECK(utt.fluent_tokens() == std::vector<std::string>{"uh", "we", "went", "home"});
}

TEST_CASE("removing I tokens recovers the fluent sentence, exhaustively") {
  // Sentence w0..w{m-1}; every type, position, reparandum length, with and
  // without an interregnum.
  for (std::size_t m = 1; m <= 8; m++) {
    std::vector<std::string> fluent;
    for (std::size_t i = 0; i < m; i++) fluent.push_back("w" + std::to_string(i));
    for (int ti = 0; ti < static_cast<int>(kDisfluencyTypeCount); ti++) {
      auto type = static_cast<DisfluencyType>(ti);
      for (std::size_t pos = 0; pos < m; pos++) {
        for (std::size_t k = 1; k <= 3; k++) {
          bool fits = true;
          if (type == DisfluencyType::kRepetition || type == DisfluencyType::kSubstitution) {
            fits = pos + k <= m;
          } else if (type == DisfluencyType::kRepair) {
            fits = pos + k - 1 <= m;
          }
          for (int inter = 0; inter < 2; inter++) {
            DisfluencySpec spec;
            spec.type = type;
            spec.position = pos;
            spec.reparandum_len = k;
            if (inter) spec.interregnum = "uh";
            if (!fits) {
              CHECK_THROWS_AS(inject_disfluency(fluent, spec, 1, {}, "x"), DataError);
              continue;
            }
            Utterance utt = inject_disfluency(fluent, spec, 1, {}, "x");
            utt.validate();
            CHECK(utt.fluent_tokens() == fluent);
            CHECK(utt.tokens.size() == m + k + (inter ? 1 : 0));
            // Inserted tokens form one contiguous I block at pos.
            std::size_t extra = utt.tokens.size() - m;
            for (std::size_t i = 0; i < utt.tokens.size(); i++) {
              Tag want = (i >= pos && i < pos + extra) ? Tag::kI : Tag::kO;
              CHECK(utt.tags[i] == want);
            }
          }
        }
      }
    }
  }
}

TEST_CASE("invalid injection specs are rejected") {
  std::vector<std::string> fluent = {"a", "b"};
  DisfluencySpec spec;
  spec.position = 2;
  CHECK_THROWS_AS(inject_disfluency(fluent, spec, 0), DataError);
  spec.position = 0;
  spec.reparandum_len = 0;
  CHECK_THROWS_AS(inject_disfluency(fluent, spec, 0), DataError);
  spec.reparandum_len = 3;
  spec.type = DisfluencyType::kRepetition;
  CHECK_THROWS_AS(inject_disfluency(fluent, spec, 0), DataError);
  CHECK_THROWS_AS(inject_disfluency({}, DisfluencySpec{}, 0), DataError);
}

TEST_CASE("utterance lines survive escaping") {
  Utterance utt;
  utt.id = "odd id\twith\\stuff#1";
  utt.tokens = {"plain", "two words", "tab\there", "hash#tag", "back\\slash"};
  utt.tags = {Tag::kO, Tag::kI, Tag::kO, Tag::kI, Tag::kO};
  utt.channel = {0.0, 1.0, 0.25, -0.5, 0.001};
  std::string line = format_utterance_line(utt);
  CHECK(line.find('\n') == std::string::npos);
  Utterance back = parse_utterance_line(line, 1);
  CHECK(same_utterance(utt, back));

  // Newlines in tokens stay on one line too.
  utt.tokens[0] = "line\nbreak";
  back = parse_utterance_line(format_utterance_line(utt), 1);
  CHECK(back.tokens[0] == "line\nbreak");
}

TEST_CASE("corpus files round trip byte for byte") {
  GeneratorConfig cfg;
  cfg.count = 120;
  cfg.seed = 42;
  std::vector<Utterance> corpus = generate_corpus(cfg);

  auto p1 = tmp_file("corpus_a");
  auto p2 = tmp_file("corpus_b");
  write_corpus(p1.string(), corpus);
  std::vector<Utterance> back = read_corpus(p1.string());
  REQUIRE(back.size() == corpus.size());
  for (std::size_t i = 0; i < corpus.size(); i++) {
    CHECK(same_utterance(corpus[i], back[i]));
  }
  write_corpus(p2.string(), back);
  CHECK(slurp(p1) == slurp(p2));
  std::filesystem::remove(p1);
  std::filesystem::remove(p2);
}

TEST_CASE("comments and blank lines are skipped") {
  auto p = tmp_file("corpus_comments");
  {
    std::ofstream out(p);
    out << "# header comment\n";
    out << "\n";
    out << "u1\ta b\tO I\t0 1\n";
    out << "# trailing\n";
  }
  std::vector<Utterance> back = read_corpus(p.string());
  REQUIRE(back.size() == 1);
  CHECK(back[0].id == "u1");
  CHECK(back[0].tokens == std::vector<std::string>{"a", "b"});
  CHECK(back[0].tags == std::vector<Tag>{Tag::kO, Tag::kI});
  CHECK(back[0].channel == std::vector<double>{0.0, 1.0});
  std::filesystem::remove(p);
}

TEST_CASE("malformed lines name the line and the problem") {
  auto check_throws = [](const std::string& line, const std::string& needle) {
    try {
      parse_utterance_line(line, 3);
      FAIL_CHECK("no error for: " << line);
    } catch (const DataError& e) {
      CHECK(message_contains(e, "line 3"));
      CHECK(message_contains(e, needle));
    }
  };
  check_throws("only_id", "expected 4 tab-separated fields");
  check_throws("id\ta b\tO\t0 0", "lengths differ");
  check_throws("id\ta\tX\t0", "tag");
  check_throws("id\ta\tOI\t0", "tag");
  check_throws("id\ta\tO\tzero", "decimal");
  check_throws("id\ta\\q\tO\t0", "escape");
  check_throws("id\\\ta\tO\t0", "escape");
}

TEST_CASE("tag files write and read, and accept corpus lines") {
  GeneratorConfig cfg;
  cfg.count = 10;
  cfg.seed = 5;
  std::vector<Utterance> corpus = generate_corpus(cfg);
  std::vector<std::vector<Tag>> tags;
  for (const Utterance& u : corpus) tags.push_back(u.tags);

  auto p = tmp_file("tags");
  write_tags(p.string(), corpus, tags);
  auto back = read_tags(p.string());
  REQUIRE(back.size() == corpus.size());
  for (std::size_t i = 0; i < corpus.size(); i++) {
    CHECK(back[i].first == corpus[i].id);
    CHECK(back[i].second == corpus[i].tags);
  }
  std::filesystem::remove(p);

  auto pc = tmp_file("tags_from_corpus");
  write_corpus(pc.string(), corpus);
  back = read_tags(pc.string());
  REQUIRE(back.size() == corpus.size());
  for (std::size_t i = 0; i < corpus.size(); i++) {
    CHECK(back[i].first == corpus[i].id);
    CHECK(back[i].second == corpus[i].tags);
  }
  std::filesystem::remove(pc);

  CHECK_THROWS_AS(write_tags("/nonexistent-dir/x.tsv", corpus, tags), DataError);
  CHECK_THROWS_AS(write_tags(p.string(), corpus, {}), DataError);
}

TEST_CASE("generated corpora are deterministic and well formed") {
  GeneratorConfig cfg;
  cfg.count = 600;
  cfg.seed = 9;
  std::vector<Utterance> a = generate_corpus(cfg);
  std::vector<Utterance> b = generate_corpus(cfg);
  REQUIRE(a.size() == 600);
  REQUIRE(b.size() == 600);
  for (std::size_t i = 0; i < a.size(); i++) {
    CHECK(same_utterance(a[i], b[i]));
  }
  cfg.seed = 10;
  std::vector<Utterance> c = generate_corpus(cfg);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size(); i++) {
    if (!same_utterance(a[i], c[i])) any_diff = true;
  }
  CHECK(any_diff);

  std::size_t fluent_count = 0;
  std::set<std::string> ids;
  for (const Utterance& u : a) {
    u.validate();
    ids.insert(u.id);
    bool any_i = false;
    for (Tag t : u.tags) any_i = any_i || t == Tag::kI;
    if (!any_i) fluent_count++;
    // The underlying fluent sentence never repeats a word back to back.
    std::vector<std::string> fluent = u.fluent_tokens();
    for (std::size_t i = 0; i + 1 < fluent.size(); i++) {
      CHECK(fluent[i] != fluent[i + 1]);
    }
    CHECK(fluent.size() >= cfg.min_sentence_len);
    CHECK(fluent.size() <= cfg.max_sentence_len);
  }
  CHECK(ids.size() == a.size());
  // Loose two-sided bound around the 1/6 fluent fraction.
  CHECK(fluent_count > 50);
  CHECK(fluent_count < 200);
}

TEST_CASE("ambiguous pairs share text and differ only in labels and cue") {
  AmbiguousConfig cfg;
  cfg.pair_count = 50;
  cfg.seed = 4;
  std::vector<Utterance> corpus = generate_ambiguous_corpus(cfg);
  REQUIRE(corpus.size() == 100);
  for (std::size_t n = 0; n < cfg.pair_count; n++) {
    const Utterance& d = corpus[2 * n];
    const Utterance& f = corpus[2 * n + 1];
    d.validate();
    f.validate();
    CHECK(d.id.size() > 2);
    CHECK(d.id.substr(d.id.size() - 2) == "-d");
    CHECK(f.id.substr(f.id.size() - 2) == "-f");
    CHECK(d.id.substr(0, d.id.size() - 2) == f.id.substr(0, f.id.size() - 2));
    CHECK(d.tokens == f.tokens);

    std::size_t i_count = 0, i_pos = 0;
    for (std::size_t i = 0; i < d.tags.size(); i++) {
      if (d.tags[i] == Tag::kI) {
        i_count++;
        i_pos = i;
      }
    }
    REQUIRE(i_count == 1);
    REQUIRE(i_pos + 1 < d.tokens.size());
    CHECK(d.tokens[i_pos] == d.tokens[i_pos + 1]);
    for (std::size_t i = 0; i < d.channel.size(); i++) {
      CHECK(d.channel[i] == (i == i_pos ? cfg.cue_value : 0.0));
      CHECK(f.channel[i] == 0.0);
      CHECK(f.tags[i] == Tag::kO);
    }
  }

  std::vector<Utterance> again = generate_ambiguous_corpus(cfg);
  for (std::size_t i = 0; i < corpus.size(); i++) {
    CHECK(same_utterance(corpus[i], again[i]));
  }
}

TEST_CASE("builtin lexicon suits the generators") {
  const auto& lex = builtin_lexicon();
  CHECK(lex.size() >= 40);
  std::set<std::string> uniq(lex.begin(), lex.end());
  CHECK(uniq.size() == lex.size());
  CHECK(uniq.count("uh") == 0);  // reserved for interregna
  for (const std::string& w : lex) {
    REQUIRE(!w.empty());
    for (char c : w) {
      CHECK(c >= 'a');
      CHECK(c <= 'z');
    }
  }
}

}  // TEST_SUITE
