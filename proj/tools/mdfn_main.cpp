// Command-line front end: synthetic corpus generation, training, evaluation,
// prediction, and a finite-difference gradient audit.
//
// Exit codes: 0 success, 1 usage or shape problems, 2 data problems
// (files, formats), 3 numeric failures (divergence, gradient mismatch).

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mdfn/checkpoint.h"
#include "mdfn/corpus.h"
#include "mdfn/encoders.h"
#include "mdfn/error.h"
#include "mdfn/gradcheck.h"
#include "mdfn/matrix.h"
#include "mdfn/metrics.h"
#include "mdfn/model.h"
#include "mdfn/param_store.h"
#include "mdfn/rng.h"
#include "mdfn/spanlab.h"
#include "mdfn/tape.h"
#include "mdfn/train.h"

namespace {

struct GenerateArgs {
  std::string out;
  std::size_t count = 100;
  std::uint64_t seed = 0;
  bool ambiguous = false;
  double fluent_fraction = 1.0 / 6.0;
  double cue_probability = 0.9;
  double cue_value = 1.0;
  double interregnum_probability = 0.25;
  std::size_t min_len = 5;
  std::size_t max_len = 9;
  std::string id_prefix;
};

struct TrainArgs {
  std::string train_path;
  std::string dev_path;
  std::string out;
  std::string metrics_path;
  mdfn::TrainConfig config;
  std::uint64_t embed_seed = 1;
  mdfn::ToyFrameConfig frame_config;
  std::string precision = "f64";
  bool quiet = false;
};

struct PredictArgs {
  std::string in;
  std::string checkpoint;
  std::string out;
};

struct EvaluateArgs {
  std::string gold;
  std::string pred;
  std::string in;
  std::string checkpoint;
  std::string json_path;
};

struct GradcheckArgs {
  std::size_t d = 8;
  std::size_t heads = 2;
  std::size_t m = 4;
  std::size_t j = 6;
  std::size_t max_span_len = 3;
  std::size_t len_dim = 100;
  std::size_t seeds = 1;
  std::uint64_t seed = 1;
  double step = 1e-4;
  double tolerance = 1e-4;
};

int run_generate(const GenerateArgs& args) {
  std::vector<mdfn::Utterance> corpus;
  if (args.ambiguous) {
    mdfn::AmbiguousConfig config;
    config.pair_count = args.count;
    config.seed = args.seed;
    config.cue_value = args.cue_value;
    config.min_sentence_len = args.min_len;
    config.max_sentence_len = args.max_len;
    if (!args.id_prefix.empty()) config.id_prefix = args.id_prefix;
    corpus = generate_ambiguous_corpus(config);
  } else {
    mdfn::GeneratorConfig config;
    config.count = args.count;
    config.seed = args.seed;
    config.fluent_fraction = args.fluent_fraction;
    config.interregnum_probability = args.interregnum_probability;
    config.min_sentence_len = args.min_len;
    config.max_sentence_len = args.max_len;
    config.injector.cue_probability = args.cue_probability;
    config.injector.cue_value = args.cue_value;
    if (!args.id_prefix.empty()) config.id_prefix = args.id_prefix;
    corpus = generate_corpus(config);
  }
  mdfn::write_corpus(args.out, corpus);
  std::printf("wrote %zu utterances to %s\n", corpus.size(), args.out.c_str());
  return 0;
}

mdfn::Precision parse_precision(const std::string& name) {
  if (name == "f32") return mdfn::Precision::kF32;
  if (name == "f64") return mdfn::Precision::kF64;
  throw CLI::ValidationError("--precision", "expected f32 or f64, got '" + name + "'");
}

int run_train(TrainArgs& args) {
  args.config.precision = parse_precision(args.precision);
  std::vector<mdfn::Utterance> train_set = mdfn::read_corpus(args.train_path);
  std::vector<mdfn::Utterance> dev_set;
  if (!args.dev_path.empty()) dev_set = mdfn::read_corpus(args.dev_path);

  mdfn::ToyProvider provider(args.config.model.cme.d, args.embed_seed, args.frame_config);
  mdfn::TrainResult result = mdfn::train(train_set, dev_set, provider, args.config);

  if (!args.quiet) {
    for (const mdfn::EpochLog& log : result.log) {
      if (log.dev_f1 >= 0.0) {
        std::printf("epoch %zu  loss %.6f  dev_f1 %.2f\n", log.epoch, log.mean_loss, log.dev_f1);
      } else {
        std::printf("epoch %zu  loss %.6f\n", log.epoch, log.mean_loss);
      }
    }
    if (result.best_epoch > 0) {
      std::printf("best epoch %zu  dev_f1 %.2f\n", result.best_epoch, result.best_dev_f1);
    }
  }

  if (!args.metrics_path.empty()) {
    std::FILE* out = std::fopen(args.metrics_path.c_str(), "wb");
    if (!out) throw mdfn::DataError(args.metrics_path + ": cannot open for writing");
    for (const mdfn::EpochLog& log : result.log) {
      nlohmann::json record;
      record["epoch"] = log.epoch;
      record["loss"] = log.mean_loss;
      if (log.train_f1 >= 0.0) record["train_f1"] = log.train_f1;
      if (log.dev_f1 >= 0.0) {
        record["dev_precision"] = log.dev_precision;
        record["dev_recall"] = log.dev_recall;
        record["dev_f1"] = log.dev_f1;
      }
      std::string line = record.dump();
      std::fwrite(line.data(), 1, line.size(), out);
      std::fputc('\n', out);
    }
    std::fclose(out);
  }

  mdfn::Checkpoint checkpoint;
  checkpoint.meta.model = args.config.model;
  checkpoint.meta.embed_seed = args.embed_seed;
  checkpoint.meta.frame_config = args.frame_config;
  checkpoint.meta.train_seed = args.config.seed;
  checkpoint.meta.precision = args.config.precision;
  checkpoint.params = result.params;
  mdfn::save_checkpoint(args.out, checkpoint);
  if (!args.quiet) std::printf("saved checkpoint to %s\n", args.out.c_str());
  return 0;
}

std::vector<std::vector<mdfn::Tag>> predict_corpus(const std::vector<mdfn::Utterance>& corpus,
                                                   const mdfn::Checkpoint& checkpoint) {
  mdfn::ToyProvider provider = mdfn::provider_from_meta(checkpoint.meta);
  std::vector<std::vector<mdfn::Tag>> tags;
  tags.reserve(corpus.size());
  for (const mdfn::Utterance& utt : corpus) {
    tags.push_back(mdfn::predict_tags(utt, provider, checkpoint.params, checkpoint.meta.model));
  }
  return tags;
}

int run_predict(const PredictArgs& args) {
  std::vector<mdfn::Utterance> corpus = mdfn::read_corpus(args.in);
  mdfn::Checkpoint checkpoint = mdfn::load_checkpoint(args.checkpoint);
  std::vector<std::vector<mdfn::Tag>> tags = predict_corpus(corpus, checkpoint);
  mdfn::write_tags(args.out, corpus, tags);
  std::printf("wrote tags for %zu utterances to %s\n", corpus.size(), args.out.c_str());
  return 0;
}

int run_evaluate(const EvaluateArgs& args) {
  bool tag_mode = !args.gold.empty() || !args.pred.empty();
  bool corpus_mode = !args.in.empty() || !args.checkpoint.empty();
  if (tag_mode == corpus_mode) {
    throw CLI::ValidationError("evaluate",
                               "use either --gold with --pred, or --in with --checkpoint");
  }

  mdfn::EvalReport report;
  if (tag_mode) {
    if (args.gold.empty() || args.pred.empty()) {
      throw CLI::ValidationError("evaluate", "--gold and --pred go together");
    }
    report = mdfn::evaluate_tags(mdfn::read_tags(args.gold), mdfn::read_tags(args.pred));
  } else {
    if (args.in.empty() || args.checkpoint.empty()) {
      throw CLI::ValidationError("evaluate", "--in and --checkpoint go together");
    }
    std::vector<mdfn::Utterance> corpus = mdfn::read_corpus(args.in);
    mdfn::Checkpoint checkpoint = mdfn::load_checkpoint(args.checkpoint);
    report = mdfn::evaluate_tags(corpus, predict_corpus(corpus, checkpoint));
  }

  std::printf("precision %6.2f\n", report.precision);
  std::printf("recall    %6.2f\n", report.recall);
  std::printf("f1        %6.2f\n", report.f1);
  std::printf("tp %zu  fp %zu  fn %zu\n", report.tp, report.fp, report.fn);

  if (!args.json_path.empty()) {
    nlohmann::json record;
    record["precision"] = report.precision;
    record["recall"] = report.recall;
    record["f1"] = report.f1;
    record["tp"] = report.tp;
    record["fp"] = report.fp;
    record["fn"] = report.fn;
    std::string line = record.dump();
    if (args.json_path == "-") {
      std::printf("%s\n", line.c_str());
    } else {
      std::FILE* out = std::fopen(args.json_path.c_str(), "wb");
      if (!out) throw mdfn::DataError(args.json_path + ": cannot open for writing");
      std::fwrite(line.data(), 1, line.size(), out);
      std::fputc('\n', out);
      std::fclose(out);
    }
  }
  return 0;
}

int run_gradcheck(const GradcheckArgs& args) {
  double worst = 0.0;
  for (std::size_t s = 0; s < args.seeds; ++s) {
    std::uint64_t seed = args.seed + s;
    mdfn::ModelConfig model;
    model.cme.d = args.d;
    model.cme.heads = args.heads;
    model.max_span_len = args.max_span_len;
    model.len_dim = args.len_dim;

    mdfn::Rng rng(mdfn::mix64(seed ^ 0x6763686bull));
    mdfn::Matrix t(args.m, args.d);
    for (std::size_t i = 0; i < t.size(); i++) t.data()[i] = rng.normal();
    mdfn::Matrix a(args.j, args.d);
    for (std::size_t i = 0; i < a.size(); i++) a.data()[i] = rng.normal();
    std::vector<mdfn::Tag> tags(args.m, mdfn::Tag::kO);
    for (std::size_t i = 0; i < args.m; i++) {
      if (rng.coin(0.4)) tags[i] = mdfn::Tag::kI;
    }

    mdfn::ParamStore params(seed);
    mdfn::add_model_params(params, model);

    auto loss_fn = [&](mdfn::ParamStore& store) {
      mdfn::Tape tape;
      mdfn::TapeBinding binding(tape, store);
      return tape.value(mdfn::utterance_loss_vars(tape, t, a, tags, binding, model))(0, 0);
    };
    auto grad_fn = [&](mdfn::ParamStore& store) {
      store.zero_grads();
      mdfn::Tape tape;
      mdfn::TapeBinding binding(tape, store);
      mdfn::Var loss = mdfn::utterance_loss_vars(tape, t, a, tags, binding, model);
      tape.backward(loss);
      binding.accumulate_grads();
    };
    mdfn::GradCheckResult result = mdfn::finite_diff_check(loss_fn, grad_fn, params, args.step);
    std::printf("seed %llu  max rel err %.3e\n",
                static_cast<unsigned long long>(seed), result.max_rel_err);
    worst = std::max(worst, result.max_rel_err);
  }
  std::printf("max rel err %.3e over %zu seed%s (tolerance %.1e)\n", worst, args.seeds,
              args.seeds == 1 ? "" : "s", args.tolerance);
  if (worst >= args.tolerance) {
    std::printf("FAIL: analytic and numeric gradients disagree\n");
    return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal disfluency tagger: synthetic corpora, training, scoring"};
  app.require_subcommand(1);

  GenerateArgs gen;
  CLI::App* generate = app.add_subcommand("generate", "Write a synthetic corpus file");
  generate->add_option("--out", gen.out, "Corpus file to write")->required();
  generate->add_option("--n", gen.count, "Utterance count (pair count with --ambiguous)");
  generate->add_option("--seed", gen.seed, "Generator seed");
  generate->add_flag("--ambiguous", gen.ambiguous,
                     "Paired corpus: same text fluent/disfluent, cue only in the channel");
  generate->add_option("--fluent-fraction", gen.fluent_fraction, "Share of fluent utterances");
  generate->add_option("--cue-probability", gen.cue_probability,
                       "Chance an injection carries the acoustic cue");
  generate->add_option("--cue-value", gen.cue_value, "Channel value on cued tokens");
  generate->add_option("--interregnum-probability", gen.interregnum_probability,
                       "Chance a restart gets a filler word");
  generate->add_option("--min-len", gen.min_len, "Minimum fluent sentence length");
  generate->add_option("--max-len", gen.max_len, "Maximum fluent sentence length");
  generate->add_option("--id-prefix", gen.id_prefix, "Utterance id prefix");

  TrainArgs tr;
  CLI::App* train_cmd = app.add_subcommand("train", "Train a model and save a checkpoint");
  train_cmd->add_option("--train", tr.train_path, "Training corpus")->required();
  train_cmd->add_option("--dev", tr.dev_path, "Dev corpus for model selection");
  train_cmd->add_option("--out", tr.out, "Checkpoint file to write")->required();
  train_cmd->add_option("--metrics", tr.metrics_path, "Per-epoch JSON-lines metrics file");
  train_cmd->add_option("--d", tr.config.model.cme.d, "Model width");
  train_cmd->add_option("--heads", tr.config.model.cme.heads, "Attention heads");
  train_cmd->add_option("--layers", tr.config.model.cme.layers, "Fusion block layers");
  train_cmd->add_option("--max-span-len", tr.config.model.max_span_len, "Longest span scored");
  train_cmd->add_option("--len-dim", tr.config.model.len_dim, "Span length code width");
  train_cmd->add_option("--threshold", tr.config.model.decision_threshold,
                        "Span probability needed to tag I");
  train_cmd->add_option("--positive-class-weight", tr.config.model.positive_class_weight,
                        "Loss weight on disfluent spans");
  train_cmd->add_flag("--ablate-audio", tr.config.model.ablate_audio,
                      "Zero the frames and hold the gate open (text-only model)");
  train_cmd->add_option("--epochs", tr.config.epochs, "Training epochs");
  train_cmd->add_option("--batch-size", tr.config.batch_size, "Utterances per optimizer step");
  train_cmd->add_option("--lr", tr.config.learning_rate, "Adam learning rate");
  train_cmd->add_option("--seed", tr.config.seed, "Initialization and shuffle seed");
  train_cmd->add_option("--max-steps", tr.config.max_steps, "Stop after this many steps");
  train_cmd->add_option("--stop-at-train-f1", tr.config.stop_at_train_f1,
                        "Stop once train F1 reaches this value");
  train_cmd->add_flag("--eval-train", tr.config.eval_train, "Score the train set each epoch");
  train_cmd->add_option("--precision", tr.precision, "f64 or f32 parameter trajectory");
  train_cmd->add_option("--embed-seed", tr.embed_seed, "Toy embedding seed");
  train_cmd->add_option("--noise-scale", tr.frame_config.noise_scale, "Frame noise scale");
  train_cmd->add_option("--position-weight", tr.frame_config.position_weight,
                        "Positional code weight in frames");
  train_cmd->add_flag("--quiet", tr.quiet, "No per-epoch console output");

  PredictArgs pr;
  CLI::App* predict_cmd = app.add_subcommand("predict", "Tag a corpus with a checkpoint");
  predict_cmd->add_option("--in", pr.in, "Corpus to tag")->required();
  predict_cmd->add_option("--checkpoint", pr.checkpoint, "Trained checkpoint")->required();
  predict_cmd->add_option("--out", pr.out, "Tags file to write")->required();

  EvaluateArgs ev;
  CLI::App* evaluate_cmd = app.add_subcommand("evaluate", "Score predictions against gold tags");
  evaluate_cmd->add_option("--gold", ev.gold, "Gold tags file");
  evaluate_cmd->add_option("--pred", ev.pred, "Predicted tags file");
  evaluate_cmd->add_option("--in", ev.in, "Gold corpus (with --checkpoint)");
  evaluate_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint to score");
  evaluate_cmd->add_option("--json", ev.json_path, "Write the report as JSON ('-' for stdout)");

  GradcheckArgs gc;
  CLI::App* gradcheck_cmd =
      app.add_subcommand("gradcheck", "Compare analytic gradients to central differences");
  gradcheck_cmd->add_option("--d", gc.d, "Model width");
  gradcheck_cmd->add_option("--heads", gc.heads, "Attention heads");
  gradcheck_cmd->add_option("--m", gc.m, "Token count");
  gradcheck_cmd->add_option("--j", gc.j, "Frame count");
  gradcheck_cmd->add_option("--max-span-len", gc.max_span_len, "Longest span scored");
  gradcheck_cmd->add_option("--len-dim", gc.len_dim, "Span length code width");
  gradcheck_cmd->add_option("--seeds", gc.seeds, "Seeds to try");
  gradcheck_cmd->add_option("--seed", gc.seed, "First seed");
  gradcheck_cmd->add_option("--step", gc.step, "Central difference step");
  gradcheck_cmd->add_option("--tolerance", gc.tolerance, "Max relative error allowed");

  try {
    app.parse(argc, argv);
    if (*generate) return run_generate(gen);
    if (*train_cmd) return run_train(tr);
    if (*predict_cmd) return run_predict(pr);
    if (*evaluate_cmd) return run_evaluate(ev);
    if (*gradcheck_cmd) return run_gradcheck(gc);
    return 1;
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);  // prints help or the error
    return code == 0 ? 0 : 1;
  } catch (const mdfn::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 2;
  } catch (const mdfn::NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 3;
  } catch (const mdfn::ShapeError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 1;
  }
}
