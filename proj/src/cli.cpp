// SPDX-License-Identifier: Apache-2.0
#include "rhnlm/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <optional>

#include "rhnlm/data.hpp"
#include "rhnlm/diagnostics.hpp"
#include "rhnlm/kernels.hpp"
#include "rhnlm/serialize.hpp"
#include "rhnlm/trainer.hpp"

namespace rhnlm::cli {
namespace {

namespace fs = std::filesystem;

struct Options {
  std::uint64_t seed = 1;
  // model
  std::size_t depth = 4;
  std::size_t hidden = 64;
  std::size_t embed = 0;
  std::size_t vocab_cap = 0;
  std::size_t vocab_size = 5;
  bool use_hsg = true;
  bool coupled = true;
  int precision = 64;
  double gate_bias = -2.5;
  std::optional<double> hsg_bias;
  double dropout_embed = 0.0;
  double dropout_state = 0.0;
  double dropout_output = 0.0;
  bool dropout_in_hsg = false;
  // training
  double lr = 1.0;
  double lr_decay = 1.0;
  std::size_t epochs = 1;
  std::size_t window = 35;
  std::size_t batch = 1;
  double l2 = 0.0;
  double clip = 10.0;
  std::size_t eval_every = 1;
  std::size_t log_every = 0;
  // paths
  std::string train_path, valid_path, test_path, corpus_path;
  std::string checkpoint, vocab_path, resume;
  std::string out = "out";
  // diagnostics
  std::string arch = "rhn+hsg";
  std::size_t horizon = 10;
  bool enumerate = false;
  std::size_t origin = 10;
  std::size_t max_lag = 20;
  std::size_t steps = 80;
  std::size_t bins = 20;
  // synth
  std::size_t lag = 50;
  std::size_t alphabet = 16;
  std::size_t sequences = 1000;
  std::size_t valid_sequences = 0;
};

ModelConfig model_config(const Options& o, std::size_t vocab) {
  ModelConfig c;
  c.depth = o.depth;
  c.hidden = o.hidden;
  c.embed = o.embed;
  c.vocab = vocab;
  c.coupled = o.coupled;
  c.use_hsg = o.use_hsg;
  c.dropout_embed = o.dropout_embed;
  c.dropout_state = o.dropout_state;
  c.dropout_output = o.dropout_output;
  c.dropout_in_hsg = o.dropout_in_hsg;
  c.gate_bias_init = o.gate_bias;
  c.hsg_bias_init = o.hsg_bias;
  c.precision = o.precision;
  c.validate();
  return c;
}

TrainConfig train_config(const Options& o) {
  TrainConfig t;
  t.initial_lr = o.lr;
  t.lr_decay = o.lr_decay;
  t.epochs = o.epochs;
  t.window = o.window;
  t.batch_size = o.batch;
  t.l2_lambda = o.l2;
  t.clip_norm = o.clip > 0.0 ? std::optional<double>(o.clip) : std::nullopt;
  t.seed = o.seed;
  t.eval_every = o.eval_every;
  t.log_every = o.log_every;
  t.validate();
  return t;
}

std::vector<std::uint32_t> read_corpus(const std::string& path, const Vocab& vocab,
                                       const char* what) {
  if (path.empty()) throw ContractError(std::string("cli: --") + what + " is required");
  const auto tokens = tokenize(read_text_file(path));
  return encode(vocab, tokens, Split::test).ids;
}

std::vector<std::uint32_t> random_tokens(std::size_t count, std::size_t vocab, std::uint64_t seed) {
  Rng rng(seed, stable_hash("cli.random_tokens"));
  std::vector<std::uint32_t> out(count);
  for (auto& t : out) t = static_cast<std::uint32_t>(rng.below(vocab));
  return out;
}

fs::path out_dir(const Options& o) {
  const fs::path dir(o.out);
  fs::create_directories(dir);
  return dir;
}

// A loaded model in either precision.
struct LoadedModel {
  ModelConfig config;
  TensorContainer container;
  std::optional<Vocab> vocab;
};

LoadedModel load_model(const Options& o) {
  LoadedModel m;
  auto loaded = load_checkpoint(o.checkpoint);
  m.config = loaded.config;
  m.container = std::move(loaded.container);
  fs::path vocab = o.vocab_path.empty() ? fs::path(o.checkpoint).parent_path() / "vocab.txt"
                                        : fs::path(o.vocab_path);
  if (fs::exists(vocab)) m.vocab = load_vocab(vocab);
  return m;
}

template <typename Real>
int train_impl(const Options& o, const ModelConfig& model, const TrainConfig& tc,
               const CorpusSplits& splits, std::ostream& out, std::ostream& err) {
  TrainOptions<Real> opts;
  opts.out_dir = fs::path(o.out);
  std::optional<ModelParams<Real>> start;
  std::optional<TrainState<Real>> resume;
  if (!o.resume.empty()) {
    const auto c = load_container(o.resume);
    const ModelConfig saved = config_from_pairs(c.meta);
    require(saved.vocab == model.vocab && saved.depth == model.depth && saved.hidden == model.hidden &&
                saved.use_hsg == model.use_hsg && saved.coupled == model.coupled,
            "cli: resume file was written for a different model configuration");
    start = params_from_container<Real>(c, model);
    resume = train_state_from_container<Real>(c, model);
    opts.initial_params = &*start;
    opts.resume = &*resume;
  }
  opts.on_row = [&](const CurveRow& row) {
    if (!row.valid_ppl) return;
    out << "epoch " << row.epoch << " step " << row.step << " train_loss "
        << format_real(row.train_loss) << " valid_ppl " << format_real(*row.valid_ppl)
        << " test_ppl " << format_real(*row.test_ppl) << " lr " << format_real(row.lr) << "\n";
  };
  const auto result = train<Real>(model, tc, splits, opts);
  if (result.diverged) {
    err << result.error << "\n";
    return kNumericalFailure;
  }
  out << "best valid_ppl " << format_real(result.state.best_valid) << "\n";
  return kOk;
}

int cmd_train(const Options& o, const std::string& config_echo, std::ostream& out,
              std::ostream& err) {
  if (o.train_path.empty() || o.valid_path.empty() || o.test_path.empty()) {
    throw ContractError("cli: train needs --train, --valid and --test");
  }
  const auto train_tokens = tokenize(read_text_file(o.train_path));
  const Vocab vocab = build_vocab(std::span<const std::string>(train_tokens), o.vocab_cap);
  const auto train_ids = encode(vocab, train_tokens, Split::train).ids;
  const auto valid_ids = read_corpus(o.valid_path, vocab, "valid");
  const auto test_ids = read_corpus(o.test_path, vocab, "test");
  const ModelConfig model = model_config(o, vocab.size());
  const TrainConfig tc = train_config(o);
  const fs::path dir = out_dir(o);
  write_text_file(dir / "config.txt", config_echo);
  save_vocab(dir / "vocab.txt", vocab);
  const CorpusSplits splits{train_ids, valid_ids, test_ids};
  out << "vocab " << vocab.size() << " params " << parameter_count(model) << " kernels "
      << kernels::isa_name(kernels::active_isa()) << "\n";
  return model.precision == 32 ? train_impl<float>(o, model, tc, splits, out, err)
                               : train_impl<double>(o, model, tc, splits, out, err);
}

template <typename Real>
int eval_impl(const Options& o, const LoadedModel& m, std::ostream& out) {
  require(m.vocab.has_value(), "cli: eval needs a vocabulary (--vocab or vocab.txt beside the checkpoint)");
  const auto params = params_from_container<Real>(m.container, m.config);
  const std::string path = o.corpus_path.empty() ? o.test_path : o.corpus_path;
  const auto ids = read_corpus(path, *m.vocab, "corpus");
  const auto losses = evaluate_token_losses(params, m.config, ids, o.window);
  double total = 0.0;
  for (double l : losses) total += l;
  const double mean = total / static_cast<double>(losses.size());
  std::string csv = "tokens,mean_loss,perplexity";
  std::string row = std::to_string(losses.size()) + "," + format_real(mean) + "," +
                    format_real(std::exp(mean));
  out << "tokens " << losses.size() << " perplexity " << format_real(std::exp(mean)) << "\n";
  if (m.vocab->contains("<query>")) {
    TokenCorpus c;
    c.ids = ids;
    const auto qs = query_positions(c, m.vocab->id("<query>"));
    double q = 0.0;
    for (auto i : qs) q += losses[i];
    if (!qs.empty()) {
      q /= static_cast<double>(qs.size());
      out << "query_positions " << qs.size() << " query_loss " << format_real(q) << "\n";
      csv += ",query_loss";
      row += "," + format_real(q);
    }
  }
  write_text_file(out_dir(o) / "eval.csv", csv + "\n" + row + "\n");
  return kOk;
}

int cmd_eval(const Options& o, std::ostream& out) {
  require(!o.checkpoint.empty(), "cli: eval needs --checkpoint");
  const LoadedModel m = load_model(o);
  return m.config.precision == 32 ? eval_impl<float>(o, m, out) : eval_impl<double>(o, m, out);
}

int cmd_gradcheck(const Options& o, std::ostream& out) {
  ModelConfig model = model_config(o, o.vocab_size);
  model.precision = 64;
  model.dropout_embed = model.dropout_state = model.dropout_output = 0.0;
  const auto params = init_model<double>(model, o.seed);
  const auto tokens = random_tokens(o.window + 1, model.vocab, o.seed);
  const std::span<const std::uint32_t> all(tokens);
  const auto r = gradient_check(params, model, all.subspan(0, o.window), all.subspan(1, o.window),
                                zero_carry<double>(model));
  constexpr double kTolerance = 1e-5;
  out << "max relative error " << format_real(r.max_rel_error) << " at " << r.worst_tensor << "["
      << r.worst_index << "] (analytic " << format_real(r.worst_analytic) << ", numeric "
      << format_real(r.worst_numeric) << ") over " << r.coordinates << " coordinates\n";
  return r.max_rel_error < kTolerance ? kOk : kNumericalFailure;
}

template <typename Real>
int probe_impl(const Options& o, const ModelConfig& model, const ModelParams<Real>& params,
               const std::optional<Vocab>& vocab, std::ostream& out) {
  std::vector<std::uint32_t> tokens;
  if (!o.corpus_path.empty()) {
    require(vocab.has_value(), "cli: probe with --corpus needs a vocabulary");
    tokens = read_corpus(o.corpus_path, *vocab, "corpus");
  } else {
    tokens = random_tokens(o.origin + o.max_lag + 2, model.vocab, o.seed);
  }
  const auto report = gradient_probe(params, model, tokens, o.origin, o.max_lag);
  const std::string csv = probe_report_csv(report);
  write_text_file(out_dir(o) / "probe.csv", csv);
  out << csv;
  return kOk;
}

int cmd_probe(const Options& o, std::ostream& out) {
  if (!o.checkpoint.empty()) {
    const LoadedModel m = load_model(o);
    if (m.config.precision == 32) {
      return probe_impl(o, m.config, params_from_container<float>(m.container, m.config), m.vocab, out);
    }
    return probe_impl(o, m.config, params_from_container<double>(m.container, m.config), m.vocab, out);
  }
  const ModelConfig model = model_config(o, o.vocab_size);
  return probe_impl(o, model, init_model<double>(model, o.seed), std::nullopt, out);
}

template <typename Real>
int hist_impl(const Options& o, const ModelConfig& model, const ModelParams<Real>& params,
              const std::optional<Vocab>& vocab, std::ostream& out) {
  std::vector<std::uint32_t> tokens;
  if (!o.corpus_path.empty()) {
    require(vocab.has_value(), "cli: hist with --corpus needs a vocabulary");
    tokens = read_corpus(o.corpus_path, *vocab, "corpus");
  } else {
    tokens = random_tokens(std::max<std::size_t>(o.steps * 4, 64), model.vocab, o.seed);
  }
  const auto h = gate_histogram(params, model, tokens, o.steps, o.bins, o.seed);
  const fs::path dir = out_dir(o);
  const std::string csv = histogram_csv(h);
  write_text_file(dir / "gate_histogram.csv", csv);
  write_text_file(dir / "gate_values.csv", gate_values_csv(h));
  out << "values " << h.total << "\n" << csv;
  return kOk;
}

int cmd_hist(const Options& o, std::ostream& out) {
  if (!o.checkpoint.empty()) {
    const LoadedModel m = load_model(o);
    if (m.config.precision == 32) {
      return hist_impl(o, m.config, params_from_container<float>(m.container, m.config), m.vocab, out);
    }
    return hist_impl(o, m.config, params_from_container<double>(m.container, m.config), m.vocab, out);
  }
  const ModelConfig model = model_config(o, o.vocab_size);
  return hist_impl(o, model, init_model<double>(model, o.seed), std::nullopt, out);
}

std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + std::to_string(v[i]);
  return s;
}

int cmd_paths(const Options& o, bool out_given, std::ostream& out) {
  const Architecture arch = parse_architecture(o.arch);
  const auto formula = path_lengths(arch, o.depth, o.horizon);
  out << join(formula.lengths) << "\n";
  std::optional<PathLengthReport> enumerated;
  if (o.enumerate) {
    enumerated = enumerate_path_lengths(arch, o.depth, o.horizon);
    out << "enumerated: " << join(enumerated->lengths) << "\n";
    out << (enumerated->lengths == formula.lengths ? "agree" : "DISCREPANCY") << "\n";
  }
  if (out_given) {
    write_text_file(out_dir(o) / "paths.csv",
                    path_report_csv(formula, enumerated ? &*enumerated : nullptr));
  }
  return kOk;
}

int cmd_synth(const Options& o, std::ostream& out) {
  CopyTaskSpec spec;
  spec.sequences = o.sequences;
  spec.valid_sequences = o.valid_sequences;
  spec.lag = o.lag;
  spec.alphabet = o.alphabet;
  spec.seed = o.seed;
  const CopyTask task = gen_copy_task(spec);
  CopyTaskSpec test_spec = spec;
  test_spec.seed = mix64(spec.seed);
  const CopyTask test = gen_copy_task(test_spec);
  auto text = [&](const TokenCorpus& c) {
    std::vector<std::string> toks;
    toks.reserve(c.ids.size());
    for (auto id : c.ids) toks.push_back(task.vocab.token(id));
    return detokenize(toks);
  };
  const fs::path dir = out_dir(o);
  write_text_file(dir / "train.txt", text(task.train));
  write_text_file(dir / "valid.txt", text(task.valid));
  write_text_file(dir / "test.txt", text(test.valid));
  out << "train " << task.train.size() << " valid " << task.valid.size() << " test "
      << test.valid.size() << " tokens written to " << dir.string() << "\n";
  return kOk;
}

void add_options(CLI::App& app, Options& o) {
  app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.add_option("--seed", o.seed, "Seed for every random draw");

  app.add_option("--depth", o.depth, "Highway layers per time step (L)")->check(CLI::PositiveNumber);
  app.add_option("--hidden", o.hidden, "Hidden size (n)")->check(CLI::PositiveNumber);
  app.add_option("--embed", o.embed, "Embedding size (m); 0 means same as hidden");
  app.add_option("--vocab-cap", o.vocab_cap, "Keep the N-1 most frequent train tokens plus <unk>; 0 keeps all");
  app.add_option("--vocab-size", o.vocab_size, "Vocabulary size for models without a corpus (gradcheck, probe, hist)");
  app.add_flag("--hsg,!--no-hsg", o.use_hsg, "Add the highway state gate");
  app.add_flag("--coupled,!--uncoupled", o.coupled, "Couple the carry gate to the transform gate (C = 1 - T)");
  app.add_option("--precision", o.precision, "Training precision in bits")->check(CLI::IsMember({32, 64}));
  app.add_option("--gate-bias", o.gate_bias, "Initial transform-gate bias (and state-gate bias unless --hsg-bias)");
  app.add_option("--hsg-bias", o.hsg_bias, "Initial state-gate bias");
  app.add_option("--dropout-embed", o.dropout_embed, "Variational dropout on embeddings");
  app.add_option("--dropout-state", o.dropout_state, "Variational dropout on the recurrent state entering layer 1");
  app.add_option("--dropout-output", o.dropout_output, "Variational dropout before the output projection");
  app.add_flag("--dropout-in-hsg", o.dropout_in_hsg, "Let the state gate read the dropped-out state");

  app.add_option("--lr", o.lr, "Initial learning rate");
  app.add_option("--lr-decay", o.lr_decay, "Learning-rate factor applied after each epoch");
  app.add_option("--epochs", o.epochs, "Training epochs");
  app.add_option("--window", o.window, "Truncated-BPTT window length");
  app.add_option("--batch", o.batch, "Parallel streams per step");
  app.add_option("--l2", o.l2, "L2 weight decay on matrices");
  app.add_option("--clip", o.clip, "Global gradient-norm clip; 0 disables");
  app.add_option("--eval-every", o.eval_every, "Epochs between validation passes");
  app.add_option("--log-every", o.log_every, "Extra learning-curve rows every N steps; 0 disables");

  app.add_option("--train", o.train_path, "Training text");
  app.add_option("--valid", o.valid_path, "Validation text");
  app.add_option("--test", o.test_path, "Test text");
  app.add_option("--corpus", o.corpus_path, "Text to evaluate or probe");
  app.add_option("--checkpoint", o.checkpoint, "Model checkpoint");
  app.add_option("--vocab", o.vocab_path, "Vocabulary file; defaults to vocab.txt beside the checkpoint");
  app.add_option("--resume", o.resume, "Resume training from a resume.ckpt file");
  app.add_option("--out", o.out, "Output directory");

  app.add_option("--arch", o.arch, "Path-length architecture: stacked, rhn, rhn+hsg");
  app.add_option("--horizon", o.horizon, "Time span T for path lengths")->check(CLI::PositiveNumber);
  app.add_flag("--enumerate", o.enumerate, "Also enumerate routes on the explicit unrolled graph");
  app.add_option("--origin", o.origin, "Probe origin time step");
  app.add_option("--max-lag", o.max_lag, "Largest probe lag")->check(CLI::PositiveNumber);
  app.add_option("--steps", o.steps, "Random time steps sampled for the gate histogram");
  app.add_option("--bins", o.bins, "Histogram bins")->check(CLI::PositiveNumber);

  app.add_option("--lag", o.lag, "Copy-task lag")->check(CLI::PositiveNumber);
  app.add_option("--alphabet", o.alphabet, "Copy-task alphabet size");
  app.add_option("--sequences", o.sequences, "Copy-task training sequences");
  app.add_option("--valid-sequences", o.valid_sequences, "Copy-task validation sequences; 0 means sequences/10");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Recurrent highway language models with highway state gating"};
  app.name(args.empty() ? "rhnlm" : fs::path(args.front()).filename().string());
  Options o;
  add_options(app, o);
  app.set_config("--config", "", "Flat key = value configuration file; flags override it");
  app.allow_config_extras(false);
  app.require_subcommand(1);
  auto* train = app.add_subcommand("train", "Train a model and write checkpoints and a learning curve")->fallthrough();
  auto* eval = app.add_subcommand("eval", "Perplexity of a checkpoint on a corpus")->fallthrough();
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of all gradients")->fallthrough();
  auto* probe = app.add_subcommand("probe", "Gradient norm through time")->fallthrough();
  auto* hist = app.add_subcommand("hist", "Histogram of state-gate values")->fallthrough();
  auto* paths = app.add_subcommand("paths", "Route lengths through the unrolled graph")->fallthrough();
  auto* synth = app.add_subcommand("synth", "Generate copy-task train/valid/test text")->fallthrough();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "cli: " << e.what() << "\n";
    return kContractViolation;
  }

  try {
    if (train->parsed()) return cmd_train(o, app.config_to_str(true, false), out, err);
    if (eval->parsed()) return cmd_eval(o, out);
    if (gradcheck->parsed()) return cmd_gradcheck(o, out);
    if (probe->parsed()) return cmd_probe(o, out);
    if (hist->parsed()) return cmd_hist(o, out);
    if (paths->parsed()) return cmd_paths(o, app.count("--out") > 0, out);
    if (synth->parsed()) return cmd_synth(o, out);
  } catch (const ContractError& e) {
    err << e.what() << "\n";
    return kContractViolation;
  } catch (const NumericalError& e) {
    err << e.what() << "\n";
    return kNumericalFailure;
  } catch (const fs::filesystem_error& e) {
    err << "cli: " << e.what() << "\n";
    return kContractViolation;
  }
  return kContractViolation;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace rhnlm::cli
