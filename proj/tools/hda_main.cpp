// hda: synthetic data, adversarial training, final classification, sweeps
// and gradient checks.
//
// Exit codes: 0 success, 1 configuration error, 2 I/O or data error,
// 3 non-finite loss, 4 gradient check failure.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>

#include "hda/checkpoint.hpp"
#include "hda/config.hpp"
#include "hda/gradcheck.hpp"
#include "hda/pipeline.hpp"

namespace fs = std::filesystem;
using namespace hda;

namespace {

enum ExitCode { kOk = 0, kConfigFailure = 1, kIoFailure = 2, kNumericFailure = 3, kGradcheckFailure = 4 };

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Overrides {
  std::string config_path;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
};

void add_config_options(CLI::App& cmd, Overrides& o) {
  cmd.add_option("--config", o.config_path, "key = value configuration file");
  for (const auto& key : config_keys()) {
    std::string dashed = key.name;
    std::replace(dashed.begin(), dashed.end(), '_', '-');
    std::string flags = "--" + dashed;
    if (dashed != key.name) flags += ",--" + key.name;
    o.options[key.name] = cmd.add_option(flags, o.values[key.name], key.help);
  }
}

RunConfig resolve(const Overrides& o) {
  RunConfig config = o.config_path.empty() ? RunConfig{} : load_config(o.config_path);
  for (const auto& [key, option] : o.options)
    if (option->count() > 0) set_config_value(config, key, o.values.at(key));
  validate(config);
  std::cerr << "# effective configuration\n" << echo_config(config);
  return config;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::trunc) {
  std::ofstream out(path, mode);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  if (!out.flush()) throw IoError("failed writing '" + path.string() + "'");
}

int cmd_synth_data(const RunConfig& config) {
  if (config.data != DataKind::kSynthetic) throw ConfigError("synth-data requires data = synthetic");
  const auto [source, target] = generate_synthetic_pair(config.synthetic);
  const fs::path dir = config.out_dir;
  ensure_dir(dir);
  save_hdad(dir / "source.hdad", source);
  save_hdad(dir / "target.hdad", target);

  std::string manifest;
  manifest += "source_file = source.hdad\ntarget_file = target.hdad\n";
  manifest += "num_classes = " + std::to_string(config.synthetic.num_classes) + "\n";
  manifest += "per_class = " + std::to_string(config.synthetic.per_class) + "\n";
  manifest += "source_shape = " + to_string(source.shape()) + "\n";
  manifest += "target_shape = " + to_string(target.shape()) + "\n";
  manifest += "data_seed = " + std::to_string(config.synthetic.seed) + "\n";
  manifest += "source_count = " + std::to_string(source.size()) + "\n";
  manifest += "target_count = " + std::to_string(target.size()) + "\n";
  std::vector<std::size_t> src_counts(source.num_classes()), tgt_counts(target.num_classes());
  for (std::size_t i = 0; i < source.size(); ++i) ++src_counts[static_cast<std::size_t>(*source.label(i))];
  for (std::size_t i = 0; i < target.size(); ++i) ++tgt_counts[static_cast<std::size_t>(*target.label(i))];
  for (std::size_t c = 0; c < source.num_classes(); ++c) {
    manifest += "class." + std::to_string(c) + " = " + source.class_names()[c] + " source=" +
                std::to_string(src_counts[c]) + " target=" + std::to_string(tgt_counts[c]) + "\n";
  }
  write_text(dir / "manifest.txt", manifest);
  std::cerr << "wrote " << (dir / "source.hdad").string() << ", " << (dir / "target.hdad").string() << " and "
            << (dir / "manifest.txt").string() << "\n";
  return kOk;
}

TrainResult train_into(const fs::path& dir, const RunConfig& config, std::size_t n_yt,
                       ModelBundle& bundle, const PreparedData& prepared) {
  ensure_dir(dir);
  auto trace = open_out(dir / "trace.csv");
  trace << trace_csv_header() << "\n";
  TrainHooks hooks;
  hooks.on_step = [&](const StepTrace& t) {
    trace << to_csv_row(t) << "\n";
    if (config.training.log_every > 0 && t.iteration % config.training.log_every == 0) {
      std::fprintf(stderr, "[n_yt=%zu] iter %zu  gan %.4f/%.4f  cycle %.4f  metric %.4f/%.4f  classif %.4f/%.4f  %.1f ms\n",
                   n_yt, t.iteration, t.report.gan_s2t, t.report.gan_t2s, t.report.cycle, t.report.metric_s2t,
                   t.report.metric_t2s, t.report.classif_s, t.report.classif_t, t.ms);
    }
  };
  hooks.on_checkpoint = [&](std::size_t, const ModelBundle& b) { save_bundle(dir, b); };
  TrainResult result = train(bundle, prepared.source, prepared.target_train, config.training, hooks);
  if (!trace.flush()) throw IoError("failed writing trace.csv");
  save_bundle(dir, bundle);
  RunConfig trained = config;
  trained.n_yt = n_yt;
  write_text(dir / "config.txt", echo_config(trained));
  if (!result.source_pretrain.skipped && config.training.iterations > 0) {
    std::fprintf(stderr, "C_s pretrain accuracy %.2f%%\n", result.source_pretrain.train_accuracy);
  }
  if (result.target_pretrain.skipped) std::fprintf(stderr, "C_t pretraining skipped (no labeled target)\n");
  return result;
}

int cmd_train(const RunConfig& config) {
  const DomainData data = load_domains(config);
  const PreparedData prepared = prepare(data, config, config.n_yt);
  ModelBundle bundle = make_bundle(config, prepared);
  train_into(config.out_dir, config, config.n_yt, bundle, prepared);
  std::cerr << "checkpoints and trace written to " << config.out_dir << "\n";
  return kOk;
}

void append_metrics(const fs::path& path, const std::string& row) {
  const bool fresh = !fs::exists(path);
  auto out = open_out(path, std::ios::app);
  if (fresh) out << metrics_header() << "\n";
  out << row << "\n";
  if (!out.flush()) throw IoError("failed writing '" + path.string() + "'");
}

int cmd_classify(const RunConfig& config) {
  const fs::path dir = config.out_dir;
  if (config.strategy != Strategy::kBaseline) {
    const fs::path trained_path = dir / "config.txt";
    if (!fs::exists(trained_path)) throw IoError("no trained run in '" + dir.string() + "' (config.txt missing)");
    const RunConfig trained = load_config(trained_path);
    if (trained.n_yt != config.n_yt) {
      throw ConfigError("checkpoints in '" + dir.string() + "' were trained with n_yt = " +
                        std::to_string(trained.n_yt) + ", requested " + std::to_string(config.n_yt));
    }
  }
  const DomainData data = load_domains(config);
  const PreparedData prepared = prepare(data, config, config.n_yt);
  ModelBundle bundle = make_bundle(config, prepared);
  if (config.strategy != Strategy::kBaseline) load_bundle(dir, bundle);
  const double accuracy = run_strategy(bundle, prepared, config, config.strategy);
  const std::string row = metrics_row(config.strategy, config.n_yt, accuracy, config.training.seed);
  ensure_dir(dir);
  append_metrics(dir / "metrics.csv", row);
  std::cout << metrics_header() << "\n" << row << "\n";
  return kOk;
}

int cmd_sweep(const RunConfig& config) {
  const DomainData data = load_domains(config);
  const fs::path dir = config.out_dir;
  ensure_dir(dir);
  std::vector<std::size_t> budgets = config.budgets;
  std::sort(budgets.rbegin(), budgets.rend());
  budgets.erase(std::unique(budgets.begin(), budgets.end()), budgets.end());

  std::vector<BudgetResult> rows;
  std::string csv = metrics_header() + "\n";
  for (std::size_t n_yt : budgets) {
    const PreparedData prepared = prepare(data, config, n_yt);
    ModelBundle bundle = make_bundle(config, prepared);
    BudgetResult row;
    row.n_yt = n_yt;
    row.training = train_into(dir / ("n_yt_" + std::to_string(n_yt)), config, n_yt, bundle, prepared);
    for (Strategy s : kAllStrategies) {
      if (s == Strategy::kBaseline && n_yt == 0) {
        row.accuracy[s] = std::nullopt;
        continue;
      }
      const double acc = run_strategy(bundle, prepared, config, s);
      row.accuracy[s] = acc;
      csv += metrics_row(s, n_yt, acc, config.training.seed) + "\n";
      std::fprintf(stderr, "n_yt=%zu %s: %s\n", n_yt, to_string(s).c_str(), format_accuracy(acc).c_str());
    }
    rows.push_back(std::move(row));
  }
  const std::string table = format_table(rows);
  write_text(dir / "metrics.csv", csv);
  write_text(dir / "table.txt", table);
  std::cout << table;
  return kOk;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t trials) {
  const auto suite = gradcheck::run_suite(seed, trials);
  std::printf("%-24s %5s %8s %12s %12s %s\n", "case", "trial", "elements", "max_abs_err", "max_rel_err", "status");
  for (const auto& c : suite.cases) {
    std::printf("%-24s %5zu %8zu %12.3e %12.3e %s\n", c.name.c_str(), c.trial, c.elements, c.max_abs_err,
                c.max_rel_err, c.passed ? "PASS" : "FAIL");
  }
  std::printf("%zu cases, %zu failures, %.2f s\n", suite.cases.size(), suite.failures(), suite.seconds);
  return suite.all_passed() ? kOk : kGradcheckFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heterogeneous domain adaptation toolkit"};
  app.require_subcommand(1);

  Overrides synth_o, train_o, classify_o, sweep_o;
  auto* synth = app.add_subcommand("synth-data", "write synthetic source/target HDAD dumps and a manifest");
  add_config_options(*synth, synth_o);
  auto* train_cmd = app.add_subcommand("train", "pretrain classifiers, run adversarial training, save checkpoints");
  add_config_options(*train_cmd, train_o);
  auto* classify = app.add_subcommand("classify", "train and evaluate the final classifier for one strategy");
  add_config_options(*classify, classify_o);
  auto* sweep = app.add_subcommand("sweep", "train and classify every strategy for each label budget");
  add_config_options(*sweep, sweep_o);
  auto* grad = app.add_subcommand("gradcheck", "finite-difference check of every primitive and loss");
  std::uint64_t grad_seed = 1;
  std::size_t grad_trials = 3;
  grad->add_option("--seed", grad_seed, "random seed");
  grad->add_option("--trials", grad_trials, "randomized trials per case");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigFailure;
  }

  try {
    if (*synth) return cmd_synth_data(resolve(synth_o));
    if (*train_cmd) return cmd_train(resolve(train_o));
    if (*classify) return cmd_classify(resolve(classify_o));
    if (*sweep) return cmd_sweep(resolve(sweep_o));
    if (*grad) return cmd_gradcheck(grad_seed, grad_trials);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigFailure;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kNumericFailure;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIoFailure;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return kIoFailure;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kIoFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigFailure;
  }
  return kOk;
}
