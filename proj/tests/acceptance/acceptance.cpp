// Runs each acceptance criterion at its stated tolerance and prints one
// PASS/FAIL line per criterion. Exit status is non-zero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "hda/checkpoint.hpp"
#include "hda/gradcheck.hpp"
#include "hda/ops.hpp"
#include "hda/pipeline.hpp"

using namespace hda;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

Tensor uniform_tensor(Shape shape, Rng& rng, double lo = 0.0, double hi = 1.0) {
  std::vector<float> v(numel(shape));
  for (float& x : v) x = static_cast<float>(rng.uniform(lo, hi));
  return Tensor(std::move(shape), std::move(v));
}

// ---------------------------------------------------------------- 1

Verdict gradient_suite() {
  const auto suite = gradcheck::run_suite(1, 3, {1e-3, 1e-5});
  std::string failed;
  for (const auto& c : suite.cases)
    if (!c.passed) failed += " " + c.name + "#" + std::to_string(c.trial);
  const bool ok = suite.cases.size() >= 100 && suite.all_passed() && suite.seconds < 120.0;
  return {ok, fmt("%zu cases, %zu failures, %.2f s", suite.cases.size(), suite.failures(), suite.seconds) + failed};
}

// ---------------------------------------------------------------- 2

Verdict analytic_losses() {
  bool ok = true;
  std::string detail;
  const double d_half = gan_loss_discriminator(Tensor({4, 1}, std::vector<float>(4, 0.0f)),
                                               Tensor({4, 1}, std::vector<float>(4, 0.0f))).item();
  ok &= std::abs(d_half - 1.3863) <= 1e-4;
  detail += fmt("D(0.5)=%.6f", d_half);

  double worst_ce = 0.0;
  for (std::size_t classes = 2; classes <= 16; ++classes) {
    std::vector<int> labels;
    for (std::size_t i = 0; i < 5; ++i) labels.push_back(static_cast<int>(i % classes));
    for (float level : {0.0f, 3.5f, -2.0f}) {
      const double ce = classification_loss(Tensor::full({5, classes}, level), labels).item();
      worst_ce = std::max(worst_ce, std::abs(ce - std::log(static_cast<double>(classes))));
    }
  }
  ok &= worst_ce <= 1e-4;
  detail += fmt(", max|CE-lnC|=%.2e", worst_ce);

  Rng rng(2);
  double metric_max = 0.0, cycle_max = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor x = uniform_tensor({6, 3, 8, 8}, rng);
    const auto pairs = make_pairs(6, {}, rng);
    metric_max = std::max(metric_max, std::abs(static_cast<double>(metric_loss(x, x, pairs).item())));
    cycle_max = std::max(cycle_max, std::abs(static_cast<double>(cycle_loss(x, x).item())));
  }
  ok &= metric_max == 0.0 && cycle_max == 0.0;
  detail += fmt(", metric(identity)=%g, cycle(x,x)=%g", metric_max, cycle_max);
  return {ok, detail};
}

// ---------------------------------------------------------------- 3

// Random orthogonal d×d matrix: Gram-Schmidt on Gaussian columns, in double.
std::vector<double> random_orthogonal(std::size_t d, Rng& rng) {
  std::vector<double> q(d * d);
  for (double& v : q) v = rng.normal();
  for (std::size_t j = 0; j < d; ++j) {
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t k = 0; k < j; ++k) {
        double dot = 0.0;
        for (std::size_t i = 0; i < d; ++i) dot += q[i * d + j] * q[i * d + k];
        for (std::size_t i = 0; i < d; ++i) q[i * d + j] -= dot * q[i * d + k];
      }
    double norm = 0.0;
    for (std::size_t i = 0; i < d; ++i) norm += q[i * d + j] * q[i * d + j];
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < d; ++i) q[i * d + j] /= norm;
  }
  return q;
}

Verdict metric_isometry() {
  Rng rng(3);
  Network g = build_generator({16, 16, 1}, {8, 8, 3}, 16, 3);
  const std::size_t n = 8, d = 8 * 8 * 3;
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor x = uniform_tensor({n, 1, 16, 16}, rng);
    const Tensor gx = map_images(g, x).reshaped({n, d});
    const auto q = random_orthogonal(d, rng);
    std::vector<double> shift(d);
    for (double& s : shift) s = rng.uniform(-1.0, 1.0);
    std::vector<float> moved(n * d);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t r = 0; r < d; ++r) {
        double acc = shift[r];
        for (std::size_t c = 0; c < d; ++c) acc += q[r * d + c] * gx[i * d + c];
        moved[i * d + r] = static_cast<float>(acc);
      }
    const auto pairs = make_pairs(n, {}, rng);
    const double before = metric_loss(x, gx, pairs).item();
    const double after = metric_loss(x, Tensor({n, d}, moved), pairs).item();
    worst = std::max(worst, std::abs(before - after));
  }
  return {worst < 1e-5, fmt("max |delta metric_loss| over 50 trials = %.3e", worst)};
}

// ---------------------------------------------------------------- 4

Verdict strategy_algebra() {
  Rng rng(4);
  const std::size_t classes = 4;
  ModelBundle bundle = build_bundle({8, 8, 1}, {8, 8, 3}, classes, {2, 2, 2, 2}, 4);
  std::size_t failures = 0;
  std::string first_failure;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n_s = 1 + rng.below(40);
    const std::size_t train_per_class = 1 + rng.below(10);
    const std::size_t n_yt = rng.below(train_per_class + 1);
    auto [src_full, tgt_full] =
        generate_synthetic_pair({classes, std::max<std::size_t>(10, train_per_class + 1), {8, 8, 1}, {8, 8, 3},
                                 static_cast<std::uint64_t>(trial)});
    std::vector<std::size_t> pick;
    for (std::size_t i = 0; i < n_s; ++i) pick.push_back(rng.below(src_full.size()));
    const DomainDataset source = src_full.subset(pick);
    const DomainDataset target =
        split_and_budget(tgt_full, {train_per_class, 1, static_cast<std::uint64_t>(trial)}, n_yt).first;
    const std::size_t n_t = target.size(), labeled = n_yt * classes;

    const AssembledSet s = assemble_hda_source(bundle, source, target);
    const AssembledSet t = assemble_hda_target(bundle, target);
    const AssembledSet f = assemble_hda_full(bundle, source, target);
    using P = Provenance;
    auto histogram = [](const AssembledSet& a) {
      return std::vector<std::size_t>{a.count(P::kTransferredSource), a.count(P::kLabeledTarget),
                                      a.count(P::kPseudoLabeledTarget)};
    };
    const bool ok = s.size() == n_s + labeled && t.size() == n_t && f.size() == n_s + n_t &&
                    histogram(s) == std::vector<std::size_t>{n_s, labeled, 0} &&
                    histogram(t) == std::vector<std::size_t>{0, labeled, n_t - labeled} &&
                    histogram(f) == std::vector<std::size_t>{n_s, labeled, n_t - labeled};
    if (!ok) {
      ++failures;
      if (first_failure.empty()) first_failure = fmt(" first failure (N_s=%zu, N_t=%zu, n_yt=%zu)", n_s, n_t, n_yt);
    }
  }
  return {failures == 0, fmt("%zu/200 triples violate the set algebra", failures) + first_failure};
}

// ---------------------------------------------------------------- 5, 6, 8

RunConfig synthetic_config(std::uint64_t seed) {
  RunConfig c;
  c.synthetic = {4, 50, {16, 16, 1}, {8, 8, 3}, seed};
  c.split = {40, 10, seed};
  c.training.iterations = 3000;
  c.training.seed = seed;
  c.final_training.seed = seed;
  return c;
}

struct Sweep {
  std::map<std::size_t, BudgetResult> budgets;
  double seconds = 0.0;
};

Sweep run_sweep(std::uint64_t seed) {
  const RunConfig config = synthetic_config(seed);
  const DomainData data = load_domains(config);
  Sweep sweep;
  const auto start = Clock::now();
  for (std::size_t n_yt : {10u, 5u, 1u, 0u}) {
    const auto t0 = Clock::now();
    sweep.budgets[n_yt] = run_budget(data, config, n_yt);
    const auto& acc = sweep.budgets[n_yt].accuracy;
    auto cell = [&](Strategy s) { return acc.at(s) ? format_accuracy(*acc.at(s)) : std::string("-"); };
    std::fprintf(stderr, "  seed %llu n_yt %2zu: baseline %s source %s target %s full %s (%.0f s)\n",
                 static_cast<unsigned long long>(seed), n_yt, cell(Strategy::kBaseline).c_str(),
                 cell(Strategy::kSource).c_str(), cell(Strategy::kTarget).c_str(), cell(Strategy::kFull).c_str(),
                 seconds_since(t0));
  }
  sweep.seconds = seconds_since(start);
  std::vector<BudgetResult> rows;
  for (const auto& [n, r] : sweep.budgets) rows.push_back(r);
  std::fprintf(stderr, "%s", format_table(rows).c_str());
  return sweep;
}

double mean_cycle(const std::vector<StepTrace>& trace, std::size_t begin, std::size_t end) {
  double s = 0.0;
  for (std::size_t i = begin; i < end; ++i) s += trace[i].report.cycle;
  return s / static_cast<double>(end - begin);
}

Verdict end_to_end(const Sweep& sweep) {
  bool ok = true;
  std::string detail;
  double worst_ratio = 0.0;
  for (const auto& [n_yt, r] : sweep.budgets) {
    const auto& trace = r.training.trace;
    const double ratio = mean_cycle(trace, trace.size() - 100, trace.size()) / mean_cycle(trace, 0, 100);
    worst_ratio = std::max(worst_ratio, ratio);
  }
  ok &= worst_ratio < 0.5;
  detail += fmt("(a) worst last/first-100 cycle ratio %.3f", worst_ratio);

  const double target0 = *sweep.budgets.at(0).accuracy.at(Strategy::kTarget);
  ok &= target0 > 45.0;
  detail += fmt("; (b) HDAtarget@0 = %.2f%%", target0);

  detail += "; (c)";
  for (std::size_t n_yt : {10u, 5u, 1u}) {
    const auto& acc = sweep.budgets.at(n_yt).accuracy;
    const double t = *acc.at(Strategy::kTarget), b = *acc.at(Strategy::kBaseline);
    ok &= t >= b;
    detail += fmt(" n_yt=%zu %.2f vs %.2f", n_yt, t, b);
  }
  ok &= sweep.seconds < 30 * 60;
  detail += fmt("; runtime %.0f s", sweep.seconds);
  return {ok, detail};
}

Verdict table_trend(const std::vector<Sweep>& sweeps) {
  constexpr double kChance = 25.0;
  std::size_t holding = 0;
  std::string detail;
  for (std::size_t s = 0; s < sweeps.size(); ++s) {
    // Gaps ordered by growing n_yt; the baseline at n_yt = 0 is chance.
    std::vector<double> gaps;
    for (std::size_t n_yt : {0u, 1u, 5u, 10u}) {
      const auto& acc = sweeps[s].budgets.at(n_yt).accuracy;
      const double baseline = n_yt == 0 ? kChance : *acc.at(Strategy::kBaseline);
      gaps.push_back(*acc.at(Strategy::kTarget) - baseline);
    }
    bool monotone = true;
    for (std::size_t k = 1; k < gaps.size(); ++k) monotone &= gaps[k] <= gaps[k - 1];
    holding += monotone;
    detail += fmt("%sseed %zu gaps(0,1,5,10) = %.2f %.2f %.2f %.2f %s", s ? "; " : "", s + 1, gaps[0], gaps[1], gaps[2],
                  gaps[3], monotone ? "ok" : "not monotone");
  }
  return {holding >= 2, fmt("%zu/3 seeds non-increasing; ", holding) + detail};
}

Verdict unsupervised_degeneracy(const Sweep& sweep) {
  const BudgetResult& r = sweep.budgets.at(0);
  std::size_t nonzero = 0;
  for (const auto& t : r.training.trace) nonzero += t.report.classif_s != 0.0 || t.report.classif_t != 0.0;
  const bool evaluated = r.accuracy.at(Strategy::kSource) && r.accuracy.at(Strategy::kTarget) &&
                         r.accuracy.at(Strategy::kFull) && !r.accuracy.at(Strategy::kBaseline);
  const bool ok = nonzero == 0 && r.training.trace.size() == 3000 && r.training.target_pretrain.skipped && evaluated;
  return {ok, fmt("%zu/%zu iterations with a non-zero classif term; C_t pretraining %s; strategies %s", nonzero,
                  r.training.trace.size(), r.training.target_pretrain.skipped ? "skipped" : "ran",
                  evaluated ? "evaluated" : "incomplete")};
}

// ---------------------------------------------------------------- 7

Verdict determinism_and_persistence() {
  RunConfig config = synthetic_config(7);
  config.training.iterations = 60;
  config.n_yt = 3;
  const DomainData data = load_domains(config);
  const PreparedData prepared = prepare(data, config, config.n_yt);

  // trace.csv bodies, without the wall-clock column.
  auto trace_text = [&](ModelBundle& bundle) {
    const TrainResult r = train(bundle, prepared.source, prepared.target_train, config.training);
    std::string text = trace_csv_header() + "\n";
    for (const auto& t : r.trace) {
      const std::string row = to_csv_row(t);
      text += row.substr(0, row.rfind(',')) + "\n";
    }
    return text;
  };
  ModelBundle a = make_bundle(config, prepared);
  ModelBundle b = make_bundle(config, prepared);
  const bool traces_equal = trace_text(a) == trace_text(b);

  const fs::path dir = fs::temp_directory_path() / "hda_acceptance_ckpt";
  fs::remove_all(dir);
  save_bundle(dir, a);
  RunConfig other = config;
  other.training.seed = 99;
  ModelBundle restored = make_bundle(other, prepared);
  load_bundle(dir, restored);
  Rng rng(7);
  std::size_t identical = 0;
  const auto& src_probe = uniform_tensor({5, 1, 16, 16}, rng);
  const auto& tgt_probe = uniform_tensor({5, 3, 8, 8}, rng);
  auto nets_a = a.training_networks();
  auto nets_r = restored.training_networks();
  for (std::size_t k = 0; k < nets_a.size(); ++k) {
    const Tensor& probe = nets_a[k]->input_shape == Shape{1, 16, 16} ? src_probe : tgt_probe;
    const Tensor ya = map_images(*nets_a[k], probe);
    const Tensor yr = map_images(*nets_r[k], probe);
    identical += std::equal(ya.data().begin(), ya.data().end(), yr.data().begin(), yr.data().end());
  }
  fs::remove_all(dir);
  return {traces_equal && identical == 6,
          fmt("traces %s; %zu/6 networks give bitwise-identical probe outputs after reload",
              traces_equal ? "identical" : "DIFFER", identical)};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    Verdict verdict;
  };
  std::vector<Criterion> results;
  auto report = [&](int id, const char* name, const std::function<Verdict()>& run) {
    const auto start = Clock::now();
    Verdict v;
    try {
      v = run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", v.pass ? "PASS" : "FAIL", id, name, v.detail.c_str(),
                seconds_since(start));
    std::fflush(stdout);
    results.push_back({id, name, v});
  };

  report(1, "gradient suite", gradient_suite);
  report(2, "analytic loss values", analytic_losses);
  report(3, "metric-loss isometry invariance", metric_isometry);
  report(4, "strategy set algebra", strategy_algebra);
  report(7, "determinism and persistence", determinism_and_persistence);

  std::vector<Sweep> sweeps;
  std::string sweep_error;
  try {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      std::fprintf(stderr, "sweep seed %llu\n", static_cast<unsigned long long>(seed));
      sweeps.push_back(run_sweep(seed));
    }
  } catch (const std::exception& e) {
    sweep_error = e.what();
  }
  auto need = [&](std::size_t count) {
    if (sweeps.size() < count) throw std::runtime_error("sweep failed: " + sweep_error);
  };
  report(5, "end-to-end synthetic adaptation", [&] { need(1); return end_to_end(sweeps[0]); });
  report(6, "gap trend over label budgets", [&] { need(3); return table_trend(sweeps); });
  report(8, "unsupervised degeneracy", [&] { need(1); return unsupervised_degeneracy(sweeps[0]); });

  std::size_t failed = 0;
  for (const auto& r : results) failed += !r.verdict.pass;
  std::printf("%zu/%zu criteria passed\n", results.size() - failed, results.size());
  return failed == 0 ? 0 : 1;
}
