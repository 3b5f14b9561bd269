// Copyright 2026 The resilient-fft Authors
// SPDX-License-Identifier: Apache-2.0

// resilient_fft: file transforms, benchmarks, fault-injection campaigns and
// the self-test.
//
// Exit codes:
//   0   success
//   1   self-test or internal consistency check failed
//   2   malformed signal file or plan table, or dtype does not match --precision
//   3   unsupported signal length
//   4   I/O error
//   5   persistent fault (recomputation kept failing verification)
//   64  usage error

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "resilient_fft/bench.hpp"
#include "resilient_fft/resilient_fft.hpp"
#include "resilient_fft/selftest.hpp"

namespace {

using namespace rfft;

enum Exit : int {
  kOk = 0,
  kCheckFailed = 1,
  kMalformed = 2,
  kUnsupported = 3,
  kIo = 4,
  kPersistent = 5,
  kUsage = 64,
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Precision parse_precision(const std::string& s) {
  if (s == "single" || s == "fp32" || s == "c64") return Precision::fp32;
  if (s == "double" || s == "fp64" || s == "c128") return Precision::fp64;
  throw UsageError("unknown precision '" + s + "' (single or double)");
}

abft::EncodingKind parse_left(const std::string& s) {
  const auto k = abft::parse_encoding(s);
  if (!k || *k == abft::EncodingKind::location) throw UsageError("unknown left encoding '" + s + "' (wang, jou, ones)");
  return *k;
}

PlanTable load_table(const std::string& path) {
  std::string source = path;
  if (source.empty())
    if (const char* env = std::getenv("RESILIENT_FFT_PLAN_TABLE"); env && *env) source = env;
  if (source.empty()) return PlanTable::builtin();
  std::ifstream probe(source);
  if (!probe) throw io::IoError("cannot open plan table '" + source + "'");
  try {
    return PlanTable::parse(probe, source);
  } catch (const InvalidArgument& e) {
    throw io::MalformedFile(e.what());
  }
}

// CSV sink: a file when a path is given, stdout otherwise.
class CsvSink {
 public:
  explicit CsvSink(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path, std::ios::trunc);
      if (!*file_) throw io::IoError("cannot create '" + path + "'");
    }
  }
  std::ostream& out() { return file_ ? *file_ : std::cout; }
  void finish() {
    out().flush();
    if (!out()) throw io::IoError("write failed");
  }

 private:
  std::unique_ptr<std::ofstream> file_;
};

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(9) << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// fft
// ---------------------------------------------------------------------------

struct FftArgs {
  std::string input, output, plan_table, precision, encoding = "wang";
  bool inverse = false, protect = false;
  double delta = 0;
  std::size_t group = 1, workers = 1;
};

int cmd_fft(const FftArgs& a) {
  const auto table = load_table(a.plan_table);
  auto batch = io::read_signal_file(a.input);
  if (!a.precision.empty()) {
    const Precision want = parse_precision(a.precision);
    const Precision have = std::holds_alternative<SignalBatch<float>>(batch) ? Precision::fp32 : Precision::fp64;
    if (want != have)
      throw io::MalformedFile(std::string("file holds ") + to_string(have) + " precision data, --precision is " +
                              to_string(want));
  }
  if (a.protect && a.inverse) throw UsageError("--protect applies to forward transforms only");
  io::AnyBatch result = std::visit(
      [&](const auto& in) -> io::AnyBatch {
        using Real = typename std::decay_t<decltype(in)>::value_type;
        const auto plan = build_plan<Real>(select_params(in.length(), in.count(), precision_of<Real>, table));
        if (!a.protect)
          return execute_plan(plan, in, a.inverse ? Direction::inverse : Direction::forward, {a.workers});
        const auto res = abft::run_protected(plan, in, parse_left(a.encoding), {a.delta, a.group, abft::Mode::fused, a.workers});
        std::size_t events = 0;
        for (const auto& r : res.reports) events += r.triggered;
        std::cerr << "verifications=" << res.counters.verifications << " events=" << events
                  << " corrections=" << res.counters.corrections
                  << " recomputations=" << res.counters.recomputations << "\n";
        return res.output;
      },
      batch);
  io::write_signal_file(a.output, result);
  return kOk;
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

struct BenchArgs {
  std::size_t n = 1024, batch = 256, group = 1, reps = 5, workers = 1;
  std::uint64_t seed = 2026;
  std::string precision = "single", modes = "plain,fused,offline", csv, plan_table, encoding = "wang";
  double delta = 0;
  bool header = true;
};

int cmd_bench(const BenchArgs& a) {
  std::vector<bench::Mode> modes;
  std::stringstream ss(a.modes);
  for (std::string tok; std::getline(ss, tok, ',');) {
    const auto m = bench::parse_mode(tok);
    if (!m) throw UsageError("unknown bench mode '" + tok + "' (plain, fused, offline)");
    modes.push_back(*m);
  }
  bench::BenchConfig cfg{a.n, a.batch, a.group, a.reps, a.workers, a.seed, a.delta, parse_left(a.encoding)};
  const auto table = load_table(a.plan_table);
  const auto rows = parse_precision(a.precision) == Precision::fp32 ? bench::run_bench<float>(cfg, modes, table)
                                                                    : bench::run_bench<double>(cfg, modes, table);
  CsvSink sink(a.csv);
  if (a.header) sink.out() << "mode,n,batch,T,median_ms,data_passes,verifications,corrections\n";
  for (const auto& r : rows)
    sink.out() << bench::to_string(r.mode) << ',' << r.n << ',' << r.batch << ',' << r.group << ','
               << fmt(r.median_ms) << ',' << fmt(r.data_passes) << ',' << r.verifications << ',' << r.corrections
               << '\n';
  sink.finish();
  return kOk;
}

// ---------------------------------------------------------------------------
// inject
// ---------------------------------------------------------------------------

struct InjectArgs {
  std::size_t n = 1024, batch = 1, trials = 200, group = 1, workers = 1;
  std::uint64_t seed = 2026;
  double rate = 1.0, delta = 0;
  std::string mode = "fused", precision = "single", csv, encoding = "wang";
  bool verbose_columns = false;
};

int cmd_inject(const InjectArgs& a) {
  fault::InjectConfig cfg;
  cfg.trials = a.trials;
  cfg.injected_fraction = a.rate;
  cfg.n = a.n;
  cfg.batch = a.batch;
  cfg.precision = parse_precision(a.precision);
  cfg.delta = a.delta;
  cfg.group = a.group;
  if (a.mode == "fused") cfg.mode = abft::Mode::fused;
  else if (a.mode == "per_transaction" || a.mode == "per-transaction") cfg.mode = abft::Mode::per_transaction;
  else throw UsageError("unknown mode '" + a.mode + "' (fused, per_transaction)");
  cfg.encoding = parse_left(a.encoding);
  cfg.seed = a.seed;
  cfg.workers = a.workers;
  const auto rows = fault::inject_campaign(cfg);
  CsvSink sink(a.csv);
  sink.out() << "trial,injected,bit,detected,located_ok,corrected,final_ok";
  if (a.verbose_columns) sink.out() << ",divergence,recomputed";
  sink.out() << '\n';
  for (const auto& r : rows) {
    sink.out() << r.trial << ',' << r.injected << ',' << r.bit << ',' << r.detected << ',' << r.located_ok << ','
               << r.corrected << ',' << r.final_ok;
    if (a.verbose_columns) sink.out() << ',' << fmt(r.divergence) << ',' << r.recomputed;
    sink.out() << '\n';
  }
  sink.finish();
  return kOk;
}

// ---------------------------------------------------------------------------
// roc
// ---------------------------------------------------------------------------

struct RocArgs {
  std::size_t runs = 2000, n = 1024, batch = 1, workers = 1;
  double fraction = 0.5;
  std::uint64_t seed = 2026;
  std::string sweep, precision = "single", csv, trials_csv, encoding = "wang";
};

std::vector<double> parse_sweep(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  for (std::string tok; std::getline(ss, tok, ',');) {
    try {
      std::size_t pos = 0;
      const double v = std::stod(tok, &pos);
      if (pos != tok.size() || !(v > 0)) throw std::invalid_argument(tok);
      out.push_back(v);
    } catch (const std::exception&) {
      throw UsageError("bad --delta-sweep value '" + tok + "' (positive numbers, comma separated)");
    }
  }
  return out;
}

int cmd_roc(const RocArgs& a) {
  fault::CampaignConfig cfg;
  cfg.runs = a.runs;
  cfg.injected_fraction = a.fraction;
  cfg.n = a.n;
  cfg.batch = a.batch;
  cfg.precision = parse_precision(a.precision);
  cfg.deltas = parse_sweep(a.sweep);
  cfg.seed = a.seed;
  cfg.workers = a.workers;
  cfg.encoding = parse_left(a.encoding);
  const auto result = fault::roc_campaign(cfg);
  CsvSink sink(a.csv);
  sink.out() << "delta,detection_rate,false_alarm_rate\n";
  for (const auto& p : result.table)
    sink.out() << fmt(p.delta) << ',' << fmt(p.detection_rate) << ',' << fmt(p.false_alarm_rate) << '\n';
  sink.finish();
  if (!a.trials_csv.empty()) {
    CsvSink trials(a.trials_csv);
    trials.out() << "trial,injected,signal,element,stage,part,bit,bit_class,divergence,induced\n";
    for (const auto& t : result.trials)
      trials.out() << t.trial << ',' << t.injected << ',' << t.spec.signal << ',' << t.spec.element << ','
                   << t.spec.stage << ',' << (t.spec.part == fault::Part::re ? "re" : "im") << ',' << t.spec.bit
                   << ',' << fault::to_string(t.bit_class) << ',' << fmt(t.divergence) << ',' << fmt(t.induced)
                   << '\n';
    trials.finish();
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// selftest and tune
// ---------------------------------------------------------------------------

int cmd_selftest(bool quick, bool mutate, const std::string& plan_table) {
  selftest::Options opt;
  opt.quick = quick;
  opt.mutate_twiddle = mutate;
  opt.table = load_table(plan_table);
  if (quick) opt.repair_trials = 16;
  const auto results = selftest::run(opt, std::cout);
  const bool ok = selftest::passed(results);
  std::cout << (ok ? "selftest passed\n" : "selftest FAILED\n");
  return ok ? kOk : kCheckFailed;
}

int cmd_tune(std::size_t n, std::size_t batch, const std::string& precision, std::size_t reps) {
  const auto candidates = candidate_space(n);
  const auto best = parse_precision(precision) == Precision::fp32 ? autotune<float>(n, batch, candidates, reps)
                                                                  : autotune<double>(n, batch, candidates, reps);
  std::cout << "# N N1 N2 N3 n1 n2 n3 bs\n" << format_params(best) << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fault-tolerant batched FFT: transforms, benchmarks, fault-injection campaigns."};
  app.require_subcommand(1);
  app.fallthrough();
  std::size_t workers = 1;
  app.add_option("--workers", workers, "Worker threads (results do not depend on it)")->check(CLI::PositiveNumber);

  FftArgs fa;
  auto* fft = app.add_subcommand("fft", "Transform a signal file");
  fft->add_option("input", fa.input, "Input signal file")->required();
  fft->add_option("--out,-o", fa.output, "Output signal file")->required();
  fft->add_flag("--inverse", fa.inverse, "Inverse transform (scaled by 1/N)");
  fft->add_option("--plan-table", fa.plan_table, "Plan table file (defaults to $RESILIENT_FFT_PLAN_TABLE, then built-in)");
  fft->add_option("--precision", fa.precision, "Expected precision of the file: single or double");
  fft->add_flag("--protect", fa.protect, "Run the forward transform with checksum protection");
  fft->add_option("--delta", fa.delta, "Detection threshold (default per precision)");
  fft->add_option("--group,-T", fa.group, "Transactions per verification")->check(CLI::PositiveNumber);
  fft->add_option("--encoding", fa.encoding, "Left encoding: wang, jou, ones");

  BenchArgs ba;
  auto* bench_cmd = app.add_subcommand("bench", "Time plain, fused and offline execution");
  bench_cmd->add_option("--n", ba.n, "Signal length");
  bench_cmd->add_option("--batch", ba.batch, "Signal count");
  bench_cmd->add_option("--precision", ba.precision, "single or double");
  bench_cmd->add_option("--mode", ba.modes, "Comma-separated subset of plain,fused,offline");
  bench_cmd->add_option("--group,-T", ba.group, "Transactions per verification")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--reps", ba.reps, "Timed repetitions (one extra warm-up)")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--seed", ba.seed, "Input seed");
  bench_cmd->add_option("--delta", ba.delta, "Detection threshold (default per precision)");
  bench_cmd->add_option("--encoding", ba.encoding, "Left encoding: wang, jou, ones");
  bench_cmd->add_option("--plan-table", ba.plan_table, "Plan table file");
  bench_cmd->add_option("--csv", ba.csv, "Write CSV here instead of stdout");

  InjectArgs ia;
  auto* inject = app.add_subcommand("inject", "Single-fault repair trials, one CSV row per trial");
  inject->add_option("--n", ia.n, "Signal length");
  inject->add_option("--batch", ia.batch, "Signal count");
  inject->add_option("--seed", ia.seed, "Campaign seed");
  inject->add_option("--trials", ia.trials, "Trial count")->check(CLI::PositiveNumber);
  inject->add_option("--rate", ia.rate, "Fraction of trials that receive a fault")->check(CLI::Range(0.0, 1.0));
  inject->add_option("--mode", ia.mode, "fused or per_transaction");
  inject->add_option("--group,-T", ia.group, "Transactions per verification")->check(CLI::PositiveNumber);
  inject->add_option("--precision", ia.precision, "single or double");
  inject->add_option("--delta", ia.delta, "Detection threshold (default per precision)");
  inject->add_option("--encoding", ia.encoding, "Left encoding: wang, jou, ones");
  inject->add_option("--csv", ia.csv, "Write CSV here instead of stdout");
  inject->add_flag("--verbose-columns", ia.verbose_columns, "Append divergence and recomputed columns");

  RocArgs ra;
  auto* roc = app.add_subcommand("roc", "Detection/false-alarm rates over a threshold sweep");
  roc->add_option("--runs", ra.runs, "Total runs")->check(CLI::PositiveNumber);
  roc->add_option("--inject-fraction", ra.fraction, "Fraction of runs with a fault")->check(CLI::Range(0.0, 1.0));
  roc->add_option("--delta-sweep", ra.sweep, "Comma-separated thresholds (default: 4 per decade)");
  roc->add_option("--n", ra.n, "Signal length");
  roc->add_option("--batch", ra.batch, "Signals per run");
  roc->add_option("--precision", ra.precision, "single or double");
  roc->add_option("--seed", ra.seed, "Campaign seed");
  roc->add_option("--encoding", ra.encoding, "Left encoding: wang, jou, ones");
  roc->add_option("--csv", ra.csv, "Write CSV here instead of stdout");
  roc->add_option("--trials-csv", ra.trials_csv, "Also write per-run records (site, bit class, divergence)");

  bool quick = false, mutate = false;
  std::string st_table;
  auto* st = app.add_subcommand("selftest", "Oracle, checksum and repair self-test");
  st->add_flag("--quick", quick, "Only N <= 256");
  st->add_flag("--debug-mutate-twiddle", mutate, "Perturb one twiddle per plan; the self-test must fail");
  st->add_option("--plan-table", st_table, "Plan table file");

  std::size_t tn = 1024, tbatch = 64, treps = 3;
  std::string tprec = "single";
  auto* tune = app.add_subcommand("tune", "Measure the candidate space for one N and print a plan-table line");
  tune->add_option("--n", tn, "Signal length");
  tune->add_option("--batch", tbatch, "Signal count used for timing");
  tune->add_option("--precision", tprec, "single or double");
  tune->add_option("--reps", treps, "Timed repetitions per candidate")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    fa.workers = ba.workers = ia.workers = ra.workers = workers;
    if (*fft) return cmd_fft(fa);
    if (*bench_cmd) return cmd_bench(ba);
    if (*inject) return cmd_inject(ia);
    if (*roc) return cmd_roc(ra);
    if (*st) return cmd_selftest(quick, mutate, st_table);
    if (*tune) return cmd_tune(tn, tbatch, tprec, treps);
  } catch (const io::MalformedFile& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kMalformed;
  } catch (const UnsupportedLength& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUnsupported;
  } catch (const io::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const PersistentFault& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kPersistent;
  } catch (const bench::MismatchError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kCheckFailed;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
