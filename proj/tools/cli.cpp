// Copyright 2026 The HPTMT Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cli.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>

#include "hptmt/distops.hpp"
#include "hptmt/io.hpp"
#include "hptmt/pipeline.hpp"
#include "hptmt/selftest.hpp"

namespace hptmt::cli {

namespace {

struct Options {
  // launch
  int local_threads = 0;
  int rank = -1;
  int launch = 0;
  std::string hostfile;
  int rendezvous_seconds = 30;
  // workload
  uint64_t seed = 42;
  size_t rows = 0;
  double uniqueness = 0.10;
  int repeat = 3;
  int epochs = 30;
  double lr = 0.01;
  size_t hidden = 64;
  size_t blocks = 2;
  double dropout = 0.0;
  size_t batch = 32;
  int instances = 25;
  std::string out;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void AddLaunchFlags(CLI::App* app, Options& o) {
  auto* threads = app->add_option("--local-threads", o.local_threads,
                                  "run N workers as threads of this process")
                      ->check(CLI::PositiveNumber);
  auto* rank = app->add_option("--rank", o.rank, "this process's rank in a tcp world")
                   ->check(CLI::NonNegativeNumber);
  auto* launch = app->add_option("--launch", o.launch,
                                 "spawn N tcp worker processes on this host")
                     ->check(CLI::PositiveNumber);
  app->add_option("--hostfile", o.hostfile, "'<rank> <host>:<port>' per line");
  app->add_option("--rendezvous-timeout", o.rendezvous_seconds, "seconds to wait for peers");
  threads->excludes(rank)->excludes(launch);
  rank->excludes(launch);
}

void AddSeed(CLI::App* app, Options& o) { app->add_option("--seed", o.seed, "random seed"); }

void AddOut(CLI::App* app, Options& o, const std::string& what) {
  app->add_option("--out", o.out, what);
}

// Runs fn on every rank of the selected world. Returns the exit code.
int RunWorld(const Options& o, int argc, char** argv, std::ostream& err,
             const std::function<void(Communicator&)>& fn) {
  if (o.rank >= 0 || o.launch > 0) {
    if (o.hostfile.empty()) throw UsageError("--rank and --launch need --hostfile");
  }
  if (o.launch > 0) {
    if (!std::filesystem::exists(o.hostfile)) {
      std::ofstream f(o.hostfile);
      f << FormatHostfile(LoopbackPeers(o.launch));
      if (!f) throw UsageError("cannot write hostfile " + o.hostfile);
    }
    auto peers = ReadHostfile(o.hostfile);
    if (peers.size() != static_cast<size_t>(o.launch)) {
      throw UsageError("hostfile lists " + std::to_string(peers.size()) + " ranks, --launch " +
                       std::to_string(o.launch));
    }
    // Re-run this command line once per rank with --launch N replaced by
    // --rank i. The parent only spawns and collects.
    std::vector<std::string> base;
    for (int i = 1; i < argc; ++i) {
      std::string a = argv[i];
      if (a == "--launch") {
        ++i;
        continue;
      }
      if (a.rfind("--launch=", 0) == 0) continue;
      base.push_back(a);
    }
    std::vector<pid_t> children;
    for (int r = 0; r < o.launch; ++r) {
      std::vector<std::string> args{"/proc/self/exe"};
      args.insert(args.end(), base.begin(), base.end());
      args.push_back("--rank");
      args.push_back(std::to_string(r));
      std::vector<char*> cargs;
      for (auto& a : args) cargs.push_back(a.data());
      cargs.push_back(nullptr);
      std::fflush(nullptr);
      pid_t pid = fork();
      if (pid < 0) Raise(ErrorCode::kInvalidArgument, "fork failed");
      if (pid == 0) {
        execv("/proc/self/exe", cargs.data());
        _exit(127);
      }
      children.push_back(pid);
    }
    int code = kExitOk;
    for (pid_t pid : children) {
      int status = 0;
      waitpid(pid, &status, 0);
      int child = WIFEXITED(status) ? WEXITSTATUS(status) : kExitFailure;
      if (child != kExitOk) {
        err << "rank process " << pid << " exited with " << child << "\n";
        code = std::max(code, child);
      }
    }
    return code;
  }
  if (o.rank >= 0) {
    WorkerSpec spec;
    spec.peers = ReadHostfile(o.hostfile);
    spec.world_size = static_cast<int>(spec.peers.size());
    spec.rank = o.rank;
    spec.transport = TransportKind::kTcp;
    spec.rendezvous_timeout = Millis(1000LL * o.rendezvous_seconds);
    if (o.rank >= spec.world_size) {
      throw UsageError("rank " + std::to_string(o.rank) + " not in hostfile");
    }
    Communicator comm = InitCommunicator(spec);
    fn(comm);
    return kExitOk;
  }
  RunLocalThreads(std::max(o.local_threads, 1), fn);
  return kExitOk;
}

// Rank 0's output sink: --out FILE or the given stream.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback, bool append = false) {
    if (path.empty()) {
      stream_ = &fallback;
      return;
    }
    file_.open(path, append ? std::ios::app : std::ios::trunc);
    if (!file_) Raise(ErrorCode::kSinkFailure, "cannot open " + path);
    stream_ = &file_;
  }
  std::ostream& operator*() { return *stream_; }

 private:
  std::ofstream file_;
  std::ostream* stream_;
};

double Median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::pair<size_t, size_t> Block(size_t n, int rank, int world) {
  return {static_cast<size_t>(rank) * n / static_cast<size_t>(world),
          static_cast<size_t>(rank + 1) * n / static_cast<size_t>(world)};
}

// Local share of a benchmark relation: key uniform in [0, uniqueness*rows)
// plus one payload column.
Table BenchTable(const Options& o, size_t rows, int rank, int world, uint64_t side,
                 const std::string& payload) {
  auto [begin, end] = Block(rows, rank, world);
  const auto distinct = std::max<uint64_t>(
      1, static_cast<uint64_t>(o.uniqueness * static_cast<double>(rows)));
  Rng rng(MixSeed(MixSeed(o.seed, side), static_cast<uint64_t>(rank)));
  ColumnBuilder key(DataType::kInt64), val(DataType::kInt64);
  key.Reserve(end - begin);
  val.Reserve(end - begin);
  for (size_t i = begin; i < end; ++i) {
    key.AppendInt64(static_cast<int64_t>(rng.Below(distinct)));
    val.AppendInt64(static_cast<int64_t>(i));
  }
  return MakeTable({{"key", key.Finish()}, {payload, val.Finish()}});
}

void WriteBenchRow(const Options& o, const std::string& op, int world, size_t rows,
                   double seconds, std::ostream& out) {
  bool header = true;
  if (!o.out.empty()) {
    std::error_code ec;
    header = !std::filesystem::exists(o.out) || std::filesystem::file_size(o.out, ec) == 0;
  }
  Sink sink(o.out, out, /*append=*/true);
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%s,%d,%zu,%.4f,%d,%.6f\n", op.c_str(), world, rows,
                o.uniqueness, o.repeat, seconds);
  if (header) *sink << "op,world,rows,uniqueness,repeat,seconds\n";
  *sink << buf;
}

int Bench(const Options& o, const std::string& op, int argc, char** argv, std::ostream& out,
          std::ostream& err) {
  if (!(o.uniqueness > 0 && o.uniqueness <= 1)) throw UsageError("--uniqueness must be in (0, 1]");
  if (o.repeat < 1) throw UsageError("--repeat must be at least 1");
  const size_t rows = o.rows == 0 ? 100000 : o.rows;
  return RunWorld(o, argc, argv, err, [&](Communicator& comm) {
    DistContext ctx(comm, o.seed);
    Table l = BenchTable(o, rows, comm.rank(), comm.world_size(), 1, "lval");
    Table r = op == "join" ? BenchTable(o, rows, comm.rank(), comm.world_size(), 2, "rval")
                           : Table();
    std::vector<double> times;
    size_t out_rows = 0;
    for (int i = 0; i < o.repeat; ++i) {
      comm.Barrier();
      auto start = std::chrono::steady_clock::now();
      Table res = op == "join" ? DistJoin(ctx, l, r, {"key"}, {"key"}, JoinKind::kInner)
                               : DistSort(ctx, l, {"key"});
      comm.Barrier();
      std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
      times.push_back(dt.count());
      out_rows = res.num_rows();
    }
    const int64_t local[] = {static_cast<int64_t>(out_rows)};
    const int64_t total = comm.AllReduce(std::span<const int64_t>(local), ReduceOp::kSum)[0];
    if (comm.rank() != 0) return;
    WriteBenchRow(o, op, comm.world_size(), rows, Median(times), out);
    err << "# " << op << " output rows " << total << "\n";
  });
}

PipelineConfig MakePipelineConfig(const Options& o) {
  PipelineConfig cfg;
  cfg.seed = o.seed;
  if (o.rows > 0) cfg.n_response_rows = o.rows;
  cfg.net.hidden_dim = o.hidden;
  cfg.net.n_blocks = o.blocks;
  cfg.net.dropout_p = o.dropout;
  cfg.train.epochs = o.epochs;
  cfg.train.lr = o.lr;
  cfg.train.batch_size = o.batch;
  try {
    cfg.Validate();
    NetConfig net = cfg.net;
    net.in_dim = cfg.feature_dim();
    net.Validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  if (o.epochs < 1) throw UsageError("--epochs must be at least 1");
  if (!(o.lr > 0)) throw UsageError("--lr must be positive");
  return cfg;
}

int Pipeline(const Options& o, int argc, char** argv, std::ostream& out, std::ostream& err) {
  const PipelineConfig cfg = MakePipelineConfig(o);
  return RunWorld(o, argc, argv, err, [&](Communicator& comm) {
    DistContext ctx(comm, o.seed);
    PipelineResult res = RunPipeline(ctx, cfg);
    std::string rows;
    for (const auto& m : res.metrics) rows += MetricsCsvRow(m) + "\n";
    std::vector<Bytes> all = comm.Gather(0, Bytes(rows.begin(), rows.end()));
    const int64_t local[] = {static_cast<int64_t>(res.final_table.num_rows())};
    const int64_t final_rows = comm.AllReduce(std::span<const int64_t>(local), ReduceOp::kSum)[0];
    if (comm.rank() != 0) return;

    Sink sink(o.out, out);
    *sink << MetricsCsvHeader() << "\n";
    for (const auto& b : all) *sink << std::string(b.begin(), b.end());
    std::ostream& summary = o.out.empty() ? err : out;
    char buf[96];
    for (size_t e = 0; e < res.loss_history.size(); ++e) {
      std::snprintf(buf, sizeof(buf), "epoch %zu loss %.6f\n", e + 1, res.loss_history[e]);
      summary << buf;
    }
    std::snprintf(buf, sizeof(buf), "test mse %.6f\n", res.test_mse);
    summary << "final rows " << final_rows << "\n" << buf;
  });
}

int GenData(const Options& o, int argc, char** argv, std::ostream& out, std::ostream& err) {
  PipelineConfig cfg;
  cfg.seed = o.seed;
  if (o.rows > 0) cfg.n_response_rows = o.rows;
  const std::string dir = o.out.empty() ? "hptmt-data" : o.out;
  return RunWorld(o, argc, argv, err, [&](Communicator& comm) {
    SyntheticData data = GenerateSynthetic(cfg, comm.rank(), comm.world_size());
    const std::pair<const char*, const Table*> tables[] = {{"response.csv", &data.response},
                                                           {"drug_features_a.csv", &data.drug_feat_a},
                                                           {"drug_features_b.csv", &data.drug_feat_b},
                                                           {"rna.csv", &data.rna}};
    for (const auto& [name, table] : tables) {
      Table all = comm.GatherTable(0, *table);
      if (comm.rank() != 0) continue;
      std::filesystem::create_directories(dir);
      const std::string path = (std::filesystem::path(dir) / name).string();
      size_t n = WriteCsvFile(all, path);
      out << "wrote " << path << " " << n << " rows\n";
    }
  });
}

int Selftest(const Options& o, std::ostream& out) {
  if (o.rank >= 0 || o.launch > 0) throw UsageError("selftest runs in local-threads mode only");
  if (o.instances < 1) throw UsageError("--instances must be at least 1");
  std::vector<int> worlds{1, 2, 4};
  if (o.local_threads > 0 &&
      std::find(worlds.begin(), worlds.end(), o.local_threads) == worlds.end()) {
    worlds.push_back(o.local_threads);
  }
  OracleSuiteOptions opts;
  opts.instances = o.instances;
  opts.seed = o.seed;
  int failures = 0;
  for (int p : worlds) {
    std::vector<OracleCaseResult> results;
    RunLocalThreads(p, [&](Communicator& comm) {
      auto r = RunOracleSuite(comm, opts);
      if (comm.rank() == 0) results = std::move(r);
    });
    for (const auto& r : results) {
      out << (r.failures == 0 ? "PASS " : "FAIL ") << r.op << " p=" << r.world_size << " "
          << (r.instances - r.failures) << "/" << r.instances;
      if (r.failures > 0) out << " " << r.first_failure;
      out << "\n";
      failures += r.failures;
    }
  }
  return failures == 0 ? kExitOk : kExitFailure;
}

}  // namespace

int Main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Distributed table operators and data-parallel training."};
  app.name("hptmt");
  app.require_subcommand(1);
  Options o;

  auto* gen = app.add_subcommand("gen-data", "write the synthetic datasets as CSV");
  AddLaunchFlags(gen, o);
  AddSeed(gen, o);
  gen->add_option("--rows", o.rows, "response rows");
  AddOut(gen, o, "output directory");

  auto* pipe = app.add_subcommand("pipeline", "run data engineering and training end to end");
  AddLaunchFlags(pipe, o);
  AddSeed(pipe, o);
  pipe->add_option("--rows", o.rows, "response rows");
  pipe->add_option("--epochs", o.epochs, "training epochs");
  pipe->add_option("--lr", o.lr, "SGD learning rate");
  pipe->add_option("--hidden", o.hidden, "hidden width");
  pipe->add_option("--blocks", o.blocks, "residual blocks");
  pipe->add_option("--dropout", o.dropout, "dropout probability");
  pipe->add_option("--batch", o.batch, "mini-batch size, 0 for full batch");
  AddOut(pipe, o, "metrics CSV file (default stdout)");

  CLI::App* bench[2];
  const char* bench_names[2] = {"bench-join", "bench-sort"};
  const char* bench_help[2] = {"time the distributed hash join", "time the distributed sample sort"};
  for (int i = 0; i < 2; ++i) {
    bench[i] = app.add_subcommand(bench_names[i], bench_help[i]);
    AddLaunchFlags(bench[i], o);
    AddSeed(bench[i], o);
    bench[i]->add_option("--rows", o.rows, "rows per relation (default 100000)");
    bench[i]->add_option("--uniqueness", o.uniqueness, "fraction of distinct keys");
    bench[i]->add_option("--repeat", o.repeat, "timed repetitions; the median is reported");
    AddOut(bench[i], o, "CSV file to append to (default stdout)");
  }

  auto* self = app.add_subcommand("selftest", "distributed vs local equivalence checks");
  AddLaunchFlags(self, o);
  AddSeed(self, o);
  self->add_option("--instances", o.instances, "random instances per operator and world size");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) return GenData(o, argc, argv, out, err);
    if (*pipe) return Pipeline(o, argc, argv, out, err);
    if (*bench[0]) return Bench(o, "join", argc, argv, out, err);
    if (*bench[1]) return Bench(o, "sort", argc, argv, out, err);
    if (*self) return Selftest(o, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace hptmt::cli
