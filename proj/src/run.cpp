#include "pqn/run.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>
#include <variant>

#include "pqn/error.hpp"
#include "pqn/hier_crf.hpp"
#include "pqn/logistic.hpp"
#include "pqn/model_io.hpp"
#include "pqn/seq_crf.hpp"
#include "pqn/sparse_data.hpp"

namespace pqn {

Task parse_task(const std::string& name) {
  if (name == "seq") return Task::Seq;
  if (name == "hier") return Task::Hier;
  if (name == "logistic") return Task::Logistic;
  throw std::invalid_argument("unknown task '" + name + "' (expected seq, hier or logistic)");
}

std::string to_string(Task task) {
  switch (task) {
    case Task::Seq:
      return "seq";
    case Task::Hier:
      return "hier";
    case Task::Logistic:
      return "logistic";
  }
  return "unknown";
}

SolverKind parse_solver(const std::string& name) {
  if (name == "prox-qn" || name == "prox_qn") return SolverKind::ProxQn;
  if (name == "prox-gd" || name == "prox_gd") return SolverKind::ProxGd;
  throw std::invalid_argument("unknown solver '" + name + "' (expected prox-qn or prox-gd)");
}

std::string to_string(SolverKind kind) { return kind == SolverKind::ProxGd ? "prox-gd" : "prox-qn"; }

void RunManifest::validate() const {
  solver.validate();
  if (data_path.empty()) throw std::invalid_argument("no data file given");
  if (task == Task::Hier && hierarchy_path.empty()) throw std::invalid_argument("hier task needs a hierarchy file");
  if (!split.test_path.empty() && split.test_fraction != 0.0)
    throw std::invalid_argument("give either a split fraction or a test file, not both");
  if (split.test_fraction != 0.0 && !(split.test_fraction > 0.0 && split.test_fraction < 1.0))
    throw std::invalid_argument("split fraction must lie in (0, 1)");
  if (threads < 1) throw std::invalid_argument("threads must be >= 1");
  if (pixels < 1) throw std::invalid_argument("pixels must be >= 1");
}

namespace {

using AnyData = std::variant<SequenceDataset, TaxonomyDataset, BinaryDataset>;

std::size_t item_count(const AnyData& data) {
  return std::visit(
      [](const auto& d) -> std::size_t {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, SequenceDataset>) {
          return d.sequences.size();
        } else {
          return d.size();
        }
      },
      data);
}

AnyData select(const AnyData& data, std::span<const std::size_t> which) {
  return std::visit(
      [&](const auto& d) -> AnyData {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, SequenceDataset>) {
          return select_sequences(d, which);
        } else {
          return select_instances(d, which);
        }
      },
      data);
}

AnyData load(Task task, const std::string& path, const std::string& hierarchy, std::size_t pixels,
             std::optional<std::size_t> num_features) {
  SvmlightOptions opts;
  opts.num_features = num_features;
  switch (task) {
    case Task::Seq:
      return load_ocr(path, pixels);
    case Task::Hier:
      return load_svmlight_with_taxonomy(path, hierarchy, opts);
    case Task::Logistic:
      return load_svmlight_binary(path, opts);
  }
  throw std::logic_error("unreachable");
}

std::size_t raw_features(const AnyData& data) {
  return std::visit(
      [](const auto& d) -> std::size_t {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, SequenceDataset>) {
          return d.raw_feature_count;
        } else {
          return d.num_features();
        }
      },
      data);
}

std::unique_ptr<SmoothLossOracle> make_oracle(const AnyData& data, std::size_t threads) {
  if (auto* s = std::get_if<SequenceDataset>(&data)) return std::make_unique<SeqCrfOracle>(*s, threads);
  if (auto* h = std::get_if<TaxonomyDataset>(&data)) return std::make_unique<HierOracle>(*h, threads);
  return std::make_unique<LogisticOracle>(std::get<BinaryDataset>(data));
}

EvalReport accuracy_of(const AnyData& data, std::span<const double> w) {
  EvalReport r;
  if (auto* s = std::get_if<SequenceDataset>(&data)) {
    r.accuracy = seq_accuracy(SeqCrfLayout::of(*s), w, *s);
    r.items = s->num_positions();
  } else if (auto* h = std::get_if<TaxonomyDataset>(&data)) {
    r.accuracy = hier_accuracy(HierLayout::of(*h), w, *h);
    r.items = h->size();
  } else {
    const auto& b = std::get<BinaryDataset>(data);
    r.accuracy = logistic_accuracy(b, w);
    r.items = b.size();
  }
  return r;
}

struct Split {
  AnyData train;
  std::optional<AnyData> test;
};

Split load_split(const RunManifest& m) {
  AnyData all = load(m.task, m.data_path, m.hierarchy_path, m.pixels, std::nullopt);
  if (!m.split.test_path.empty()) {
    std::optional<std::size_t> nf;
    if (m.task != Task::Seq) nf = raw_features(all);
    AnyData test = load(m.task, m.split.test_path, m.hierarchy_path, m.pixels, nf);
    return {std::move(all), std::move(test)};
  }
  if (m.split.test_fraction == 0.0) return {std::move(all), std::nullopt};

  const std::size_t n = item_count(all);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(m.split.seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_test = static_cast<std::size_t>(std::llround(m.split.test_fraction * static_cast<double>(n)));
  if (n_test == 0 || n_test >= n) throw std::invalid_argument("split leaves an empty train or test set");
  std::vector<std::size_t> test(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
  return {select(all, train), select(all, test)};
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

}  // namespace

TrainOutcome train(const RunManifest& manifest) {
  manifest.validate();
  const auto start = std::chrono::steady_clock::now();
  Split split = load_split(manifest);
  auto oracle = make_oracle(split.train, manifest.threads);

  TrainOutcome out;
  out.result = solve(*oracle, manifest.solver);
  out.dimension = oracle->dimension();
  out.train_size = item_count(split.train);
  if (split.test) {
    out.test_size = item_count(*split.test);
    out.test_accuracy = accuracy_of(*split.test, out.result.w).accuracy;
  }
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace) {
  out << "iter,epoch,time_sec,objective,nnz,active_set,step_size,inner_sweeps,oracle_passes\n";
  for (const auto& r : trace) {
    out << r.iter << ',' << r.epoch << ',' << fmt("%.6f", r.elapsed_seconds) << ',' << fmt("%.17g", r.objective)
        << ',' << r.nnz << ',' << r.active_set << ',' << fmt("%.17g", r.step_size) << ',' << r.inner_sweeps << ','
        << r.oracle_passes << '\n';
  }
}

void write_summary(std::ostream& out, const RunManifest& manifest, const TrainOutcome& o) {
  const SolveResult& r = o.result;
  out << "task: " << to_string(manifest.task) << '\n';
  out << "solver: " << to_string(manifest.solver.kind) << '\n';
  out << "status: " << to_string(r.status) << '\n';
  out << "lambda: " << format_double(manifest.solver.lambda) << '\n';
  out << "dimension: " << o.dimension << '\n';
  out << "train_size: " << o.train_size << '\n';
  out << "final_objective: " << fmt("%.17g", r.objective) << '\n';
  out << "stationarity: " << fmt("%.6g", r.stationarity) << '\n';
  out << "nnz: " << count_nonzeros(r.w) << '\n';
  out << "iterations: " << (r.trace.empty() ? 0 : r.trace.back().iter) << '\n';
  out << "epochs: " << r.epochs << '\n';
  out << "oracle_passes: " << (r.trace.empty() ? 0 : r.trace.back().oracle_passes) << '\n';
  out << "wall_time_sec: " << fmt("%.3f", o.wall_seconds) << '\n';
  if (o.test_accuracy) {
    out << "test_size: " << o.test_size << '\n';
    out << "test_accuracy: " << fmt("%.6f", *o.test_accuracy) << '\n';
  }
  if (!r.message.empty()) out << "message: " << r.message << '\n';
}

namespace {

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  return out;
}

}  // namespace

int run_train(const RunManifest& manifest, std::ostream& log) {
  TrainOutcome o = train(manifest);
  if (!manifest.trace_path.empty()) {
    auto f = open_output(manifest.trace_path);
    write_trace_csv(f, o.result.trace);
  }
  if (!manifest.model_path.empty()) {
    save_model(manifest.model_path, {to_string(manifest.task), o.dimension, manifest.solver.lambda, o.result.w});
  }
  if (!manifest.summary_path.empty()) {
    auto f = open_output(manifest.summary_path);
    write_summary(f, manifest, o);
  }
  write_summary(log, manifest, o);
  switch (o.result.status) {
    case SolveStatus::Converged:
      return 0;
    case SolveStatus::MaxOuterReached:
      return 2;
    case SolveStatus::LineSearchFailed:
      return 3;
  }
  return 1;
}

EvalReport run_eval(const std::string& model_path, const std::string& data_path, Task task,
                    const std::string& hierarchy_path, std::size_t pixels) {
  const ModelFile model = load_model(model_path);
  if (!model.task.empty() && model.task != to_string(task))
    throw DataError("model was trained for task '" + model.task + "', not '" + to_string(task) + "'");
  auto mismatch = [&](std::size_t expected) {
    return DataError("model dimension " + std::to_string(model.dimension) + " does not match the data (expected " +
                     std::to_string(expected) + ")");
  };

  std::optional<AnyData> data;
  switch (task) {
    case Task::Seq: {
      data = load(task, data_path, hierarchy_path, pixels, std::nullopt);
      const std::size_t expected = SeqCrfLayout::of(std::get<SequenceDataset>(*data)).dimension();
      if (expected != model.dimension) throw mismatch(expected);
      break;
    }
    case Task::Hier:
    case Task::Logistic: {
      std::size_t classes = 1;
      if (task == Task::Hier) {
        // Read the taxonomy alone first to learn K, then pin J = d / K for the data file.
        AnyData probe = load(task, data_path, hierarchy_path, pixels, std::nullopt);
        classes = std::get<TaxonomyDataset>(probe).tree.num_classes();
        if (model.dimension % classes != 0) throw mismatch(classes * std::get<TaxonomyDataset>(probe).num_features());
      }
      try {
        data = load(task, data_path, hierarchy_path, pixels, model.dimension / classes);
      } catch (const DataError&) {
        throw mismatch(model.dimension);
      }
      break;
    }
  }
  return accuracy_of(*data, model.weights);
}

std::optional<std::uint64_t> CompareOutcome::passes_to_reach(std::size_t run, double tolerance) const {
  const double scale = std::max(std::abs(best_objective), 1e-300);
  for (const auto& r : runs.at(run).result.trace) {
    if ((r.objective - best_objective) / scale <= tolerance) return r.oracle_passes;
  }
  return std::nullopt;
}

CompareOutcome compare(const RunManifest& manifest, const std::vector<std::string>& solvers) {
  if (solvers.size() < 2) throw std::invalid_argument("compare needs at least two solvers");
  manifest.validate();
  Split split = load_split(manifest);

  CompareOutcome out;
  for (const std::string& entry : solvers) {
    std::string name = entry;
    bool shrink = manifest.solver.shrink_enabled;
    if (const auto colon = name.find(':'); colon != std::string::npos) {
      const std::string option = name.substr(colon + 1);
      if (option != "no-shrink") throw std::invalid_argument("unknown solver option '" + option + "'");
      shrink = false;
      name = name.substr(0, colon);
    }
    SolverConfig config = manifest.solver;
    config.kind = parse_solver(name);
    config.shrink_enabled = shrink;
    auto oracle = make_oracle(split.train, manifest.threads);
    out.runs.push_back({config.kind, shrink, entry, solve(*oracle, config)});
  }
  out.best_objective = out.runs.front().result.objective;
  for (const auto& r : out.runs) out.best_objective = std::min(out.best_objective, r.result.objective);
  return out;
}

void write_compare_csv(std::ostream& out, const CompareOutcome& o) {
  out << "solver,iter,epoch,time_sec,objective,rel_diff,nnz,active_set,step_size,inner_sweeps,oracle_passes\n";
  const double scale = std::max(std::abs(o.best_objective), 1e-300);
  for (const auto& run : o.runs) {
    for (const auto& r : run.result.trace) {
      out << run.label << ',' << r.iter << ',' << r.epoch << ',' << fmt("%.6f", r.elapsed_seconds) << ','
          << fmt("%.17g", r.objective) << ',' << fmt("%.6e", (r.objective - o.best_objective) / scale) << ','
          << r.nnz << ',' << r.active_set << ',' << fmt("%.17g", r.step_size) << ',' << r.inner_sweeps << ','
          << r.oracle_passes << '\n';
    }
  }
}

int run_compare(const RunManifest& manifest, const std::vector<std::string>& solvers, const std::string& csv_path,
                std::ostream& log) {
  CompareOutcome o = compare(manifest, solvers);
  if (!csv_path.empty()) {
    auto f = open_output(csv_path);
    write_compare_csv(f, o);
  } else {
    write_compare_csv(log, o);
  }
  log << "best_objective: " << fmt("%.17g", o.best_objective) << '\n';
  for (std::size_t k = 0; k < o.runs.size(); ++k) {
    const auto& r = o.runs[k].result;
    log << o.runs[k].label << ": objective " << fmt("%.17g", r.objective) << ", status " << to_string(r.status)
        << ", passes " << (r.trace.empty() ? 0 : r.trace.back().oracle_passes);
    if (auto p = o.passes_to_reach(k, 1e-4)) log << ", passes to rel-diff 1e-4: " << *p;
    log << '\n';
  }
  return 0;
}

}  // namespace pqn
