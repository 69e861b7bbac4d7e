#pragma once

// Training, evaluation and solver comparison as used by the `pqn` command line tool.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pqn/solver.hpp"

namespace pqn {

enum class Task { Seq, Hier, Logistic };

Task parse_task(const std::string& name);
std::string to_string(Task task);
SolverKind parse_solver(const std::string& name);
std::string to_string(SolverKind kind);

struct SplitSpec {
  // Share of the data file held out for testing, in (0, 1). Zero means no held-out set
  // unless test_path is given.
  double test_fraction = 0.0;
  std::uint64_t seed = 1;
  std::string test_path;
};

struct RunManifest {
  Task task = Task::Logistic;
  std::string data_path;
  std::string hierarchy_path;  // hier task only
  std::size_t pixels = 128;    // seq task: raw pixels per letter
  SolverConfig solver;
  std::size_t threads = 1;
  SplitSpec split;
  std::string trace_path;
  std::string model_path;
  std::string summary_path;  // summary always goes to the log stream as well

  // Throws std::invalid_argument when the manifest cannot be run.
  void validate() const;
};

struct TrainOutcome {
  SolveResult result;
  std::size_t dimension = 0;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  std::optional<double> test_accuracy;
  double wall_seconds = 0.0;
};

TrainOutcome train(const RunManifest& manifest);

// Trains and writes the trace, model and summary. Returns 0 when the solver converged,
// 2 when it stopped on max_outer and 3 on a line-search failure. Other errors throw.
int run_train(const RunManifest& manifest, std::ostream& log);

void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace);
void write_summary(std::ostream& out, const RunManifest& manifest, const TrainOutcome& outcome);

struct EvalReport {
  double accuracy = 0.0;
  std::size_t items = 0;  // characters for seq, instances otherwise
};

// Accuracy of a saved model on a data file: per-character Viterbi accuracy for seq,
// top-1 leaf for hier, sign agreement for logistic. Throws DataError when the model
// dimension does not match the data.
EvalReport run_eval(const std::string& model_path, const std::string& data_path, Task task,
                    const std::string& hierarchy_path = "", std::size_t pixels = 128);

struct CompareRun {
  SolverKind kind;
  bool shrink_enabled = true;
  std::string label;
  SolveResult result;
};

struct CompareOutcome {
  std::vector<CompareRun> runs;
  double best_objective = 0.0;

  // First oracle-pass count at which a run's relative objective difference drops to
  // `tolerance`, or nullopt if it never does.
  std::optional<std::uint64_t> passes_to_reach(std::size_t run, double tolerance) const;
};

// Runs every entry of `solvers` ("prox-qn", "prox-gd", optionally suffixed ":no-shrink")
// on the same training data and seed. Needs at least two entries.
CompareOutcome compare(const RunManifest& manifest, const std::vector<std::string>& solvers);

// Long-format CSV: solver,iter,epoch,time_sec,objective,rel_diff,nnz,active_set,step_size,inner_sweeps,oracle_passes
void write_compare_csv(std::ostream& out, const CompareOutcome& outcome);

int run_compare(const RunManifest& manifest, const std::vector<std::string>& solvers,
                const std::string& csv_path, std::ostream& log);

}  // namespace pqn
