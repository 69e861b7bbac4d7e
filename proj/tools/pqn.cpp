#include <CLI11.hpp>

#include <charconv>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "pqn/error.hpp"
#include "pqn/run.hpp"
#include "pqn/synthetic.hpp"

namespace {

struct Options {
  std::string task = "logistic";
  std::string solver = "prox-qn";
  std::string split;
  std::string clock = "wall";
  bool no_shrink = false;
  std::uint64_t seed = 1;
  pqn::RunManifest manifest;
};

void add_run_options(CLI::App& cmd, Options& o, bool with_outputs) {
  auto& m = o.manifest;
  cmd.add_option("--task", o.task, "seq, hier or logistic")->required()->check(CLI::IsMember({"seq", "hier", "logistic"}));
  cmd.add_option("--data", m.data_path, "training data file")->required()->check(CLI::ExistingFile);
  cmd.add_option("--hierarchy", m.hierarchy_path, "'parent child' file for the hier task")->check(CLI::ExistingFile);
  cmd.add_option("--pixels", m.pixels, "pixels per letter for the seq task")->capture_default_str();
  cmd.add_option("--lambda", m.solver.lambda, "l1 penalty")->capture_default_str();
  cmd.add_option("--epsilon", m.solver.epsilon, "stationarity tolerance")->capture_default_str();
  cmd.add_option("--memory", m.solver.memory, "L-BFGS memory")->capture_default_str();
  cmd.add_option("--beta", m.solver.beta, "line-search backtracking factor")->capture_default_str();
  cmd.add_option("--sigma", m.solver.sigma, "Armijo constant")->capture_default_str();
  cmd.add_option("--max-inner", m.solver.max_inner, "max coordinate-descent sweeps per subproblem")->capture_default_str();
  cmd.add_option("--max-outer", m.solver.max_outer, "max outer iterations")->capture_default_str();
  cmd.add_flag("--no-shrink", o.no_shrink, "disable working-set shrinking");
  cmd.add_option("--seed", o.seed, "seed for the split and the coordinate order")->capture_default_str();
  cmd.add_option("--split", o.split, "held-out fraction in (0,1) or a test data file");
  cmd.add_option("--threads", m.threads, "oracle threads")->capture_default_str();
  cmd.add_option("--clock", o.clock, "wall: record elapsed time; none: write 0 for reproducible traces")
      ->capture_default_str()
      ->check(CLI::IsMember({"wall", "none"}));
  if (with_outputs) {
    cmd.add_option("--solver", o.solver, "prox-qn or prox-gd")->capture_default_str();
    cmd.add_option("--trace-out", m.trace_path, "trace CSV");
    cmd.add_option("--model-out", m.model_path, "model file");
    cmd.add_option("--summary-out", m.summary_path, "summary file");
  }
}

void finalize(Options& o) {
  auto& m = o.manifest;
  m.task = pqn::parse_task(o.task);
  m.solver.kind = pqn::parse_solver(o.solver);
  m.solver.shrink_enabled = !o.no_shrink;
  m.solver.seed = o.seed;
  m.solver.measure_time = o.clock == "wall";
  m.split.seed = o.seed;
  if (!o.split.empty()) {
    double f = 0.0;
    auto [ptr, ec] = std::from_chars(o.split.data(), o.split.data() + o.split.size(), f);
    if (ec == std::errc() && ptr == o.split.data() + o.split.size()) {
      m.split.test_fraction = f;
    } else {
      m.split.test_path = o.split;
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"l1-regularized proximal quasi-Newton training"};
  app.require_subcommand(1);

  Options train_opts;
  auto* train = app.add_subcommand("train", "fit a model and write its trace, weights and summary");
  add_run_options(*train, train_opts, true);

  Options cmp_opts;
  std::vector<std::string> solvers;
  std::string cmp_out;
  auto* cmp = app.add_subcommand("compare", "run several solvers on the same data");
  add_run_options(*cmp, cmp_opts, false);
  cmp->add_option("--solvers", solvers, "e.g. prox-qn,prox-gd,prox-qn:no-shrink")->required()->delimiter(',');
  cmp->add_option("--compare-out", cmp_out, "comparison CSV (stdout if omitted)");

  std::string eval_task, eval_model, eval_data, eval_hier;
  std::size_t eval_pixels = 128;
  auto* eval = app.add_subcommand("eval", "accuracy of a saved model on a data file");
  eval->add_option("--task", eval_task)->required()->check(CLI::IsMember({"seq", "hier", "logistic"}));
  eval->add_option("--model", eval_model)->required()->check(CLI::ExistingFile);
  eval->add_option("--data", eval_data)->required()->check(CLI::ExistingFile);
  eval->add_option("--hierarchy", eval_hier)->check(CLI::ExistingFile);
  eval->add_option("--pixels", eval_pixels)->capture_default_str();

  std::string synth_kind, synth_out, synth_hier_out;
  std::size_t synth_n = 0;
  std::uint64_t synth_seed = 1;
  auto* synth = app.add_subcommand("synth", "write a small synthetic data set");
  synth->add_option("--kind", synth_kind)->required()->check(CLI::IsMember({"logistic", "binary", "seq", "hier"}));
  synth->add_option("--out", synth_out)->required();
  synth->add_option("--hierarchy-out", synth_hier_out, "hier kind: where to write the taxonomy");
  synth->add_option("--n", synth_n, "instances (words for seq); 0 keeps the generator default");
  synth->add_option("--seed", synth_seed)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      finalize(train_opts);
      return pqn::run_train(train_opts.manifest, std::cout);
    }
    if (*cmp) {
      finalize(cmp_opts);
      return pqn::run_compare(cmp_opts.manifest, solvers, cmp_out, std::cout);
    }
    if (*eval) {
      const auto report = pqn::run_eval(eval_model, eval_data, pqn::parse_task(eval_task), eval_hier, eval_pixels);
      std::printf("items: %zu\naccuracy: %.6f\n", report.items, report.accuracy);
      return 0;
    }
    if (*synth) {
      if (synth_kind == "logistic") {
        pqn::LogisticSpec spec;
        spec.seed = synth_seed;
        if (synth_n) spec.instances = synth_n;
        pqn::write_svmlight(synth_out, pqn::synthetic_logistic(spec));
      } else if (synth_kind == "binary") {
        pqn::write_svmlight(synth_out, pqn::balanced_binary(synth_n ? synth_n : 1000, 20, synth_seed));
      } else if (synth_kind == "seq") {
        pqn::LetterSpec spec;
        spec.seed = synth_seed;
        if (synth_n) spec.words = synth_n;
        pqn::write_synthetic_letters(synth_out, spec);
      } else {
        if (synth_hier_out.empty()) throw std::invalid_argument("--hierarchy-out is required for kind hier");
        pqn::TaxonomySpec spec;
        spec.seed = synth_seed;
        if (synth_n) spec.instances = synth_n;
        pqn::write_svmlight(synth_out, synth_hier_out, pqn::synthetic_taxonomy(spec));
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
