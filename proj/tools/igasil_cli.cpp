// igasil: train, evaluate and inspect independent self-imitation learners.

#include "igasil/config.hpp"
#include "igasil/plot.hpp"
#include "igasil/selftest.hpp"
#include "igasil/studies.hpp"
#include "igasil/trainer.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using namespace igasil;

namespace {

enum Exit { kOk = 0, kUsage = 1, kRuntime = 2, kSelftest = 3 };

fs::path output_root() {
  const char* env = std::getenv("IGASIL_OUT");
  return env && *env ? fs::path(env) : fs::path("runs");
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto dash = item.find('-');
    try {
      if (dash != std::string::npos) {
        const auto lo = std::stoull(item.substr(0, dash));
        const auto hi = std::stoull(item.substr(dash + 1));
        if (hi < lo) throw ConfigError("empty seed range '" + item + "'");
        for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
      } else {
        seeds.push_back(std::stoull(item));
      }
    } catch (const std::logic_error&) {
      throw ConfigError("invalid seed list '" + text + "'");
    }
  }
  if (seeds.empty()) throw ConfigError("empty seed list");
  return seeds;
}

void print_eval(const EvalResult& r) {
  std::cout << "episodes " << r.episodes << '\n';
  if (!r.mean_return) {
    std::cout << "mean_return no data\n";
    return;
  }
  std::cout << "mean_return " << *r.mean_return << '\n';
  for (std::size_t i = 0; i < kOutcomeCount; ++i)
    for (std::size_t j = 0; j < kOutcomeCount; ++j)
      if (r.histogram[i][j])
        std::cout << "outcome " << to_string(static_cast<Outcome>(i)) << ',' << to_string(static_cast<Outcome>(j)) << ' '
                  << static_cast<double>(r.histogram[i][j]) / static_cast<double>(r.episodes) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Independent generative adversarial self-imitation learning"};
  app.require_subcommand(1, 1);

  // train
  auto* train = app.add_subcommand("train", "train one run or a comparative study");
  std::string config_file, out_dir, study, seeds_text;
  std::size_t jobs = 1;
  bool no_reuse = false;
  train->add_option("--config", config_file, "flat key = value config file")->check(CLI::ExistingFile);
  train->add_option("--out", out_dir, "run (or study) directory; default $IGASIL_OUT/<name>");
  train->add_option("--study", study, "equilibrium, sample_efficiency or scer_ablation");
  train->add_option("--seeds", seeds_text, "study seeds, e.g. 1-5 or 1,3,5")->default_str("1-5");
  train->add_option("--jobs", jobs, "concurrent study runs")->default_val(1);
  train->add_flag("--no-reuse", no_reuse, "rerun study runs even when a finished identical run exists");
  const TrainConfig defaults;
  std::map<std::string, std::string> overrides;
  auto* keys = train->add_option_group("config keys", "every key also accepted in --config files");
  for (const auto& k : config_keys())
    keys->add_option("--" + k.name, overrides[k.name], k.doc)->default_str(k.get(defaults));

  // eval
  auto* eval = app.add_subcommand("eval", "greedy evaluation of a finished run");
  std::string run_dir;
  std::size_t eval_episodes = 0;
  std::uint64_t eval_seed = 12345;
  eval->add_option("--run", run_dir, "run directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--episodes", eval_episodes, "episodes (default: trainer.eval_episodes of the run)");
  eval->add_option("--seed", eval_seed, "evaluation seed")->default_val(12345);

  // replay-dump
  auto* dump = app.add_subcommand("replay-dump", "roll out a finished run and dump per-agent transitions");
  std::string dump_output;
  std::size_t dump_episodes = 1, dump_agent = 0;
  std::uint64_t dump_seed = 12345;
  dump->add_option("--run", run_dir, "run directory")->required()->check(CLI::ExistingDirectory);
  dump->add_option("--episodes", dump_episodes, "episodes")->default_val(1);
  dump->add_option("--agent", dump_agent, "agent index")->default_val(0);
  dump->add_option("--seed", dump_seed, "rollout seed")->default_val(12345);
  dump->add_option("--output", dump_output, "output file (default stdout)");

  // plot
  auto* plot = app.add_subcommand("plot", "render metrics CSVs as an SVG learning curve");
  std::vector<std::string> csvs;
  std::string svg_out, title;
  plot->add_option("csv", csvs, "metrics CSV files")->required()->check(CLI::ExistingFile);
  plot->add_option("--output,-o", svg_out, "SVG file")->required();
  plot->add_option("--title", title, "plot title");

  // selftest
  auto* selftest = app.add_subcommand("selftest", "run the fast invariant suite");
  bool inject_fault = false;
  selftest->add_flag("--inject-payoff-fault", inject_fault, "corrupt one payoff entry (checks the checker)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*train) {
      TrainConfig cfg;
      try {
        if (!config_file.empty()) apply_config_file(cfg, config_file);
        for (const auto& k : config_keys())
          if (keys->get_option("--" + k.name)->count() > 0) set_value(cfg, k.name, overrides[k.name]);
        if (study.empty()) {
          validate(cfg);
        } else {
          parse_study(study);
        }
      } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
      }
      if (!study.empty()) {
        std::vector<std::uint64_t> seeds;
        StudyKind kind;
        try {
          kind = parse_study(study);
          seeds = parse_seeds(seeds_text.empty() ? "1-5" : seeds_text);
          plan_study(kind, cfg, seeds, ".");
        } catch (const std::invalid_argument& e) {
          std::cerr << "error: " << e.what() << '\n';
          return kUsage;
        }
        const fs::path dir = out_dir.empty() ? output_root() / ("study_" + study + "_" + cfg.env) : fs::path(out_dir);
        run_study(kind, cfg, seeds, dir, jobs, !no_reuse);
        std::ifstream report(dir / "report.txt");
        std::cout << report.rdbuf() << "summary: " << (dir / "summary.csv").string() << '\n';
        return kOk;
      }
      const fs::path dir = out_dir.empty() ? output_root() / (cfg.env + "_" + std::string(to_string(cfg.variant)) +
                                                              "_seed" + std::to_string(cfg.seed))
                                           : fs::path(out_dir);
      const auto result = run_campaign(cfg, dir);
      std::cout << "run directory " << dir.string() << '\n';
      if (!result.rows.empty()) std::cout << "final window mean return " << result.rows.back().mean_return << '\n';
      return kOk;
    }
    if (*eval) {
      auto run = load_run(run_dir);
      auto env = make_environment(run.cfg);
      std::vector<const Agent*> agents;
      for (const auto& a : run.agents) agents.push_back(a.get());
      print_eval(evaluate(agents, *env, eval->count("--episodes") ? eval_episodes : run.cfg.eval_episodes, eval_seed));
      return kOk;
    }
    if (*dump) {
      auto run = load_run(run_dir);
      auto env = make_environment(run.cfg);
      if (dump_agent >= run.agents.size()) {
        std::cerr << "error: --agent must be below " << run.agents.size() << '\n';
        return kUsage;
      }
      std::ofstream file;
      if (!dump_output.empty()) {
        file.open(dump_output);
        if (!file) throw std::runtime_error("cannot write " + dump_output);
      }
      std::ostream& out = dump_output.empty() ? std::cout : file;
      out.precision(17);
      auto rng = make_stream(dump_seed, Stream::eval);
      std::vector<Actor> actors;
      for (const auto& a : run.agents) actors.push_back({a.get(), &rng});
      for (std::size_t e = 0; e < dump_episodes; ++e) {
        const auto ep = run_episode(*env, actors, ActMode::greedy, rng(), run.cfg.agent.gamma);
        const auto& steps = ep.trajectories[dump_agent].transitions();
        for (std::size_t t = 0; t < steps.size(); ++t) {
          out << e << ',' << t;
          for (double v : steps[t].obs) out << ',' << v;
          for (double v : steps[t].action) out << ',' << v;
          out << ',' << steps[t].reward << ',' << (steps[t].done ? 1 : 0) << '\n';
        }
      }
      return kOk;
    }
    if (*plot) {
      std::vector<fs::path> paths(csvs.begin(), csvs.end());
      PlotOptions opt;
      opt.title = title;
      const std::string svg = plot_metrics(paths, opt);
      std::ofstream f(svg_out);
      if (!(f << svg)) throw std::runtime_error("cannot write " + svg_out);
      return kOk;
    }
    if (*selftest) {
      SelftestHooks hooks;
      if (inject_fault) {
        PayoffMatrix m = PayoffMatrix::rescue_table();
        m.values[0][0] = 10.0;
        hooks.payoff = m;
      }
      const auto checks = run_selftest(hooks);
      print_selftest_report(std::cout, checks);
      return all_passed(checks) ? kOk : kSelftest;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}
