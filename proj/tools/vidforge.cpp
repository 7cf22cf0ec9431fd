// vidforge: pipeline stages and the token planner from the command line.
// Exit codes: 0 success, 1 validation error, 2 stage failure.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "vidforge/pipeline.hpp"
#include "vidforge/repplan.hpp"

namespace {

using namespace vidforge;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitStage = 2;

struct CommonOptions {
  std::string config;
  std::vector<std::string> set;
  std::string manifest;
  std::string backend;
  std::string output;
  std::string filter_chain;
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* sub, CommonOptions& o) {
  sub->add_option("-c,--config", o.config, "Pipeline config file (key = value)")->required();
  sub->add_option("--set", o.set, "Override a config key: --set key=value (repeatable)");
  sub->add_option("--manifest", o.manifest, "Override manifest");
  sub->add_option("--backend", o.backend, "Override backend.kind (mock|remote)");
  sub->add_option("-o,--output", o.output, "Override output_dir");
  sub->add_option("--filter-chain", o.filter_chain, "Use this configured chain for every source");
  sub->add_option("--workers", o.workers, "Override workers");
  sub->add_option("--seed", o.seed, "Override seed and backend.seed");
}

PipelineConfig resolve(const CommonOptions& o) {
  std::vector<std::string> overrides = o.set;
  if (!o.manifest.empty()) overrides.push_back("manifest=" + fs::absolute(o.manifest).string());
  if (!o.output.empty()) overrides.push_back("output_dir=" + fs::absolute(o.output).string());
  if (!o.backend.empty()) overrides.push_back("backend.kind=" + o.backend);
  if (o.workers) overrides.push_back("workers=" + std::to_string(*o.workers));
  if (o.seed) {
    overrides.push_back("seed=" + std::to_string(*o.seed));
    overrides.push_back("backend.seed=" + std::to_string(*o.seed));
  }
  auto cfg = load_config(o.config, overrides);
  if (!o.filter_chain.empty()) {
    if (!cfg.filters.chains.count(o.filter_chain))
      throw ConfigError("--filter-chain", "chain '" + o.filter_chain + "' is not defined in the config");
    cfg.filters.per_source.clear();
    cfg.filters.default_chain = o.filter_chain;
  }
  return cfg;
}

void print_stage(const StageSummary& s) {
  std::cout << s.stage << ":";
  for (const auto& [k, v] : s.counts.items()) std::cout << " " << k << "=" << v.dump();
  std::cout << "\n";
  for (const auto& [asset, err] : s.failures) std::cout << "  failed " << asset << ": " << err << "\n";
}

int report(const RunSummary& sum, bool as_json) {
  if (as_json) {
    std::cout << sum.to_json().dump(2) << "\n";
  } else {
    for (const auto& s : sum.stages) print_stage(s);
    if (sum.fatal) std::cout << "halted: " << *sum.fatal << "\n";
  }
  return sum.ok() ? kExitOk : kExitStage;
}

int plan_tokens(std::optional<std::int64_t> T, std::int64_t M, std::int64_t s, std::int64_t p,
                const std::string& convention, std::optional<std::int64_t> budget, bool as_json) {
  auto conv = repplan::parse_convention(convention);
  json out{{"M", M}, {"s", s}, {"p", p}, {"convention", convention}};
  std::optional<repplan::TokenPlan> plan;
  if (T) {
    plan = repplan::build_plan({*T, M, s, p}, conv);
    out["T"] = *T;
    out["plan"] = repplan::to_json(*plan);
  }
  std::optional<std::int64_t> max_t;
  if (budget) {
    max_t = repplan::max_frames_under_budget(M, s, p, *budget, conv);
    out["budget"] = *budget;
    out["max_frames"] = *max_t;
  }
  if (as_json) {
    std::cout << out.dump(2) << "\n";
    return kExitOk;
  }
  std::printf("convention      %s\n", convention.c_str());
  std::printf("M / s / p       %lld / %lld / %lld\n", static_cast<long long>(M), static_cast<long long>(s),
              static_cast<long long>(p));
  if (plan) {
    std::printf("T               %lld\n", static_cast<long long>(*T));
    std::printf("slow frames     %zu x %lld tokens\n", plan->slow_indices.size(),
                static_cast<long long>(plan->tokens_slow));
    std::printf("fast frames     %zu x %lld tokens\n", plan->fast_indices.size(),
                static_cast<long long>(plan->tokens_fast));
    std::printf("total tokens    %lld\n", static_cast<long long>(plan->total));
    std::string layout;
    std::size_t si = 0;
    for (std::int64_t i = 0; i < *T && i < 64; ++i) {
      bool slow = si < plan->slow_indices.size() && plan->slow_indices[si] == i;
      if (slow) ++si;
      layout.push_back(slow ? 'S' : 'f');
    }
    if (*T > 64) layout += "...";
    std::printf("layout          %s\n", layout.c_str());
  }
  if (max_t)
    std::printf("max T for %lld   %lld\n", static_cast<long long>(*budget), static_cast<long long>(*max_t));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vidforge: video instruction-data synthesis pipeline"};
  app.require_subcommand(1);
  bool as_json = false;
  app.add_flag("--json", as_json, "Machine-readable summary on stdout");

  CommonOptions common;
  std::string stop_after = "stats";
  std::map<std::string, CLI::App*> stage_cmds;
  for (auto stage : kStages) {
    std::string name(stage);
    auto* sub = app.add_subcommand(name, "Run the " + name + " stage");
    add_common(sub, common);
    stage_cmds[name] = sub;
  }
  auto* run = app.add_subcommand("run", "Run filter, caption, qa, assemble and stats in order");
  add_common(run, common);
  run->add_option("--stop-after", stop_after, "Last stage to run")
      ->check(CLI::IsMember(std::vector<std::string>(kStages.begin(), kStages.end())));

  std::optional<std::int64_t> T, budget;
  std::int64_t M = 0, s = 1, p = 1;
  std::string convention = "grid";
  auto* plan = app.add_subcommand("plan-tokens", "Token counts for a slow/fast frame layout");
  plan->add_option("--T", T, "Number of frames");
  plan->add_option("--M", M, "Tokens per unpooled frame")->required();
  plan->add_option("--s", s, "Slow-frame stride")->default_val(1);
  plan->add_option("--p", p, "Pooling stride")->default_val(1);
  plan->add_option("--convention", convention, "grid or literal")->default_val("grid");
  plan->add_option("--budget", budget, "Report the largest T within this token budget");

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (plan->parsed()) {
      if (!T && !budget) throw ConfigError("plan-tokens", "give --T, --budget, or both");
      return plan_tokens(T, M, s, p, convention, budget, as_json);
    }
    PipelineConfig cfg = resolve(common);
    if (run->parsed()) return report(run_pipeline(cfg, stop_after), as_json);
    for (const auto& [name, sub] : stage_cmds) {
      if (!sub->parsed()) continue;
      RunSummary sum;
      try {
        Pipeline p(cfg);
        sum.stages.push_back(run_stage(p, name));
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception& e) {
        sum.fatal = name + ": " + e.what();
      }
      return report(sum, as_json);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStage;
  }
  return kExitValidation;
}
