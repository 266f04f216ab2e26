// Command-line driver: builds an experiment plan from a preset and/or a plan
// file plus dotted-path overrides, validates it, and runs it into an output
// directory. Exit codes: 2 usage, 3 bad configuration, 4 size cap, 5 runtime
// failure, 6 filesystem trouble.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nqs/experiments.hpp"
#include "nqs/io.hpp"

namespace {

struct CliOptions {
  std::string plan_path;
  std::string preset;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::string log_level = "info";
  std::uint64_t seed = 0;
  int workers = 0;
  bool seed_given = false;
  bool workers_given = false;
};

void add_common_options(CLI::App* cmd, CliOptions& opt, bool out_required) {
  cmd->add_option("--plan", opt.plan_path, "Plan JSON file to start from")
      ->check(CLI::ExistingFile);
  cmd->add_option("--preset", opt.preset, "Built-in plan to start from");
  cmd->add_option("--set", opt.overrides,
                  "Override a plan field, e.g. --set step.eta=0.02")
      ->take_all();
  auto* out = cmd->add_option("--out", opt.out_dir, "Output directory");
  if (out_required) out->required();
  cmd->add_option("--seed", opt.seed, "Master seed")
      ->each([&opt](const std::string&) { opt.seed_given = true; });
  cmd->add_option("--workers", opt.workers, "Worker threads")
      ->each([&opt](const std::string&) { opt.workers_given = true; });
  cmd->add_option("--log-level", opt.log_level, "error, warn, info or debug");
}

// Subcommand -> plan kinds it may run.
struct Command {
  const char* name;
  const char* help;
  std::vector<std::string> kinds;
};

const std::vector<Command>& commands() {
  static const std::vector<Command> cmds = {
      {"ground-state", "Variational ground-state search", {"ground_state"}},
      {"evolve", "Generic time evolution", {"evolve", "kz_single"}},
      {"sudden-quench", "Quench then track observables", {"sudden_quench"}},
      {"kz-scan", "Ramp-duration scan of injected energy", {"kz_scan"}},
      {"dt-scan", "Residual vs time-step scan", {"dt_scan"}},
      {"noise-scan", "Residual spread vs sample count", {"noise_scan"}},
      {"qgt-spectra", "Geometric-tensor eigenvalue spectra", {"qgt_spectra"}},
  };
  return cmds;
}

nqs::ExperimentPlan build_plan(const CliOptions& opt,
                               const std::vector<std::string>& allowed_kinds) {
  if (!opt.preset.empty() && !opt.plan_path.empty())
    throw nqs::ConfigError("give either --preset or --plan, not both");

  nlohmann::json j;
  if (!opt.preset.empty()) {
    j = nqs::plan_to_json(nqs::preset_plan(opt.preset));
  } else if (!opt.plan_path.empty()) {
    j = nqs::read_json_file(opt.plan_path);
  } else {
    j = nqs::plan_to_json(nqs::ExperimentPlan{});
    if (!allowed_kinds.empty()) j["kind"] = allowed_kinds.front();
  }

  if (!allowed_kinds.empty() && j.contains("kind")) {
    const std::string kind = j["kind"].get<std::string>();
    bool ok = false;
    for (const auto& k : allowed_kinds) ok = ok || k == kind;
    if (!ok)
      throw nqs::ConfigError("plan kind \"" + kind +
                             "\" does not belong to this command; expected " +
                             allowed_kinds.front());
  }

  for (const auto& assignment : opt.overrides) nqs::apply_override(j, assignment);
  nqs::ExperimentPlan plan = nqs::plan_from_json(j);
  if (opt.seed_given) plan.seed = opt.seed;
  if (opt.workers_given) plan.workers = opt.workers;
  return plan;
}

void emit_error(const char* type, const std::string& message,
                const std::string& out_dir) {
  nlohmann::json rec = {{"error", {{"type", type}, {"message", message}}}};
  std::cerr << rec.dump() << "\n";
  if (!out_dir.empty()) {
    std::error_code ec;
    if (std::filesystem::exists(out_dir, ec)) {
      try {
        nqs::write_json_file(std::filesystem::path(out_dir) / "error.json", rec);
      } catch (const std::exception&) {
        // stderr already has the record
      }
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Normalized-ansatz quantum dynamics toolkit"};
  app.set_version_flag("--version", std::string(nqs::k_version));
  app.require_subcommand(1);

  CliOptions opt;
  std::vector<std::pair<CLI::App*, const Command*>> subs;
  for (const auto& cmd : commands()) {
    CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
    add_common_options(sub, opt, /*out_required=*/true);
    subs.emplace_back(sub, &cmd);
  }
  CLI::App* validate =
      app.add_subcommand("validate-config", "Check a plan without running it");
  add_common_options(validate, opt, /*out_required=*/false);

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
    return 2;
  }

  try {
    nqs::set_log_level(nqs::parse_log_level(opt.log_level));
  } catch (const std::exception& e) {
    emit_error("usage", e.what(), "");
    return 2;
  }

  try {
    if (validate->parsed()) {
      const nqs::ExperimentPlan plan = build_plan(opt, {});
      nqs::validate_plan(plan);
      const nlohmann::json resolved = nqs::resolved_config(plan);
      if (!opt.out_dir.empty()) {
        nqs::ensure_dir(opt.out_dir);
        nqs::write_json_file(
            std::filesystem::path(opt.out_dir) / "resolved_config.json",
            resolved);
      } else {
        std::cout << resolved.dump(2) << "\n";
      }
      return 0;
    }

    for (const auto& [sub, cmd] : subs) {
      if (!sub->parsed()) continue;
      nqs::ExperimentPlan plan = build_plan(opt, cmd->kinds);
      const nqs::RunResult result = nqs::run_plan(plan, opt.out_dir);
      std::cout << (result.dir / "summary.json").string() << "\n";
      return 0;
    }
    emit_error("usage", "no subcommand given", "");
    return 2;
  } catch (const nqs::ConfigError& e) {
    emit_error("config", e.what(), opt.out_dir);
    return 3;
  } catch (const nqs::CapError& e) {
    emit_error("cap", e.what(), opt.out_dir);
    return 4;
  } catch (const nqs::IoError& e) {
    emit_error("io", e.what(), opt.out_dir);
    return 6;
  } catch (const nqs::RunFailure& e) {
    emit_error("runtime", e.what(), opt.out_dir);
    return 5;
  } catch (const std::exception& e) {
    emit_error("runtime", e.what(), opt.out_dir);
    return 5;
  }
}
