#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lookback/config.hpp"
#include "lookback/error.hpp"
#include "lookback/pipeline.hpp"

using namespace lookback;

namespace {

void print_plan(const pipeline::CallPlan& p) {
  std::cout << "planned backend calls: score=" << p.score << " generate=" << (p.lower_bound ? ">=" : "")
            << p.generate << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lookback: image lookback decoding for vision-language models"};
  std::string config_path;
  std::vector<std::string> overrides;
  bool dry_run = false, force = false, quiet = false;
  app.add_option("-c,--config", config_path, "run config (TOML)")->required();
  app.add_option("--set", overrides, "override a config value, e.g. --set sampling.n_passes=4");
  app.add_flag("--dry-run", dry_run, "print planned backend call counts and exit");
  app.add_flag("-q,--quiet", quiet, "suppress progress output");
  // path shortcuts, relative to the working directory
  std::string questions, traces, vocab, out;
  app.add_option("--questions", questions, "questions JSONL (paths.questions)");
  app.add_option("--traces", traces, "traces JSONL (paths.traces)");
  app.add_option("--vocab", vocab, "phrase vocabulary JSON (paths.vocab)");
  app.add_option("--out", out,
                 "main output of the subcommand: probe records, vocabulary, traces, eval records or report dir");
  app.fallthrough();
  app.require_subcommand(1);
  auto* probe = app.add_subcommand("probe", "score traces under real, noise and no image");
  auto* mine = app.add_subcommand("mine", "mine pause phrases and lookback templates");
  auto* decode = app.add_subcommand("decode", "decode questions through the lookback controller");
  auto* evalc = app.add_subcommand("eval", "turn traces into eval records");
  auto* report = app.add_subcommand("report", "comparison tables, pass@k, z-scores, token footprints");
  report->add_flag("--force", force, "accept inputs that mix config hashes");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  pipeline::RunOptions opts;
  opts.dry_run = dry_run;
  opts.force = force;
  opts.log = quiet ? nullptr : &std::cerr;
  try {
    auto set_path = [&](const std::string& key, const std::string& value) {
      if (value.empty()) return;
      const nlohmann::json quoted = std::filesystem::absolute(value).string();
      overrides.push_back("paths." + key + "=" + quoted.dump());
    };
    set_path("questions", questions);
    set_path("traces", traces);
    set_path("vocab", vocab);
    if (*probe) set_path("probe_records", out);
    if (*mine) set_path("vocab", out);
    if (*decode) set_path("traces", out);
    if (*evalc) set_path("eval_records", out);
    if (*report) set_path("reports", out);
    const auto cfg = config::load(config_path, overrides);
    if (*probe || *decode) {
      auto backend = pipeline::make_backend(cfg);
      if (*probe) {
        auto s = pipeline::cmd_probe(cfg, *backend, opts);
        if (dry_run) print_plan(s.planned);
      } else {
        auto s = pipeline::cmd_decode(cfg, *backend, opts);
        if (dry_run) print_plan(s.planned);
      }
    } else if (*mine) {
      pipeline::cmd_mine(cfg, opts);
    } else if (*evalc) {
      pipeline::cmd_eval(cfg, opts);
    } else if (*report) {
      auto s = pipeline::cmd_report(cfg, opts);
      for (const auto& o : s.outputs) std::cout << o << "\n";
    }
    if (dry_run && (*mine || *evalc || *report)) print_plan({});
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return pipeline::exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
