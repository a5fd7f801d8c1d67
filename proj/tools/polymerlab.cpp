// polymerlab command-line driver.
#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "polymerlab/experiment.hpp"

using namespace polymerlab;

namespace {

void emit_error(const std::string& category, const std::string& message) {
  Json j{{"error", category}, {"message", message}};
  std::cerr << j.dump() << '\n';
}

Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  Json j = Json::parse(in, nullptr, false);
  if (j.is_discarded()) throw IoError(path + " is not valid JSON");
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("write failed for " + path);
}

// JSON to `out` (CSV next to it), or JSON to stdout without --out.
void publish(const ResultRecord& r, const std::string& out) {
  const std::string json = to_json(r).dump(2) + "\n";
  if (out.empty()) {
    std::cout << json;
    return;
  }
  write_text(out, json);
  if (r.series) {
    const auto csv = std::filesystem::path(out).replace_extension(".csv");
    write_text(csv.string(), to_csv(*r.series));
  }
  std::cout << r.summary() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Moment and intersection experiments for planar directed polymers", "polymerlab"};
  std::string command, target, config_path, out;
  std::vector<std::string> sets;
  std::uint64_t seed = 0, replicates = 0;
  unsigned threads = 0;
  std::string names;
  for (const auto& n : command_names()) names += "\n  " + n;
  app.footer("Commands:" + names + "\n  replay <record.json>");
  app.add_option("command", command, "Experiment to run, or 'replay'")->required();
  app.add_option("record", target, "Record to replay");
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--set", sets, "Parameter override key=value (repeatable)");
  auto* seed_opt = app.add_option("--seed", seed, "Root seed");
  auto* reps_opt = app.add_option("--replicates", replicates, "Monte Carlo replicates");
  app.add_option("--threads", threads, "Worker threads (default: POLYMERLAB_THREADS, then all cores)");
  app.add_option("--out", out, "Write the JSON record here (CSV series beside it)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    emit_error("usage", e.what());
    return exit_code::usage;
  }

  try {
    if (command == "replay") {
      if (target.empty()) {
        emit_error("usage", "replay needs a record path");
        return exit_code::usage;
      }
      if (!sets.empty() || !config_path.empty()) {
        emit_error("usage", "replay takes only --seed, --replicates, --threads and --out");
        return exit_code::usage;
      }
      const auto rec = record_from_json(read_json(target));
      ReplayOptions opt;
      if (*seed_opt) opt.seed = seed;
      if (*reps_opt) opt.replicates = replicates;
      opt.threads = threads;
      const auto rep = replay(rec, opt);
      Json j{{"status", to_string(rep.status)},
             {"fingerprint", rec.fingerprint},
             {"fresh_fingerprint", rep.fresh.fingerprint},
             {"drifted", rep.drifted}};
      std::cout << j.dump() << '\n';
      if (!out.empty()) publish(rep.fresh, out);
      return rep.status == ReplayReport::Status::drift ? exit_code::drift : exit_code::ok;
    }
    if (!target.empty()) {
      emit_error("usage", "unexpected argument '" + target + "'");
      return exit_code::usage;
    }

    ExperimentConfig cfg;
    if (!config_path.empty()) cfg = config_from_json(read_json(config_path));
    if (cfg.command.empty() || command != cfg.command) cfg.command = command;
    const auto& known = command_names();
    if (std::find(known.begin(), known.end(), cfg.command) == known.end()) {
      emit_error("unknown_command", "unknown command '" + cfg.command + "'");
      return exit_code::unknown_command;
    }
    for (const auto& s : sets) apply_override(cfg, s);
    if (*seed_opt) cfg.seed = seed;
    if (*reps_opt) cfg.replicates = replicates;
    if (threads) cfg.threads = threads;
    if (!out.empty()) cfg.output_path = out;
    publish(run(cfg), cfg.output_path);
    return exit_code::ok;
  } catch (const Error& e) {
    emit_error(category_name(e.category()), e.what());
    return exit_code_for(e.category());
  } catch (const std::exception& e) {
    emit_error("internal", e.what());
    return exit_code::internal;
  }
}
