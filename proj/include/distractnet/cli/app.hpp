#pragma once

// Subcommands synth | preprocess | train | evaluate | topo.
//
// Exit status: 0 success, 2 invalid input or configuration, 3 numerical
// failure. Every output directory receives manifest.json with the resolved
// configuration, its hash and the seed.

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "distractnet/autodiff/checkpoint.hpp"
#include "distractnet/cli/config.hpp"
#include "distractnet/cli/toml.hpp"
#include "distractnet/evalstats/crossval.hpp"
#include "distractnet/evalstats/topography.hpp"
#include "distractnet/fingerprint.hpp"
#include "distractnet/sigcore/io.hpp"
#include "distractnet/sigcore/pipeline.hpp"
#include "distractnet/synthgen/generator.hpp"

namespace distractnet::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumerical = 3;

struct Options {
  std::string command;
  std::string config;
  std::string in;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::optional<int> precision;
  std::optional<std::size_t> subjects;
  std::string model = "Proposed";
  std::optional<std::string> band;
  bool force = false;
};

inline RunConfig resolve_config(const Options& o) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : run_config_from_json(toml::parse_file(o.config));
  if (o.seed) cfg.seed = *o.seed;
  if (o.jobs) cfg.jobs = *o.jobs;
  if (o.precision) cfg.precision = parse_precision(*o.precision);
  if (o.subjects) cfg.subjects = *o.subjects;
  if (o.band) cfg.topo_band = parse_band(*o.band);
  cfg.train.precision = cfg.precision;
  cfg.validate();
  return cfg;
}

inline std::string subject_name(std::size_t s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "subject-%02zu", s + 1);
  return buf;
}

/// Output directories, one per subject; a single subject writes into `out` itself.
inline std::vector<fs::path> subject_dirs(const fs::path& out, std::size_t subjects) {
  if (subjects == 1) return {out};
  std::vector<fs::path> dirs;
  for (std::size_t s = 0; s < subjects; ++s) dirs.push_back(out / subject_name(s));
  return dirs;
}

/// Subject directories under `in` holding `<stem>.json`: `in` itself, or its
/// subject-NN children in order.
inline std::vector<fs::path> find_inputs(const fs::path& in, const std::string& stem) {
  if (in.empty()) throw InputError("missing --in directory");
  if (!fs::is_directory(in)) throw InputError("input directory " + in.string() + " does not exist");
  if (fs::exists(io::header_path(in / stem))) return {in};
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(in))
    if (entry.is_directory() && entry.path().filename().string().rfind("subject-", 0) == 0 &&
        fs::exists(io::header_path(entry.path() / stem)))
      dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw InputError("no " + stem + " found in " + in.string());
  return dirs;
}

inline void prepare_output(const fs::path& dir, bool force) {
  if (dir.empty()) throw InputError("missing --out directory");
  if (fs::exists(dir / "manifest.json") && !force)
    throw InputError("output directory " + dir.string() + " already holds results; pass --force to overwrite");
  fs::create_directories(dir);
}

inline std::string upstream_hash(const fs::path& dir) {
  const auto path = dir / "manifest.json";
  if (!fs::exists(path)) return "";
  const auto j = io::read_json(path);
  return j.value("config_hash", "");
}

inline void write_manifest(const fs::path& dir, const std::string& command, const RunConfig& cfg, std::uint64_t seed,
                           nlohmann::json extra = nlohmann::json::object()) {
  nlohmann::json m = {{"command", command},
                      {"seed", seed},
                      {"config_hash", fingerprint(cfg.to_json())},
                      {"config", cfg.to_json()}};
  for (auto& [k, v] : extra.items()) m[k] = v;
  io::write_json(dir / "manifest.json", m);
}

inline int cmd_synth(const Options& o, const RunConfig& cfg, std::ostream& out) {
  const auto dirs = subject_dirs(o.out, cfg.subjects);
  for (std::size_t s = 0; s < dirs.size(); ++s) {
    prepare_output(dirs[s], o.force);
    const std::uint64_t seed = cfg.seed + s;
    const auto subject = generate_subject(cfg.synth, seed);
    io::write_recording(dirs[s] / "recording", subject.recording);
    write_manifest(dirs[s], "synth", cfg, seed, {{"ground_truth", subject.manifest}});
    out << dirs[s].string() << ": " << subject.recording.n_samples() << " samples, "
        << subject.recording.markers.size() << " events, " << subject.blinks.size() << " blinks\n";
  }
  return kExitOk;
}

inline int cmd_preprocess(const Options& o, const RunConfig& cfg, std::ostream& out) {
  const auto inputs = find_inputs(o.in, "recording");
  const auto dirs = subject_dirs(o.out, inputs.size());
  for (std::size_t s = 0; s < inputs.size(); ++s) {
    prepare_output(dirs[s], o.force);
    const std::uint64_t seed = cfg.seed + s;
    const auto res = preprocess(io::read_recording(inputs[s] / "recording"), cfg.preprocess, seed);
    io::write_epochs(dirs[s] / "epochs", res.epochs);
    nlohmann::json census;
    for (Tag t : kTags) census[std::string(to_string(t))] = res.unbalanced.count(t);
    write_manifest(dirs[s], "preprocess", cfg, seed,
                   {{"upstream_hash", upstream_hash(inputs[s])},
                    {"census", census},
                    {"balanced_epochs", res.epochs.n_epochs},
                    {"flagged_components", res.flagged_components},
                    {"ica_converged", res.ica_converged},
                    {"ica_iterations", res.ica_iterations}});
    out << dirs[s].string() << ": " << res.unbalanced.n_epochs << " epochs, " << res.epochs.n_epochs
        << " after balancing, " << res.flagged_components.size() << " ICA components removed\n";
  }
  return kExitOk;
}

inline int cmd_train(const Options& o, const RunConfig& cfg, std::ostream& out) {
  const auto inputs = find_inputs(o.in, "epochs");
  const auto dirs = subject_dirs(o.out, inputs.size());
  RunConfig one = cfg;
  one.models = {o.model};
  const auto spec = one.model_specs().front();
  for (std::size_t s = 0; s < inputs.size(); ++s) {
    prepare_output(dirs[s], o.force);
    const std::uint64_t seed = cfg.seed + s;
    const EpochSet epochs = io::read_epochs(inputs[s] / "epochs");
    auto clf = spec.make();
    clf->fit(epochs, seed);
    if (auto* nn = dynamic_cast<NeuralClassifier*>(clf.get())) {
      if (auto* m = nn->trained<float>()) ad::save_checkpoint(dirs[s] / "model", m->graph);
      if (auto* m = nn->trained<double>()) ad::save_checkpoint(dirs[s] / "model", m->graph);
    }
    io::write_json(dirs[s] / "model.meta.json", {{"model", o.model}, {"summary", clf->summary()}});
    write_manifest(dirs[s], "train", cfg, seed, {{"upstream_hash", upstream_hash(inputs[s])}, {"model", o.model}});
    out << dirs[s].string() << ": trained " << o.model << " on " << epochs.n_epochs << " epochs\n";
  }
  return kExitOk;
}

inline int cmd_evaluate(const Options& o, const RunConfig& cfg, std::ostream& out) {
  const auto inputs = find_inputs(o.in, "epochs");
  const auto dirs = subject_dirs(o.out, inputs.size());
  if (inputs.size() > 1) prepare_output(o.out, o.force);
  const auto specs = cfg.model_specs();
  std::vector<CvReport> reports;
  for (std::size_t s = 0; s < inputs.size(); ++s) {
    prepare_output(dirs[s], o.force);
    const std::uint64_t seed = cfg.seed + s;
    CvOptions opt;
    opt.k = cfg.folds;
    opt.seed = seed;
    opt.jobs = cfg.jobs;
    opt.proposed = "Proposed";
    reports.push_back(cross_validate(io::read_epochs(inputs[s] / "epochs"), specs, opt));
    io::write_json(dirs[s] / "cv_report.json", reports.back().to_json());
    write_manifest(dirs[s], "evaluate", cfg, seed, {{"upstream_hash", upstream_hash(inputs[s])}});
  }
  const CvReport shown = reports.size() > 1 ? aggregate_subjects(reports) : reports.front();
  if (reports.size() > 1) {
    io::write_json(std::filesystem::path(o.out) / "cv_report.json", shown.to_json());
    write_manifest(o.out, "evaluate", cfg, cfg.seed, {{"subjects", reports.size()}});
  }
  out << format_table(shown);
  return kExitOk;
}

inline int cmd_topo(const Options& o, const RunConfig& cfg, std::ostream& out) {
  const auto inputs = find_inputs(o.in, "epochs");
  const auto dirs = subject_dirs(o.out, inputs.size());
  for (std::size_t s = 0; s < inputs.size(); ++s) {
    prepare_output(dirs[s], o.force);
    TopoOptions opt = cfg.topo;
    opt.welch = cfg.welch;
    const auto topo = topography(io::read_epochs(inputs[s] / "epochs"), cfg.topo_band, opt);
    write_topography_csv(dirs[s] / "topography.csv", topo);
    write_manifest(dirs[s], "topo", cfg, cfg.seed + s, {{"upstream_hash", upstream_hash(inputs[s])}});
    const auto sig = static_cast<std::size_t>(std::count(topo.significance.mask.begin(), topo.significance.mask.end(), true));
    out << dirs[s].string() << ": " << to_string(cfg.topo_band.name) << " band, " << sig << " of "
        << topo.channels.size() << " channels significant\n";
  }
  return kExitOk;
}

inline int run(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Synthetic-EEG distraction classification pipeline"};
  app.require_subcommand(1, 1);
  Options o;
  auto common = [&](CLI::App* sub, bool needs_in) {
    sub->add_option("--config", o.config, "TOML run configuration")->check(CLI::ExistingFile);
    if (needs_in) sub->add_option("--in", o.in, "input directory")->required();
    sub->add_option("--out", o.out, "output directory")->required();
    sub->add_option("--seed", o.seed, "global seed");
    sub->add_option("--jobs", o.jobs, "parallel workers")->check(CLI::PositiveNumber);
    sub->add_option("--precision", o.precision, "floating-point precision of the networks")
        ->check(CLI::IsMember({32, 64}));
    sub->add_flag("--force", o.force, "overwrite existing outputs");
  };
  auto* synth = app.add_subcommand("synth", "generate synthetic recordings");
  common(synth, false);
  synth->add_option("--subjects", o.subjects, "number of subjects")->check(CLI::PositiveNumber);
  auto* pre = app.add_subcommand("preprocess", "filter, clean, segment and balance recordings");
  common(pre, true);
  auto* train = app.add_subcommand("train", "train one model on every epoch");
  common(train, true);
  train->add_option("--model", o.model, "model to train")
      ->check(CLI::IsMember({"Proposed", "DeepConvNet", "PSD-SVM", "Majority"}));
  auto* eval = app.add_subcommand("evaluate", "cross-validate all configured models");
  common(eval, true);
  auto* topo = app.add_subcommand("topo", "band-power topography with channel significance");
  common(topo, true);
  topo->add_option("--band", o.band, "delta | theta | alpha | beta");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }

  try {
    const RunConfig cfg = resolve_config(o);
    if (synth->parsed()) return cmd_synth(o, cfg, out);
    if (pre->parsed()) return cmd_preprocess(o, cfg, out);
    if (train->parsed()) return cmd_train(o, cfg, out);
    if (eval->parsed()) return cmd_evaluate(o, cfg, out);
    return cmd_topo(o, cfg, out);
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const nlohmann::json::exception& e) {
    err << "error: malformed file: " << e.what() << "\n";
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
}

}  // namespace distractnet::cli
