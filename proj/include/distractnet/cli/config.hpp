#pragma once

// Run configuration assembled from a TOML file and command-line overrides.

#include <json.hpp>
#include <set>
#include <string>
#include <vector>

#include "distractnet/evalstats/topography.hpp"
#include "distractnet/models/classifier.hpp"
#include "distractnet/sigcore/pipeline.hpp"
#include "distractnet/synthgen/protocol.hpp"

namespace distractnet::cli {

struct RunConfig {
  std::uint64_t seed = 0;
  Precision precision = Precision::F32;
  std::size_t jobs = 1;
  std::size_t subjects = 1;

  ProtocolConfig synth;
  PreprocessConfig preprocess;
  TrainConfig train;
  double val_fraction = 0.1;
  HybridConfig hybrid;
  DeepConvNetConfig deepconvnet;
  SvmConfig svm;
  WelchParams welch;
  std::size_t folds = 5;
  std::vector<std::string> models{"PSD-SVM", "DeepConvNet", "Proposed"};
  Band topo_band = canonical_band(BandName::Theta);
  TopoOptions topo;

  nlohmann::json to_json() const {
    const auto& p = preprocess;
    return {
        {"run", {{"seed", seed}, {"precision", static_cast<int>(precision)}, {"jobs", jobs}, {"subjects", subjects}}},
        {"synth", synth.to_json()},
        {"preprocess",
         {{"notch", p.notch}, {"notch_hz", p.notch_hz}, {"notch_q", p.notch_q}, {"band_low_hz", p.band_low_hz},
          {"band_high_hz", p.band_high_hz}, {"band_order", p.band_order}, {"antialias_lowpass", p.antialias_lowpass},
          {"antialias_hz", p.antialias_hz}, {"decimate", p.decimate_factor}, {"ica", p.ica},
          {"ica_components", p.ica_components}, {"ica_tol", p.ica_options.tol}, {"ica_max_iter", p.ica_options.max_iter},
          {"ica_fit_samples", p.ica_options.max_fit_samples}, {"eog_threshold", p.eog_corr_threshold},
          {"eog_channels", p.eog_names}, {"window_s", p.window_s}, {"overlap_s", p.overlap_s}, {"balance", p.balance}}},
        {"train", [&] {
           auto j = train.to_json();
           j.erase("seed");
           j.erase("precision");
           j["val_fraction"] = val_fraction;
           return j;
         }()},
        {"hybrid", hybrid.to_json()},
        {"deepconvnet", deepconvnet.to_json()},
        {"svm", {{"C", svm.C}, {"epochs", svm.epochs}}},
        {"welch", {{"seg_len", welch.seg_len}, {"overlap", welch.overlap}}},
        {"evaluate", {{"folds", folds}, {"models", models}}},
        {"topo",
         {{"band", std::string(to_string(topo_band.name))}, {"contrast", std::string(to_string(topo.contrast))},
          {"alpha", topo.alpha}, {"bonferroni", topo.bonferroni}}},
    };
  }

  /// Classifier factories for the configured model names.
  std::vector<ModelSpec> model_specs() const {
    std::vector<ModelSpec> specs;
    TrainConfig tc = train;
    tc.precision = precision;
    for (const auto& name : models) {
      if (name == "PSD-SVM") {
        specs.push_back({name, [s = svm, w = welch] { return std::make_unique<PsdSvmClassifier>(s, w); }});
      } else if (name == "DeepConvNet") {
        specs.push_back({name, [d = deepconvnet, tc, v = val_fraction] { return NeuralClassifier::deepconvnet(d, tc, v); }});
      } else if (name == "Proposed") {
        specs.push_back({name, [h = hybrid, tc, v = val_fraction] { return NeuralClassifier::hybrid(h, tc, v); }});
      } else if (name == "Majority") {
        specs.push_back({name, [] { return std::make_unique<MajorityClassifier>(); }});
      } else {
        throw InputError("unknown model '" + name + "' (expected PSD-SVM, DeepConvNet, Proposed or Majority)");
      }
    }
    return specs;
  }

  void validate() const {
    synth.validate();
    train.validate();
    hybrid.validate();
    deepconvnet.validate();
    detail::require(folds >= 2, "folds must be >= 2");
    detail::require(subjects >= 1, "subjects must be >= 1");
    detail::require(jobs >= 1, "jobs must be >= 1");
    detail::require(!models.empty(), "no models configured");
    model_specs();
  }
};

namespace detail {

// Reads keys from one table and rejects any it did not consume.
class Table {
 public:
  Table(const nlohmann::json& root, std::string name) : name_(std::move(name)) {
    if (root.contains(name_)) {
      if (!root.at(name_).is_object()) throw InputError("config: [" + name_ + "] must be a table");
      j_ = root.at(name_);
    } else {
      j_ = nlohmann::json::object();
    }
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (!j_.contains(key)) return;
    used_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw InputError("config: " + name_ + "." + key + " has the wrong type");
    }
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!used_.count(k)) throw InputError("config: unknown key " + name_ + "." + k);
  }

 private:
  std::string name_;
  nlohmann::json j_;
  std::set<std::string> used_;
};

}  // namespace detail

inline RunConfig run_config_from_json(const nlohmann::json& root) {
  static const std::set<std::string> kTables{"run", "synth", "preprocess", "train", "hybrid",
                                             "deepconvnet", "svm", "welch", "evaluate", "topo"};
  if (!root.is_object()) throw InputError("config root must be a table");
  for (const auto& [k, v] : root.items())
    if (!kTables.count(k)) throw InputError("config: unknown table [" + k + "]");

  RunConfig c;
  {
    detail::Table t(root, "run");
    t.get("seed", c.seed);
    int bits = static_cast<int>(c.precision);
    t.get("precision", bits);
    c.precision = parse_precision(bits);
    t.get("jobs", c.jobs);
    t.get("subjects", c.subjects);
    t.finish();
  }
  {
    detail::Table t(root, "synth");
    auto& s = c.synth;
    t.get("trials_per_level", s.trials_per_level);
    t.get("trial_s", s.trial_s);
    t.get("rest_post_s", s.rest_post_s);
    std::size_t rests = s.rests();
    bool has_rests = root.contains("synth") && root["synth"].contains("rest_post_count");
    t.get("rest_post_count", rests);
    if (has_rests) s.rest_post_count = rests;
    t.get("inter_session_rest_s", s.inter_session_rest_s);
    t.get("sessions", s.sessions);
    t.get("fs", s.fs);
    t.get("theta_channels", s.theta_channels);
    t.get("alpha_channels", s.alpha_channels);
    t.get("theta_gain_ld", s.theta_gain.ld);
    t.get("theta_gain_hd", s.theta_gain.hd);
    t.get("alpha_gain_ld", s.alpha_gain.ld);
    t.get("alpha_gain_hd", s.alpha_gain.hd);
    t.get("background_uv", s.background_uv);
    t.get("pink_exponent", s.pink_exponent);
    t.get("theta_uv", s.theta_uv);
    t.get("theta_hz", s.theta_hz);
    t.get("theta_bw_hz", s.theta_bw_hz);
    t.get("alpha_uv", s.alpha_uv);
    t.get("alpha_hz", s.alpha_hz);
    t.get("alpha_bw_hz", s.alpha_bw_hz);
    t.get("line_uv", s.line_uv);
    t.get("line_hz", s.line_hz);
    t.get("blink_rate_hz", s.blink_rate_hz);
    t.get("blink_uv", s.blink_uv);
    t.get("blink_width_s", s.blink_width_s);
    t.get("blink_eeg_scale", s.blink_eeg_scale);
    t.get("eog_noise_uv", s.eog_noise_uv);
    t.get("ceiling_uv", s.ceiling_uv);
    t.finish();
  }
  {
    detail::Table t(root, "preprocess");
    auto& p = c.preprocess;
    t.get("notch", p.notch);
    t.get("notch_hz", p.notch_hz);
    t.get("notch_q", p.notch_q);
    t.get("band_low_hz", p.band_low_hz);
    t.get("band_high_hz", p.band_high_hz);
    t.get("band_order", p.band_order);
    t.get("antialias_lowpass", p.antialias_lowpass);
    t.get("antialias_hz", p.antialias_hz);
    t.get("decimate", p.decimate_factor);
    t.get("ica", p.ica);
    t.get("ica_components", p.ica_components);
    t.get("ica_tol", p.ica_options.tol);
    t.get("ica_max_iter", p.ica_options.max_iter);
    t.get("ica_fit_samples", p.ica_options.max_fit_samples);
    t.get("eog_threshold", p.eog_corr_threshold);
    t.get("eog_channels", p.eog_names);
    t.get("window_s", p.window_s);
    t.get("overlap_s", p.overlap_s);
    t.get("balance", p.balance);
    t.finish();
  }
  {
    detail::Table t(root, "train");
    t.get("optimizer", c.train.optimizer);
    t.get("learning_rate", c.train.learning_rate);
    t.get("batch_size", c.train.batch_size);
    t.get("max_epochs", c.train.max_epochs);
    t.get("patience", c.train.patience);
    t.get("val_fraction", c.val_fraction);
    t.finish();
  }
  {
    detail::Table t(root, "hybrid");
    std::vector<std::size_t> maps;
    t.get("maps", maps);
    if (!maps.empty()) {
      ::distractnet::detail::require(maps.size() == 5, "config: hybrid.maps needs five entries");
      for (std::size_t i = 0; i < 5; ++i) c.hybrid.blocks[i].maps = maps[i];
    }
    t.get("lstm_hidden", c.hybrid.lstm_hidden);
    t.get("fc_hidden", c.hybrid.fc_hidden);
    t.get("dropout", c.hybrid.dropout);
    t.finish();
  }
  {
    detail::Table t(root, "deepconvnet");
    t.get("temporal_maps", c.deepconvnet.temporal_maps);
    t.get("block_maps", c.deepconvnet.block_maps);
    t.get("dropout", c.deepconvnet.dropout);
    t.get("same_padding", c.deepconvnet.same_padding);
    t.finish();
  }
  {
    detail::Table t(root, "svm");
    t.get("C", c.svm.C);
    t.get("epochs", c.svm.epochs);
    t.finish();
  }
  {
    detail::Table t(root, "welch");
    t.get("seg_len", c.welch.seg_len);
    t.get("overlap", c.welch.overlap);
    t.finish();
  }
  {
    detail::Table t(root, "evaluate");
    t.get("folds", c.folds);
    t.get("models", c.models);
    t.finish();
  }
  {
    detail::Table t(root, "topo");
    std::string band = std::string(to_string(c.topo_band.name)), contrast = std::string(to_string(c.topo.contrast));
    t.get("band", band);
    t.get("contrast", contrast);
    t.get("alpha", c.topo.alpha);
    t.get("bonferroni", c.topo.bonferroni);
    c.topo_band = parse_band(band);
    c.topo.contrast = parse_contrast(contrast);
    t.finish();
  }
  c.train.precision = c.precision;
  return c;
}

}  // namespace distractnet::cli
