#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "distractnet/sigcore/epochs.hpp"
#include "distractnet/sigcore/filter.hpp"
#include "distractnet/sigcore/ica.hpp"
#include "distractnet/sigcore/layout.hpp"
#include "distractnet/sigcore/resample.hpp"

namespace distractnet {

struct PreprocessConfig {
  bool notch = true;
  double notch_hz = 60.0;
  double notch_q = 30.0;
  double band_low_hz = 1.0;
  double band_high_hz = 50.0;
  int band_order = 2;
  bool antialias_lowpass = false;  // extra low-pass before decimation
  double antialias_hz = 40.0;
  int decimate_factor = 10;
  bool ica = true;
  int ica_components = 0;  // 0: one per EEG channel
  IcaOptions ica_options{1e-6, 200, 50000};
  double eog_corr_threshold = 0.7;
  std::vector<std::string> eog_names = default_eog_names();
  double window_s = 1.0;
  double overlap_s = 0.0;
  bool balance = true;
};

struct PreprocessResult {
  EpochSet epochs;      // balanced when cfg.balance
  EpochSet unbalanced;  // every segmented epoch
  std::vector<int> flagged_components;
  bool ica_converged = true;
  int ica_iterations = 0;
};

/// notch -> zero-phase band-pass -> decimate -> ICA cleanup -> 1 s epochs -> balance.
inline PreprocessResult preprocess(Recording rec, const PreprocessConfig& cfg, std::uint64_t seed) {
  rec.validate();
  if (cfg.ica) {
    std::string missing;
    for (const auto& name : cfg.eog_names)
      if (!rec.layout.find(name)) missing += (missing.empty() ? "" : ", ") + name;
    if (cfg.eog_names.empty() || !missing.empty())
      throw InputError("no EOG channels found: recording lacks " +
                       (missing.empty() ? std::string("configured EOG names") : missing));
  }

  if (cfg.notch) rec = filtfilt(design_notch(cfg.notch_hz, rec.fs, cfg.notch_q), std::move(rec));
  rec = filtfilt(design_bandpass(cfg.band_low_hz, cfg.band_high_hz, cfg.band_order, rec.fs),
                 std::move(rec));
  if (cfg.antialias_lowpass) rec = filtfilt(design_lowpass(cfg.antialias_hz, 2, rec.fs), std::move(rec));
  rec = decimate(rec, cfg.decimate_factor);

  PreprocessResult out;
  if (cfg.ica) {
    const int n_eeg = static_cast<int>(rec.layout.count(ChannelKind::EEG));
    const int k = cfg.ica_components > 0 ? cfg.ica_components : n_eeg;
    const IcaModel model = fit_ica(rec, k, seed, cfg.ica_options);
    out.ica_converged = model.converged;
    out.ica_iterations = model.iterations;
    auto cleaned = clean_artifacts(model, rec, cfg.eog_names, cfg.eog_corr_threshold);
    out.flagged_components = std::move(cleaned.flagged);
    rec = std::move(cleaned.recording);
  } else {
    rec = rec.select_channels(rec.layout.indices_of(ChannelKind::EEG));
  }

  out.unbalanced = segment_epochs(rec, cfg.window_s, cfg.overlap_s).epochs;
  out.epochs = cfg.balance ? balance_classes(out.unbalanced, seed + 1) : out.unbalanced;
  return out;
}

}  // namespace distractnet
