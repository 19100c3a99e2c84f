// Generates a short synthetic subject, preprocesses it and scores the
// PSD-SVM baseline with 5-fold cross-validation.

#include <iostream>

#include "distractnet/evalstats/crossval.hpp"
#include "distractnet/sigcore/pipeline.hpp"
#include "distractnet/synthgen/generator.hpp"

int main() {
  using namespace distractnet;

  ProtocolConfig protocol;
  protocol.trials_per_level = 8;
  const auto subject = generate_subject(protocol, 1);

  const auto prep = preprocess(subject.recording, PreprocessConfig{}, 1);
  std::cout << "epochs: " << prep.epochs.n_epochs << " (" << prep.flagged_components.size()
            << " ocular components removed)\n";

  std::vector<ModelSpec> specs{
      {"PSD-SVM", [] { return std::make_unique<PsdSvmClassifier>(); }},
      {"Majority", [] { return std::make_unique<MajorityClassifier>(); }},
  };
  CvOptions opt;
  opt.seed = 1;
  opt.proposed = "PSD-SVM";
  std::cout << format_table(cross_validate(prep.epochs, specs, opt));
}
