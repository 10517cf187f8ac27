#pragma once

#include <filesystem>

#include "cnmix/model.hpp"
#include "cnmix/simulate.hpp"

namespace cnmix {

/// Versioned JSON document with model parameters, labels, outlier flags,
/// the log-likelihood trace, BIC and convergence metadata.
void save_fit_result(const FitResult& result, const FitConfig& cfg,
                     const std::filesystem::path& path);

/// Model parameters reloaded from a saved fit document, enough to impute
/// or score new data.
struct SavedFit {
  ModelFamily family = ModelFamily::Mcnm;
  McnmModel mcnm;
  TMixModel tmix;
};

SavedFit load_fit_model(const std::filesystem::path& path);

void write_labels_file(const std::vector<int>& labels,
                       const std::filesystem::path& path);
void write_flags_file(const std::vector<std::uint8_t>& flags,
                      const std::filesystem::path& path);

/// Ground-truth sidecar for generated data: labels, outlier indicators and
/// the generator parameters.
void write_truth_file(const LabeledDataset& lds,
                      const std::filesystem::path& path);

// Config files are strict JSON: unknown keys are rejected so typos fail
// loudly. Each loader overlays the file onto `base`.
FitConfig fit_config_from_json_file(const std::filesystem::path& path,
                                    FitConfig base = {});
ScenarioConfig scenario_config_from_json_file(const std::filesystem::path& path,
                                              ScenarioConfig base = {});
AmputationConfig amputation_config_from_json_file(
    const std::filesystem::path& path, AmputationConfig base = {});

}  // namespace cnmix
