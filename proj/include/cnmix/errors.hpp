#pragma once

#include <stdexcept>

namespace cnmix {

/// Covariance (or an observed sub-block of one) that is not positive
/// definite even after one ridge repair.
struct SingularCovariance : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Input file or dataset contents violating a format contract.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed configuration, whether from a file or built in code.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One optimizer start aborted and its result is unusable.
struct StartAborted : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Effective count of a component dropped below the collapse threshold.
struct ComponentCollapse : StartAborted {
  using StartAborted::StartAborted;
};

/// A row whose total mixture density is zero under the current model.
struct DegenerateRow : StartAborted {
  using StartAborted::StartAborted;
};

/// Every start of a fit failed; the message carries per-start diagnostics.
struct FitFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace cnmix
