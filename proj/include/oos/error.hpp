#pragma once

#include <stdexcept>
#include <string>

namespace oos {

enum class Errc {
  invalid_argument,
  dimension_mismatch,
  duplicate_label,
  unknown_label,
  algebraic_loop,
  out_of_range,
  missing_block,
  unknown_block,
  singular_resolvent,
  unstable_model,
  singular_feedthrough,
  unknown_port,
  too_many_inverted_ports,
  non_psd_residual,
  non_pd_inertia,
  parse_error,
  validation_error,
  non_monotonic_times,
  loop_closure_violation,
  invalid_mode,
  missing_channels,
  unknown_channel,
  initial_gains_unstable,
  nominal_unstable,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::duplicate_label: return "DuplicateLabel";
    case Errc::unknown_label: return "UnknownLabel";
    case Errc::algebraic_loop: return "AlgebraicLoop";
    case Errc::out_of_range: return "OutOfRange";
    case Errc::missing_block: return "MissingBlock";
    case Errc::unknown_block: return "UnknownBlock";
    case Errc::singular_resolvent: return "SingularResolvent";
    case Errc::unstable_model: return "UnstableModel";
    case Errc::singular_feedthrough: return "SingularFeedthrough";
    case Errc::unknown_port: return "UnknownPort";
    case Errc::too_many_inverted_ports: return "TooManyInvertedPorts";
    case Errc::non_psd_residual: return "NonPsdResidual";
    case Errc::non_pd_inertia: return "NonPdInertia";
    case Errc::parse_error: return "ParseError";
    case Errc::validation_error: return "ValidationError";
    case Errc::non_monotonic_times: return "NonMonotonicTimes";
    case Errc::loop_closure_violation: return "LoopClosureViolation";
    case Errc::invalid_mode: return "InvalidMode";
    case Errc::missing_channels: return "MissingChannels";
    case Errc::unknown_channel: return "UnknownChannel";
    case Errc::initial_gains_unstable: return "InitialGainsUnstable";
    case Errc::nominal_unstable: return "NominalUnstable";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

// Errors caused by bad user input (config, arguments) rather than numerics.
inline bool is_validation(Errc c) {
  switch (c) {
    case Errc::parse_error:
    case Errc::validation_error:
    case Errc::non_monotonic_times:
    case Errc::loop_closure_violation:
    case Errc::invalid_mode:
    case Errc::non_pd_inertia:
    case Errc::non_psd_residual:
    case Errc::out_of_range:
    case Errc::missing_channels:
    case Errc::unknown_channel:
    case Errc::invalid_argument:
      return true;
    default:
      return false;
  }
}

}  // namespace oos
