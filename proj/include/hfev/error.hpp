#pragma once

#include <stdexcept>
#include <string>

namespace hfev {

enum class errc {
    calibration_degenerate,
    kind_mismatch,
    out_of_bounds,
    zero_overlap,
    geometry,
    constraint,
    convergence,
    grid_mismatch,
    insufficient_coverage,
    insufficient_data,
    degenerate_regression,
    empty_comparison,
    empty_strain,
    contract,
    spec,
    io,
    stage,
};

/// Library-wide exception. Carries a machine-checkable code next to the
/// human-readable message so callers (and tests) can branch on the cause.
class Error : public std::runtime_error {
public:
    Error(errc code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
    errc code() const noexcept { return code_; }

private:
    errc code_;
};

} // namespace hfev
