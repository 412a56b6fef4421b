#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>

#include "exhaz/estimation.hpp"

namespace exhaz {

// `name,estimate,std_error,ci_lo,ci_hi`, one row per parameter, then footer
// rows `loglik`, `loglik_comparable`, `aic`, `converged` and `model` (value in
// the estimate column). Missing SEs are written as nan.
void write_fit(std::ostream& out, const FitResult& fit, double level);

// Reads a file written by write_fit. The model is inferred from the names
// (gamma -> M2, mu/b -> M3) and checked against the `model` row. Restores
// names, estimates, SEs, log-likelihoods, AIC and the converged flag.
FitResult read_fit(std::istream& in, const std::string& source = "<stream>");
FitResult read_fit_file(const std::filesystem::path& path);

// `model,k,loglik,aic,delta_aic,converged,choice,c_hat`, ranked by AIC,
// followed by an `m4` row naming the selected model.
void write_comparison(std::ostream& out, std::span<const FitResult> fits,
                      const std::optional<M4Selection>& m4);

}  // namespace exhaz
