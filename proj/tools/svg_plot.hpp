#pragma once

#include "rfm/types.hpp"

#include <string>
#include <vector>

namespace cli::svg {

/// Probability path over time with optional shaded spans (true regime-2
/// stretches) and horizontal guides at the detection thresholds.
void prob_path(const std::string& path, const rfm::Vector& probs,
               const std::vector<std::pair<int, int>>& shaded,
               const std::vector<double>& guides, const std::string& title);

/// Density-scaled histogram with a standard normal overlay.
void histogram(const std::string& path, const rfm::Vector& sample, int bins,
               const std::string& title);

} // namespace cli::svg
