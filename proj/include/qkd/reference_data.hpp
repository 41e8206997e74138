#pragma once

#include <string_view>
#include <vector>

#include "qkd/estimator.hpp"
#include "qkd/link_model.hpp"

namespace qkd {

// Bundled field-trial measurements (six fiber lengths, 49.2 - 123.6 km),
// byte-identical to data/reference_measurements.csv.
std::string_view reference_measurements_csv();
std::vector<MeasuredStats> reference_measurements();

// Link model fitted to the bundled measurements with default protocol
// parameters and the default detector prior. Computed once.
const LinkFit& reference_link_fit();

}  // namespace qkd
