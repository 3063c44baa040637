/// @file csv_io.hpp Sensor CSV and label CSV reading and writing.

#ifndef SLDS_CSV_IO_HPP
#define SLDS_CSV_IO_HPP

#include "slds/types.hpp"

#include <string>
#include <vector>

namespace slds {

/// One sequence. Header `t,<channel>...`; t strictly increasing. Errors cite the line number.
ObservationSet load_csv(const std::string& path);

/// Several files sampled on the same clock: equal length and channel count; timestamps come from
/// the first file.
ObservationSet load_observations(const std::vector<std::string>& paths);

/// Header `t,label` (or `t,map_mode` as written for fitted modes); one integer per row.
std::vector<int> load_labels(const std::string& path);

/// Writes `t,c1..cD` rows in shortest round-trip form. timestamps may be empty (then t = row index).
void write_csv(const std::string& path, const Matrix& values, const std::vector<double>& timestamps);

/// Writes `t,<column>` rows.
void write_labels(const std::string& path, const std::vector<int>& labels, const std::vector<double>& timestamps,
                  const std::string& column = "label");

/// Shortest round-trippable decimal text for a double.
std::string format_real(double v);

}  // namespace slds

#endif  // SLDS_CSV_IO_HPP
