#pragma once

// Fixed-header CSV files. Numbers are written with 9 significant digits and LF
// line endings so that repeated runs produce identical bytes.

#include <iosfwd>
#include <string>
#include <vector>

#include "wkcal/koh/mcmc.hpp"
#include "wkcal/koh/products.hpp"
#include "wkcal/synthetic.hpp"

namespace wkcal::cli {

inline constexpr const char* kFieldHeader = "time_s,flow_ml_s,pressure_mmhg,cycle_id";
inline constexpr const char* kSamplesHeader = "R,C,lambda_b,lambda_f,chain,iter";
inline constexpr const char* kBandHeader = "time_s,mean,lo90,hi90";

/// "%.9g"; NaN becomes an empty field.
std::string format_number(double value);

void write_field_csv(std::ostream& out, const FieldData& data);
void write_field_csv(const std::string& path, const FieldData& data);

/// Parses a field CSV. Rows may leave pressure empty (flow-only recordings).
/// When every cycle_id is empty, cycles are found from the flow upcrossings.
/// Otherwise each cycle starts at its first sample. Throws DataError naming
/// the file and line.
FieldData read_field_csv(std::istream& in, const std::string& name);
FieldData read_field_csv(const std::string& path);

void write_samples_csv(const std::string& path, const koh::PosteriorSamples& samples);
void write_band_csv(const std::string& path, const koh::PredictionBand& band);

/// Plain CSV table; cells are written verbatim.
void write_table_csv(const std::string& path, const std::vector<std::string>& header,
                     const std::vector<std::vector<std::string>>& rows);

}  // namespace wkcal::cli
