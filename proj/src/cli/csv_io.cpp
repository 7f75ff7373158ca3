#include "wkcal/cli/csv_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <system_error>

#include "wkcal/errors.hpp"

namespace wkcal::cli {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  return out;
}

void finish(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw Error("write failed for " + path);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return cells;
}

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
  return s.substr(i);
}

}  // namespace

std::string format_number(double value) {
  if (std::isnan(value)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", value);
  return buf;
}

void write_field_csv(std::ostream& out, const FieldData& data) {
  out << kFieldHeader << '\n';
  for (const auto& o : data.observations) {
    out << format_number(o.time) << ',' << format_number(o.flow) << ',' << format_number(o.pressure) << ','
        << o.cycle_id << '\n';
  }
}

void write_field_csv(const std::string& path, const FieldData& data) {
  auto out = open_out(path);
  write_field_csv(out, data);
  finish(out, path);
}

FieldData read_field_csv(std::istream& in, const std::string& name) {
  std::string line;
  if (!std::getline(in, line)) throw DataError(name + ": empty file");
  if (trim(line) != kFieldHeader) {
    throw DataError(name + ":1: expected header '" + std::string(kFieldHeader) + "'");
  }
  std::vector<Observation> rows;
  std::size_t with_cycle = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    const auto cells = split(line);
    const auto where = name + ":" + std::to_string(line_no);
    if (cells.size() != 4) throw DataError(where + ": expected 4 fields, got " + std::to_string(cells.size()));
    auto number = [&](const std::string& cell, const char* column, bool optional) {
      const auto text = trim(cell);
      if (text.empty()) {
        if (optional) return std::numeric_limits<double>::quiet_NaN();
        throw DataError(where + ": missing " + column);
      }
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v)) {
        throw DataError(where + ": cannot parse " + column + " '" + text + "'");
      }
      return v;
    };
    Observation o{};
    o.time = number(cells[0], "time_s", false);
    o.flow = number(cells[1], "flow_ml_s", false);
    o.pressure = number(cells[2], "pressure_mmhg", true);
    const auto id_text = trim(cells[3]);
    if (id_text.empty()) {
      o.cycle_id = -1;
    } else {
      const auto [ptr, ec] = std::from_chars(id_text.data(), id_text.data() + id_text.size(), o.cycle_id);
      if (ec != std::errc{} || ptr != id_text.data() + id_text.size() || o.cycle_id < 0) {
        throw DataError(where + ": cannot parse cycle_id '" + id_text + "'");
      }
      ++with_cycle;
    }
    rows.push_back(o);
  }
  if (rows.empty()) throw DataError(name + ": no data rows");
  if (with_cycle == 0) return assign_cycles(rows, RecordedSource{name});
  if (with_cycle != rows.size()) throw DataError(name + ": cycle_id must be given on every row or on none");

  FieldData data;
  data.provenance = RecordedSource{name};
  for (const auto& o : rows) {
    if (!data.cycle_starts.contains(o.cycle_id)) data.cycle_starts[o.cycle_id] = o.time;
  }
  data.observations = std::move(rows);
  validate(data);
  return data;
}

FieldData read_field_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  return read_field_csv(in, path);
}

void write_samples_csv(const std::string& path, const koh::PosteriorSamples& samples) {
  auto out = open_out(path);
  out << kSamplesHeader << '\n';
  for (const auto& d : samples.draws) {
    out << format_number(d.R) << ',' << format_number(d.C) << ',' << format_number(d.lambda_b) << ','
        << format_number(d.lambda_f) << ',' << d.chain << ',' << d.iteration << '\n';
  }
  finish(out, path);
}

void write_band_csv(const std::string& path, const koh::PredictionBand& band) {
  auto out = open_out(path);
  out << kBandHeader << '\n';
  for (std::size_t i = 0; i < band.time.size(); ++i) {
    out << format_number(band.time[i]) << ',' << format_number(band.mean[i]) << ',' << format_number(band.lower[i])
        << ',' << format_number(band.upper[i]) << '\n';
  }
  finish(out, path);
}

void write_table_csv(const std::string& path, const std::vector<std::string>& header,
                     const std::vector<std::vector<std::string>>& rows) {
  auto out = open_out(path);
  auto emit = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
  };
  emit(header);
  for (const auto& r : rows) emit(r);
  finish(out, path);
}

}  // namespace wkcal::cli
