#include "slds/csv_io.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace slds {

namespace {

std::vector<std::string> split_row(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string strip(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

bool parse_cell(const std::string& raw, double& out) {
  const std::string s = strip(raw);
  if (s.empty()) return false;
  errno = 0;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && errno != ERANGE && std::isfinite(out);
}

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  return in;
}

/// Reads the header; returns false on an empty file.
bool read_header(std::ifstream& in, std::vector<std::string>& header) {
  std::string line;
  if (!std::getline(in, line)) return false;
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF && static_cast<unsigned char>(line[1]) == 0xBB &&
      static_cast<unsigned char>(line[2]) == 0xBF) {
    line.erase(0, 3);
  }
  header = split_row(line);
  for (auto& h : header) h = strip(h);
  return true;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << text;
  if (!out) throw InputError("write to '" + path + "' failed");
}

}  // namespace

std::string format_real(double v) {
  char buf[40];
  for (int digits = 15; digits <= 17; ++digits) {
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

ObservationSet load_csv(const std::string& path) {
  std::ifstream in = open_or_throw(path);
  std::vector<std::string> header;
  if (!read_header(in, header)) throw InputError(path + ": empty file");
  if (header.size() < 2 || header[0] != "t") {
    throw InputError(path + ":1: header must start with 't' followed by at least one channel");
  }
  const std::size_t cols = header.size();
  std::vector<double> times, values;
  std::string line;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_row(line);
    const std::string where = path + ":" + std::to_string(line_no) + ": ";
    if (cells.size() != cols) {
      throw InputError(where + "expected " + std::to_string(cols) + " fields, found " + std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < cols; ++c) {
      double v = 0.0;
      if (!parse_cell(cells[c], v)) {
        throw InputError(where + "column '" + header[c] + "' is not a finite number: '" + strip(cells[c]) + "'");
      }
      if (c == 0) {
        if (!times.empty() && !(v > times.back())) throw InputError(where + "timestamps must be strictly increasing");
        times.push_back(v);
      } else {
        values.push_back(v);
      }
    }
  }
  if (times.empty()) throw InputError(path + ": no data rows");

  const auto t_len = static_cast<Eigen::Index>(times.size());
  const auto d = static_cast<Eigen::Index>(cols - 1);
  ObservationSet obs;
  obs.sequences.push_back(Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), t_len, d));
  obs.channel_scales = Vector::Ones(d);
  obs.timestamps = std::move(times);
  if (t_len > 1) {
    const double span = obs.timestamps.back() - obs.timestamps.front();
    obs.sample_rate_hz = static_cast<double>(t_len - 1) / span;
  }
  return obs;
}

ObservationSet load_observations(const std::vector<std::string>& paths) {
  if (paths.empty()) throw InputError("no data files given");
  ObservationSet obs = load_csv(paths.front());
  for (std::size_t i = 1; i < paths.size(); ++i) {
    ObservationSet more = load_csv(paths[i]);
    if (more.length() != obs.length()) {
      throw InputError(paths[i] + ": has " + std::to_string(more.length()) + " rows, expected " +
                       std::to_string(obs.length()));
    }
    if (more.dim() != obs.dim()) {
      throw InputError(paths[i] + ": dimension mismatch, " + std::to_string(more.dim()) + " channels instead of " +
                       std::to_string(obs.dim()));
    }
    obs.sequences.push_back(std::move(more.sequences.front()));
  }
  return obs;
}

std::vector<int> load_labels(const std::string& path) {
  std::ifstream in = open_or_throw(path);
  std::vector<std::string> header;
  if (!read_header(in, header)) throw InputError(path + ": empty file");
  if (header.size() != 2 || header[0] != "t" || (header[1] != "label" && header[1] != "map_mode")) {
    throw InputError(path + ":1: header must be 't,label' or 't,map_mode'");
  }
  std::vector<int> labels;
  std::string line;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_row(line);
    const std::string where = path + ":" + std::to_string(line_no) + ": ";
    if (cells.size() != 2) throw InputError(where + "expected 2 fields, found " + std::to_string(cells.size()));
    double t = 0.0;
    if (!parse_cell(cells[0], t)) throw InputError(where + "t is not a finite number");
    const std::string s = strip(cells[1]);
    errno = 0;
    char* end = nullptr;
    const long v = std::strtol(s.c_str(), &end, 10);
    if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE || v < -2147483647L || v > 2147483647L) {
      throw InputError(where + "label is not an integer: '" + s + "'");
    }
    labels.push_back(static_cast<int>(v));
  }
  if (labels.empty()) throw InputError(path + ": no data rows");
  return labels;
}

void write_csv(const std::string& path, const Matrix& values, const std::vector<double>& timestamps) {
  if (!timestamps.empty() && static_cast<Eigen::Index>(timestamps.size()) != values.rows()) {
    throw InputError("timestamp count does not match the number of rows");
  }
  std::string text = "t";
  for (Eigen::Index c = 0; c < values.cols(); ++c) text += ",c" + std::to_string(c + 1);
  text += '\n';
  for (Eigen::Index t = 0; t < values.rows(); ++t) {
    text += timestamps.empty() ? std::to_string(t) : format_real(timestamps[static_cast<std::size_t>(t)]);
    for (Eigen::Index c = 0; c < values.cols(); ++c) text += "," + format_real(values(t, c));
    text += '\n';
  }
  write_file(path, text);
}

void write_labels(const std::string& path, const std::vector<int>& labels, const std::vector<double>& timestamps,
                  const std::string& column) {
  if (!timestamps.empty() && timestamps.size() != labels.size()) {
    throw InputError("timestamp count does not match the number of labels");
  }
  std::string text = "t," + column + "\n";
  for (std::size_t t = 0; t < labels.size(); ++t) {
    text += timestamps.empty() ? std::to_string(t) : format_real(timestamps[t]);
    text += "," + std::to_string(labels[t]) + "\n";
  }
  write_file(path, text);
}

}  // namespace slds
