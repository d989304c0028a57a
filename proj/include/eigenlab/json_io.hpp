// SPDX-License-Identifier: Apache-2.0
//
// Matrix files ({"n": .., "data": [[..], ..]}) and JSON Lines traces.
// Doubles are written in shortest round-trip form, so reading a file back
// reproduces every bit.
#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "eigenlab/engine.hpp"
#include "json.hpp"

namespace eigenlab {

using Json = nlohmann::ordered_json;

inline Json matrix_rows_json(const Matrix& m) {
  Json rows = Json::array();
  for (std::size_t i = 0; i < m.size(); ++i) {
    Json row = Json::array();
    for (double x : m.row(i)) row.push_back(x);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Json matrix_to_json(const Matrix& m) { return Json{{"n", m.size()}, {"data", matrix_rows_json(m)}}; }

/// Parses a row array [[..], ..] into a finite square matrix.
inline Matrix matrix_from_rows_json(const Json& rows) {
  if (!rows.is_array() || rows.empty()) throw ValidationError("matrix data must be a non-empty array of rows");
  std::vector<std::vector<double>> v;
  for (const auto& row : rows) {
    if (!row.is_array()) throw ValidationError("matrix rows must be arrays");
    std::vector<double> r;
    for (const auto& x : row) {
      if (!x.is_number()) throw ValidationError("matrix entries must be numbers");
      r.push_back(x.get<double>());
    }
    if (r.size() != rows.size()) {
      throw ValidationError("matrix is not square: row of length " + std::to_string(r.size()) + " in a " +
                            std::to_string(rows.size()) + "-row matrix");
    }
    v.push_back(std::move(r));
  }
  Matrix m = Matrix::from_rows(v);
  if (!all_finite(m)) throw ValidationError("matrix has non-finite entries");
  return m;
}

inline Matrix matrix_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("data")) throw ValidationError("matrix document needs a \"data\" field");
  Matrix m = matrix_from_rows_json(j.at("data"));
  if (j.contains("n")) {
    if (!j.at("n").is_number_integer() || j.at("n").get<long long>() != static_cast<long long>(m.size()))
      throw ValidationError("\"n\" does not match the number of rows");
  }
  return m;
}

inline Matrix parse_matrix(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ValidationError(std::string("matrix file is not valid JSON: ") + e.what());
  }
  return matrix_from_json(j);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write file: " + path);
  out << content;
}

inline Matrix read_matrix_file(const std::string& path) { return parse_matrix(read_file(path)); }

inline void write_matrix_file(const std::string& path, const Matrix& m) { write_file(path, matrix_to_json(m).dump() + "\n"); }

inline Json deflations_json(const std::vector<Deflation>& ds) {
  Json out = Json::array();
  for (const auto& d : ds) out.push_back(Json{{"slot", d.slot}, {"value", d.value}});
  return out;
}

inline Json trace_record_json(const TraceRecord& r) {
  Json j;
  j["k"] = r.k;
  j["matrix"] = matrix_rows_json(r.matrix);
  j["active"] = r.active;
  j["offdiag"] = r.diagnostics.offdiag;
  j["angle2d"] = r.diagnostics.angle2d ? Json(*r.diagnostics.angle2d) : Json(nullptr);
  j["shift"] = r.diagnostics.shift;
  j["shiftNotPancaking"] = r.diagnostics.shift_not_pancaking;
  j["deflations"] = deflations_json(r.deflations);
  return j;
}

inline TraceRecord trace_record_from_json(const Json& j) {
  TraceRecord r;
  try {
    r.k = j.at("k").get<std::size_t>();
    r.matrix = matrix_from_rows_json(j.at("matrix"));
    r.active = j.value("active", r.matrix.size());
    r.diagnostics.offdiag = j.at("offdiag").get<double>();
    if (!j.at("angle2d").is_null()) r.diagnostics.angle2d = j.at("angle2d").get<double>();
    r.diagnostics.shift = j.at("shift").get<double>();
    r.diagnostics.shift_not_pancaking = j.value("shiftNotPancaking", false);
    for (const auto& d : j.at("deflations")) r.deflations.push_back({d.at("slot").get<std::size_t>(), d.at("value").get<double>()});
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("malformed trace record: ") + e.what());
  }
  return r;
}

inline std::string trace_to_jsonl(const std::vector<TraceRecord>& trace) {
  std::string out;
  for (const auto& r : trace) {
    out += trace_record_json(r).dump();
    out += '\n';
  }
  return out;
}

inline std::vector<TraceRecord> trace_from_jsonl(const std::string& text) {
  std::vector<TraceRecord> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw ValidationError(std::string("trace line is not valid JSON: ") + e.what());
    }
    out.push_back(trace_record_from_json(j));
  }
  return out;
}

inline Json spectral_json(const SpectralDecomp& sd) {
  return Json{{"eigenvalues", sd.eigenvalues}, {"eigenvectors", matrix_rows_json(sd.eigenvectors)}};
}

}  // namespace eigenlab
