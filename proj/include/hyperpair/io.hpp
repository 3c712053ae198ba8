#pragma once

// File formats and run artifacts: JSON states and analyzer settings, source
// configs, CSV count and fringe tables, reconstruction options and
// diagnostics, Bell summaries, run manifests, and atomic file writes.

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hyperpair/analyzers.hpp"
#include "hyperpair/bell.hpp"
#include "hyperpair/metrics.hpp"
#include "hyperpair/qcore.hpp"
#include "hyperpair/source.hpp"
#include "hyperpair/tomography.hpp"

namespace hyperpair {

using Json = nlohmann::json;

namespace detail {

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("failed reading " + path.string());
  return std::move(buf).str();
}

// Content lands under the final name only after a complete write: the text
// goes to a sibling temporary file that is renamed into place.
inline void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  namespace fs = std::filesystem;
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << text;
    out.flush();
    if (!out) {
      std::error_code drop;
      fs::remove(tmp, drop);
      throw IoError("failed writing " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    std::error_code drop;
    fs::remove(tmp, drop);
    throw IoError("failed moving " + tmp.string() + " into place: " + ec.message());
  }
}

inline Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& err) {
    throw ValidationError(what + ": malformed JSON: " + err.what());
  }
}

inline std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

// Shortest decimal form that parses back to the same double.
inline std::string format_double(double value) {
  std::array<char, 32> buf;
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc()) throw NumericalError("number formatting failed");
  return std::string(buf.data(), ptr);
}

inline double parse_double(std::string_view token, const std::string& what) {
  double value = 0.0;
  const char* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (ec != std::errc() || ptr != end)
    throw ValidationError(what + ": cannot parse number '" + std::string(token) + "'");
  return value;
}

inline std::int64_t parse_int64(std::string_view token, const std::string& what) {
  std::int64_t value = 0;
  const char* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (ec != std::errc() || ptr != end)
    throw ValidationError(what + ": cannot parse integer '" + std::string(token) + "'");
  return value;
}

inline const Json& member(const Json& j, const char* key, const std::string& what) {
  const auto it = j.find(key);
  if (it == j.end()) throw ValidationError(what + ": missing field '" + key + "'");
  return *it;
}

inline double number_field(const Json& j, const std::string& what) {
  if (!j.is_number()) throw ValidationError(what + ": expected a number");
  return j.get<double>();
}

inline Json complex_to_json(Complex c) { return Json::array({c.real(), c.imag()}); }

inline Complex complex_from_json(const Json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2)
    throw ValidationError(what + ": expected a [re, im] pair");
  return {number_field(j[0], what), number_field(j[1], what)};
}

inline Json vector_to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(complex_to_json(v(i)));
  return out;
}

inline Vector vector_from_json(const Json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw ValidationError(what + ": expected a non-empty array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (size_t i = 0; i < j.size(); ++i)
    v(static_cast<Eigen::Index>(i)) = complex_from_json(j[i], what);
  return v;
}

inline Json matrix_to_json(const Matrix& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(complex_to_json(m(r, c)));
  return out;
}

inline Party party_from_json(const Json& j, const std::string& what) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "A") return Party::A;
    if (s == "B") return Party::B;
  }
  throw ValidationError(what + ": party must be \"A\" or \"B\"");
}

inline Dof dof_from_json(const Json& j, const std::string& what) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "poln") return Dof::Poln;
    if (s == "spatial") return Dof::Spatial;
    if (s == "etime") return Dof::Etime;
    if (s == "generic") return Dof::Generic;
  }
  throw ValidationError(what + ": unknown degree-of-freedom label");
}

inline void layout_to_json(const SubsystemLayout& layout, Json& out) {
  Json dims = Json::array(), parties = Json::array(), dofs = Json::array();
  for (int i = 0; i < layout.size(); ++i) {
    dims.push_back(layout.dim_of(i));
    parties.push_back(to_string(layout.party_of(i)));
    dofs.push_back(to_string(layout.sub(i).dof));
  }
  out["dims"] = std::move(dims);
  out["parties"] = std::move(parties);
  out["dofs"] = std::move(dofs);
}

inline SubsystemLayout layout_from_json(const Json& j, const std::string& what) {
  const Json& dims = member(j, "dims", what);
  const Json& parties = member(j, "parties", what);
  if (!dims.is_array() || !parties.is_array() || dims.size() != parties.size() || dims.empty())
    throw ValidationError(what + ": dims and parties must be equal-length non-empty arrays");
  const Json* dofs = nullptr;
  if (const auto it = j.find("dofs"); it != j.end()) {
    if (!it->is_array() || it->size() != dims.size())
      throw ValidationError(what + ": dofs must match dims in length");
    dofs = &*it;
  }
  std::vector<Subsystem> subs;
  for (size_t i = 0; i < dims.size(); ++i) {
    Subsystem sub;
    if (!dims[i].is_number_integer())
      throw ValidationError(what + ": dims must be integers");
    sub.dim = dims[i].get<int>();
    sub.party = party_from_json(parties[i], what);
    sub.dof = dofs ? dof_from_json((*dofs)[i], what) : Dof::Generic;
    subs.push_back(sub);
  }
  return SubsystemLayout(std::move(subs));
}

}  // namespace detail

// --- states --------------------------------------------------------------

inline Json state_to_json(const DensityOperator& rho) {
  Json out = Json::object();
  detail::layout_to_json(rho.layout, out);
  out["matrix"] = detail::matrix_to_json(rho.matrix);
  return out;
}

inline Json state_to_json(const StateVector& psi) {
  Json out = Json::object();
  detail::layout_to_json(psi.layout, out);
  out["vector"] = detail::vector_to_json(psi.amplitudes);
  return out;
}

inline DensityOperator density_from_json(const Json& j) {
  const std::string what = "state";
  const SubsystemLayout layout = detail::layout_from_json(j, what);
  const Json& cells = detail::member(j, "matrix", what);
  const auto n = static_cast<size_t>(layout.total_dim());
  if (!cells.is_array() || cells.size() != n * n)
    throw ValidationError(what + ": matrix must hold dim^2 [re, im] pairs in row-major order");
  Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (size_t i = 0; i < cells.size(); ++i)
    m(static_cast<Eigen::Index>(i / n), static_cast<Eigen::Index>(i % n)) =
        detail::complex_from_json(cells[i], what);
  return DensityOperator(std::move(m), layout);
}

inline StateVector state_vector_from_json(const Json& j) {
  const std::string what = "state";
  const SubsystemLayout layout = detail::layout_from_json(j, what);
  const Json& cells = detail::member(j, "vector", what);
  if (!cells.is_array() || cells.size() != static_cast<size_t>(layout.total_dim()))
    throw ValidationError(what + ": vector length must match the layout dimension");
  return StateVector(detail::vector_from_json(cells, what), layout);
}

inline DensityOperator read_density_file(const std::filesystem::path& path) {
  return density_from_json(detail::parse_json(detail::read_text_file(path), path.string()));
}

inline void write_state_file(const std::filesystem::path& path, const DensityOperator& rho) {
  detail::write_text_atomic(path, detail::dump_json(state_to_json(rho)));
}

// --- source configuration -------------------------------------------------

inline Json source_config_to_json(const SourceConfig& cfg) {
  Json j = Json::object();
  j["alpha"] = detail::complex_to_json(cfg.alpha);
  j["spatial_truncation"] = cfg.spatial_truncation;
  j["visibility_poln"] = cfg.visibility_poln;
  j["visibility_spa"] = cfg.visibility_spa;
  j["visibility_et"] = cfg.visibility_et;
  j["dephase_poln_A"] = cfg.dephase_poln_A;
  j["dephase_poln_B"] = cfg.dephase_poln_B;
  j["depolarize_poln_A"] = cfg.depolarize_poln_A;
  j["depolarize_poln_B"] = cfg.depolarize_poln_B;
  j["white_noise"] = cfg.white_noise;
  j["pair_rate"] = cfg.pair_rate;
  j["background_rate"] = cfg.background_rate;
  j["seed"] = cfg.seed;
  return j;
}

// Missing fields keep their defaults; unknown fields are rejected so typos
// cannot silently fall back to defaults.
inline SourceConfig source_config_from_json(const Json& j) {
  const std::string what = "config";
  if (!j.is_object()) throw ValidationError(what + ": expected a JSON object");
  SourceConfig cfg;
  for (const auto& [key, value] : j.items()) {
    if (key == "alpha") {
      cfg.alpha = value.is_number() ? Complex(value.get<double>(), 0.0)
                                    : detail::complex_from_json(value, what + ".alpha");
    } else if (key == "spatial_truncation") {
      if (!value.is_number_integer())
        throw ValidationError(what + ": spatial_truncation must be an integer");
      cfg.spatial_truncation = value.get<int>();
    } else if (key == "visibility_poln") {
      cfg.visibility_poln = detail::number_field(value, what + ".visibility_poln");
    } else if (key == "visibility_spa") {
      cfg.visibility_spa = detail::number_field(value, what + ".visibility_spa");
    } else if (key == "visibility_et") {
      cfg.visibility_et = detail::number_field(value, what + ".visibility_et");
    } else if (key == "dephase_poln_A") {
      cfg.dephase_poln_A = detail::number_field(value, what + ".dephase_poln_A");
    } else if (key == "dephase_poln_B") {
      cfg.dephase_poln_B = detail::number_field(value, what + ".dephase_poln_B");
    } else if (key == "depolarize_poln_A") {
      cfg.depolarize_poln_A = detail::number_field(value, what + ".depolarize_poln_A");
    } else if (key == "depolarize_poln_B") {
      cfg.depolarize_poln_B = detail::number_field(value, what + ".depolarize_poln_B");
    } else if (key == "white_noise") {
      cfg.white_noise = detail::number_field(value, what + ".white_noise");
    } else if (key == "pair_rate") {
      cfg.pair_rate = detail::number_field(value, what + ".pair_rate");
    } else if (key == "background_rate") {
      cfg.background_rate = detail::number_field(value, what + ".background_rate");
    } else if (key == "seed") {
      if (!value.is_number_integer() || (value.is_number_integer() && !value.is_number_unsigned() &&
                                         value.get<std::int64_t>() < 0))
        throw ValidationError(what + ": seed must be a non-negative integer");
      cfg.seed = value.get<std::uint64_t>();
    } else {
      throw ValidationError(what + ": unknown field '" + key + "'");
    }
  }
  validate(cfg);
  return cfg;
}

inline SourceConfig read_config_file(const std::filesystem::path& path) {
  return source_config_from_json(detail::parse_json(detail::read_text_file(path), path.string()));
}

// --- analyzer settings ------------------------------------------------------

inline Json analyzer_setting_to_json(const AnalyzerSetting& s) {
  Json j = Json::object();
  if (s.ket) {
    j["ket"] = detail::vector_to_json(*s.ket);
    return j;
  }
  j["poln"] = s.poln ? Json{{"qwp", s.poln->qwp_angle}, {"hwp", s.poln->hwp_angle}}
                     : Json(nullptr);
  j["spatial"] = s.spatial ? detail::vector_to_json(s.spatial->ket) : Json(nullptr);
  j["etime"] = s.etime ? Json{{"delta", s.etime->phase}} : Json(nullptr);
  return j;
}

inline AnalyzerSetting analyzer_setting_from_json(const Json& j, const std::string& what) {
  if (!j.is_object()) throw ValidationError(what + ": expected a settings object");
  AnalyzerSetting s;
  for (const auto& [key, value] : j.items()) {
    if (value.is_null()) continue;
    if (key == "ket") {
      s.ket = detail::vector_from_json(value, what + ".ket");
    } else if (key == "poln") {
      PolarizationSetting p;
      p.qwp_angle = detail::number_field(detail::member(value, "qwp", what + ".poln"),
                                         what + ".poln.qwp");
      p.hwp_angle = detail::number_field(detail::member(value, "hwp", what + ".poln"),
                                         what + ".poln.hwp");
      s.poln = p;
    } else if (key == "spatial") {
      s.spatial = SpatialSetting{detail::vector_from_json(value, what + ".spatial")};
    } else if (key == "etime") {
      s.etime = EnergyTimeSetting{
          detail::number_field(detail::member(value, "delta", what + ".etime"),
                               what + ".etime.delta")};
    } else {
      throw ValidationError(what + ": unknown field '" + key + "'");
    }
  }
  if (s.ket && (s.poln || s.spatial || s.etime))
    throw ValidationError(what + ": a raw ket excludes per-DOF settings");
  if (!s.ket && !s.poln && !s.spatial && !s.etime)
    throw ValidationError(what + ": setting analyzes no DOF");
  return s;
}

inline Json settings_to_json(const std::vector<SettingsEntry>& entries) {
  Json out = Json::array();
  for (const SettingsEntry& e : entries) {
    Json row = Json::object();
    row["id_a"] = e.id_a;
    row["id_b"] = e.id_b;
    row["a"] = analyzer_setting_to_json(e.a);
    row["b"] = analyzer_setting_to_json(e.b);
    out.push_back(std::move(row));
  }
  return out;
}

inline std::vector<SettingsEntry> settings_from_json(const Json& j) {
  const std::string what = "settings";
  if (!j.is_array() || j.empty())
    throw ValidationError(what + ": expected a non-empty list of entries");
  std::vector<SettingsEntry> entries;
  for (size_t i = 0; i < j.size(); ++i) {
    const Json& row = j[i];
    const std::string ctx = what + " entry " + std::to_string(i);
    if (!row.is_object()) throw ValidationError(ctx + ": expected an object");
    SettingsEntry e;
    const Json& id_a = detail::member(row, "id_a", ctx);
    const Json& id_b = detail::member(row, "id_b", ctx);
    if (!id_a.is_string() || !id_b.is_string())
      throw ValidationError(ctx + ": ids must be strings");
    e.id_a = id_a.get<std::string>();
    e.id_b = id_b.get<std::string>();
    e.a = analyzer_setting_from_json(detail::member(row, "a", ctx), ctx + ".a");
    e.b = analyzer_setting_from_json(detail::member(row, "b", ctx), ctx + ".b");
    entries.push_back(std::move(e));
  }
  return entries;
}

inline std::vector<SettingsEntry> read_settings_file(const std::filesystem::path& path) {
  return settings_from_json(detail::parse_json(detail::read_text_file(path), path.string()));
}

inline void write_settings_file(const std::filesystem::path& path,
                                const std::vector<SettingsEntry>& entries) {
  detail::write_text_atomic(path, detail::dump_json(settings_to_json(entries)));
}

// The local analysis ket of one photon: the raw ket when given, otherwise
// the tensor product of the analyzed DOF kets in canonical DOF order.
inline Vector local_analysis_ket(const AnalyzerSetting& s) {
  if (s.ket) {
    if (s.poln || s.spatial || s.etime)
      throw ValidationError("analyzer setting mixes a raw ket with per-DOF settings");
    const double n = s.ket->norm();
    if (std::abs(n - 1.0) > 1e-6) throw ValidationError("raw analyzer ket must be unit norm");
    return *s.ket / n;
  }
  Vector out = Vector::Ones(1);
  bool analyzed = false;
  if (s.poln) {
    out = kron(out, poln_projector(*s.poln));
    analyzed = true;
  }
  if (s.spatial) {
    const double n = s.spatial->ket.norm();
    if (s.spatial->ket.size() < 2 || std::abs(n - 1.0) > 1e-6)
      throw ValidationError("spatial setting ket must be unit norm");
    out = kron(out, (s.spatial->ket / n).eval());
    analyzed = true;
  }
  if (s.etime) {
    out = kron(out, etime_projector(*s.etime));
    analyzed = true;
  }
  if (!analyzed) throw ValidationError("analyzer setting must analyze at least one DOF");
  return out;
}

// Tomography view of a settings list: the distinct per-photon kets keyed by
// id. Both photons contribute to one shared set, and a complete set must
// hold exactly d^2 independent kets.
inline ProjectorSet projector_set_from_settings(const std::vector<SettingsEntry>& entries) {
  if (entries.empty()) throw ValidationError("settings: no entries");
  std::vector<ProjectorKet> kets;
  std::map<std::string, size_t> index;
  const auto insert = [&](const std::string& id, const AnalyzerSetting& s) {
    Vector k = local_analysis_ket(s);
    const auto it = index.find(id);
    if (it == index.end()) {
      if (!kets.empty() && kets.front().ket.size() != k.size())
        throw ValidationError("settings: analyzer kets span different local dimensions");
      index[id] = kets.size();
      kets.push_back({id, std::move(k)});
      return;
    }
    const Vector& prev = kets[it->second].ket;
    if (prev.size() != k.size() || (prev - k).cwiseAbs().maxCoeff() > 1e-12)
      throw ValidationError("settings: id '" + id + "' maps to two different analyzer kets");
  };
  for (const SettingsEntry& e : entries) {
    insert(e.id_a, e.a);
    insert(e.id_b, e.b);
  }
  const auto d = static_cast<int>(kets.front().ket.size());
  if (static_cast<int>(kets.size()) != d * d) {
    std::ostringstream msg;
    msg << "settings: tomography needs " << d * d << " distinct analyzer kets for local dimension "
        << d << ", found " << kets.size();
    throw ValidationError(msg.str());
  }
  return make_projector_set(d, std::move(kets));
}

// --- counts CSV --------------------------------------------------------------

namespace detail {

inline void check_csv_token(const std::string& id) {
  if (id.empty() || id.find_first_of(",\"\r\n") != std::string::npos)
    throw ValidationError("counts: setting id '" + id + "' cannot be stored in CSV");
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> fields;
  size_t start = 0;
  while (true) {
    const size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

}  // namespace detail

// Header `setting_a,setting_b,counts,duration`; a fifth `expected` column is
// written when every record carries the simulated mean.
inline std::string counts_to_csv(const std::vector<CountRecord>& records) {
  bool with_expected = !records.empty();
  for (const CountRecord& rec : records) with_expected = with_expected && rec.expected.has_value();
  std::ostringstream out;
  out << "setting_a,setting_b,counts,duration";
  if (with_expected) out << ",expected";
  out << "\n";
  for (const CountRecord& rec : records) {
    detail::check_csv_token(rec.setting_id_a);
    detail::check_csv_token(rec.setting_id_b);
    out << rec.setting_id_a << ',' << rec.setting_id_b << ',' << rec.counts << ','
        << detail::format_double(rec.duration);
    if (with_expected) out << ',' << detail::format_double(*rec.expected);
    out << "\n";
  }
  return out.str();
}

inline std::vector<CountRecord> counts_from_csv(const std::string& text) {
  const std::string what = "counts";
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(what + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  bool with_expected = false;
  if (line == "setting_a,setting_b,counts,duration,expected") {
    with_expected = true;
  } else if (line != "setting_a,setting_b,counts,duration") {
    throw ValidationError(what + ": unexpected header '" + line + "'");
  }
  std::vector<CountRecord> records;
  size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string ctx = what + " row " + std::to_string(row);
    const std::vector<std::string_view> fields = detail::split_csv_line(line);
    if (fields.size() != (with_expected ? 5u : 4u))
      throw ValidationError(ctx + ": wrong number of columns");
    CountRecord rec;
    rec.setting_id_a = std::string(fields[0]);
    rec.setting_id_b = std::string(fields[1]);
    if (rec.setting_id_a.empty() || rec.setting_id_b.empty())
      throw ValidationError(ctx + ": empty setting id");
    rec.counts = detail::parse_int64(fields[2], ctx);
    rec.duration = detail::parse_double(fields[3], ctx);
    if (with_expected) rec.expected = detail::parse_double(fields[4], ctx);
    records.push_back(std::move(rec));
  }
  if (records.empty()) throw ValidationError(what + ": no records");
  return records;
}

inline std::vector<CountRecord> read_counts_file(const std::filesystem::path& path) {
  try {
    return counts_from_csv(detail::read_text_file(path));
  } catch (const ValidationError& err) {
    throw ValidationError(path.string() + ": " + err.what());
  }
}

inline void write_counts_file(const std::filesystem::path& path,
                              const std::vector<CountRecord>& records) {
  detail::write_text_atomic(path, counts_to_csv(records));
}

// --- fringe CSV ---------------------------------------------------------------

inline std::string fringe_to_csv(const std::vector<FringePoint>& points) {
  std::ostringstream out;
  out << "phase,rate\n";
  for (const FringePoint& p : points)
    out << detail::format_double(p.phase) << ',' << detail::format_double(p.rate) << "\n";
  return out.str();
}

inline std::vector<FringePoint> fringe_from_csv(const std::string& text) {
  const std::string what = "fringe";
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(what + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "phase,rate") throw ValidationError(what + ": unexpected header '" + line + "'");
  std::vector<FringePoint> points;
  size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string ctx = what + " row " + std::to_string(row);
    const std::vector<std::string_view> fields = detail::split_csv_line(line);
    if (fields.size() != 2) throw ValidationError(ctx + ": wrong number of columns");
    points.push_back({detail::parse_double(fields[0], ctx), detail::parse_double(fields[1], ctx)});
  }
  if (points.empty()) throw ValidationError(what + ": no rows");
  return points;
}

// --- result summaries -----------------------------------------------------------

inline Json metric_report_to_json(const MetricReport& report) {
  Json j = Json::object();
  if (report.tangle) j["tangle"] = *report.tangle;
  j["linear_entropy"] = report.linear_entropy;
  if (report.fidelity) j["fidelity"] = *report.fidelity;
  j["negativity"] = report.negativity;
  j["purity"] = report.purity;
  return j;
}

inline Json chsh_settings_to_json(const ChshSettings& s) {
  Json j = Json::object();
  j["a"] = detail::vector_to_json(s.a.ket);
  j["a_prime"] = detail::vector_to_json(s.a_prime.ket);
  j["b"] = detail::vector_to_json(s.b.ket);
  j["b_prime"] = detail::vector_to_json(s.b_prime.ket);
  return j;
}

inline ChshSettings chsh_settings_from_json(const Json& j) {
  const std::string what = "chsh settings";
  if (!j.is_object()) throw ValidationError(what + ": expected an object");
  ChshSettings s;
  s.a = local_basis(detail::vector_from_json(detail::member(j, "a", what), what + ".a"));
  s.a_prime =
      local_basis(detail::vector_from_json(detail::member(j, "a_prime", what), what + ".a_prime"));
  s.b = local_basis(detail::vector_from_json(detail::member(j, "b", what), what + ".b"));
  s.b_prime =
      local_basis(detail::vector_from_json(detail::member(j, "b_prime", what), what + ".b_prime"));
  return s;
}

inline Json bell_result_to_json(const BellResult& result,
                                const std::optional<ChshSettings>& settings) {
  Json j = Json::object();
  j["S"] = result.S;
  j["sigma"] = result.sigma ? Json(*result.sigma) : Json(nullptr);
  j["E"] = Json::array({result.E[0], result.E[1], result.E[2], result.E[3]});
  j["settings"] = settings ? chsh_settings_to_json(*settings) : Json(nullptr);
  return j;
}

// --- reconstruction options and diagnostics ----------------------------------

struct ReconstructionRequest {
  TomographyMethod method = TomographyMethod::Mle;
  TomographyOptions options;
};

inline Json reconstruction_request_to_json(const ReconstructionRequest& req) {
  Json j = Json::object();
  j["method"] = req.method == TomographyMethod::Mle ? "mle" : "linear";
  j["max_iterations"] = req.options.max_iterations;
  j["tolerance"] = req.options.tolerance;
  return j;
}

inline ReconstructionRequest reconstruction_request_from_json(const Json& j) {
  const std::string what = "options";
  if (!j.is_object()) throw ValidationError(what + ": expected a JSON object");
  ReconstructionRequest req;
  for (const auto& [key, value] : j.items()) {
    if (key == "method") {
      if (!value.is_string()) throw ValidationError(what + ": method must be a string");
      const std::string name = value.get<std::string>();
      if (name == "mle") req.method = TomographyMethod::Mle;
      else if (name == "linear") req.method = TomographyMethod::Linear;
      else throw ValidationError(what + ": unknown method '" + name + "'");
    } else if (key == "max_iterations") {
      if (!value.is_number_integer())
        throw ValidationError(what + ": max_iterations must be an integer");
      req.options.max_iterations = value.get<int>();
    } else if (key == "tolerance") {
      req.options.tolerance = detail::number_field(value, what + ".tolerance");
    } else {
      throw ValidationError(what + ": unknown field '" + key + "'");
    }
  }
  return req;
}

inline Json diagnostics_to_json(const TomographyResult& result) {
  Json j = Json::object();
  j["iterations"] = result.iterations;
  j["converged"] = result.converged;
  j["log_likelihood"] =
      result.log_likelihood.empty() ? Json(nullptr) : Json(result.log_likelihood.back());
  j["intensity"] = result.intensity;
  return j;
}

// --- run manifest ----------------------------------------------------------------

// Provenance record written next to every command's primary output;
// re-running the recorded command line reproduces the outputs byte for byte.
struct RunManifest {
  std::string command;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::uint64_t seed = 0;
  Json config = Json::object();
  std::string version = kVersion;
  double wall_time_s = 0.0;
};

inline Json manifest_to_json(const RunManifest& m) {
  Json j = Json::object();
  j["command"] = m.command;
  j["inputs"] = m.inputs;
  j["outputs"] = m.outputs;
  j["seed"] = m.seed;
  j["config"] = m.config;
  j["version"] = m.version;
  j["wall_time_s"] = m.wall_time_s;
  return j;
}

inline void write_manifest(const std::filesystem::path& path, const RunManifest& m) {
  detail::write_text_atomic(path, detail::dump_json(manifest_to_json(m)));
}

}  // namespace hyperpair
