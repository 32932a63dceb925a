#include "field_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "isostable/error.hpp"

namespace isostable::cli {
namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) cells.push_back(cell);
  if (!line.empty() && line.back() == sep) cells.emplace_back();
  return cells;
}

double parse_cell(const std::string& cell, const std::string& where) {
  if (cell.empty()) return std::nan("");
  if (cell == "inf") return std::numeric_limits<double>::infinity();
  if (cell == "-inf") return -std::numeric_limits<double>::infinity();
  double x = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), x);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) {
    throw Error(ErrorKind::Config, where + ": bad number '" + cell + "'");
  }
  return x;
}

PointStatus parse_status(const std::string& s, const std::string& where) {
  for (auto st : {PointStatus::Converged, PointStatus::Diverged, PointStatus::Truncated}) {
    if (s == to_string(st)) return st;
  }
  throw Error(ErrorKind::Config, where + ": unknown status '" + s + "'");
}

}  // namespace

std::string format_double(double x) {
  if (std::isnan(x)) return "";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::ofstream open_output(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  std::error_code ec;
  if (!parent.empty()) std::filesystem::create_directories(parent, ec);
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
  return out;
}

std::string strip_field_extension(const std::string& path) {
  for (const std::string ext : {".csv", ".json"}) {
    if (path.size() > ext.size() && path.compare(path.size() - ext.size(), ext.size(), ext) == 0) {
      return path.substr(0, path.size() - ext.size());
    }
  }
  return path;
}

void write_field_csv(std::ostream& out, const ScalarField& field) {
  const int n = field.grid.dim();
  for (int a = 0; a < n; ++a) out << 'x' << (a + 1) << ',';
  out << "magnitude,phase,tau,status,basin\n";
  for (std::size_t i = 0; i < field.records.size(); ++i) {
    const Vector x = field.grid.point(static_cast<long>(i));
    for (int a = 0; a < n; ++a) out << format_double(x[a]) << ',';
    const auto& r = field.records[i];
    out << format_double(r.magnitude) << ',' << (r.phase ? format_double(*r.phase) : "") << ','
        << format_double(r.tau) << ',' << to_string(r.status) << ',' << r.basin << '\n';
  }
}

void write_field(const std::string& prefix, const ScalarField& field, const json& header) {
  std::ofstream csv = open_output(prefix + ".csv");
  write_field_csv(csv, field);
  std::ofstream js = open_output(prefix + ".json");
  js << header.dump(2) << '\n';
  if (!csv || !js) throw Error(ErrorKind::Io, "write failed for '" + prefix + "'");
}

ScalarField read_field(const std::string& path) {
  const std::string prefix = strip_field_extension(path);
  std::ifstream js(prefix + ".json");
  if (!js) throw Error(ErrorKind::Io, "cannot open '" + prefix + ".json'");
  json header;
  try {
    header = json::parse(js);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Config, prefix + ".json: " + e.what());
  }
  ScalarField field;
  try {
    const auto& g = header.at("grid");
    const auto lower = g.at("lower").get<std::vector<double>>();
    const auto upper = g.at("upper").get<std::vector<double>>();
    field.grid.lower = Eigen::Map<const Vector>(lower.data(), static_cast<Eigen::Index>(lower.size()));
    field.grid.upper = Eigen::Map<const Vector>(upper.data(), static_cast<Eigen::Index>(upper.size()));
    field.grid.resolution = g.at("resolution").get<std::vector<int>>();
    field.quantity = quantity_from_string(header.at("quantity").get<std::string>());
    field.model = header.at("model").at("name").get<std::string>();
    field.fingerprints = header.at("fingerprints").get<std::vector<std::string>>();
    field.grid.validate();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, prefix + ".json: " + e.what());
  } catch (const Error& e) {
    throw Error(ErrorKind::Config, prefix + ".json: " + e.what());
  }

  std::ifstream csv(prefix + ".csv");
  if (!csv) throw Error(ErrorKind::Io, "cannot open '" + prefix + ".csv'");
  const int n = field.grid.dim();
  std::string line;
  std::getline(csv, line);
  long row = 0;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    const std::string where = prefix + ".csv:" + std::to_string(row + 2);
    const auto cells = split(line, ',');
    if (static_cast<int>(cells.size()) != n + 5) throw Error(ErrorKind::Config, where + ": wrong column count");
    PointRecord r;
    r.magnitude = parse_cell(cells[n], where);
    if (!cells[n + 1].empty()) r.phase = parse_cell(cells[n + 1], where);
    r.tau = parse_cell(cells[n + 2], where);
    r.status = parse_status(cells[n + 3], where);
    r.basin = static_cast<int>(parse_cell(cells[n + 4], where));
    field.records.push_back(r);
    ++row;
  }
  if (row != field.grid.size()) throw Error(ErrorKind::Config, prefix + ".csv: record count does not match the grid");
  return field;
}

json contour_to_json(const ContourLevel& level, int dim) {
  auto point = [](const Vector& p) { return std::vector<double>(p.begin(), p.end()); };
  json j{{"level", level.level}};
  if (dim == 2) {
    json lines = json::array();
    for (const auto& line : level.polylines) {
      json pts = json::array();
      for (const auto& p : line) pts.push_back(point(p));
      lines.push_back(pts);
    }
    j["polylines"] = lines;
  } else {
    json pts = json::array();
    for (const auto& p : level.points) pts.push_back(point(p));
    j["points"] = pts;
  }
  return j;
}

}  // namespace isostable::cli
