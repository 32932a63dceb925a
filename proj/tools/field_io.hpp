#pragma once

#include <fstream>
#include <string>

#include "config.hpp"

namespace isostable::cli {

/// "out", "out.csv" and "out.json" all name the pair out.csv / out.json.
[[nodiscard]] std::string strip_field_extension(const std::string& path);

/// Columns x1..xn, magnitude, phase, tau, status, basin. Undefined values are
/// empty cells; numbers carry 17 significant digits.
void write_field_csv(std::ostream& out, const ScalarField& field);
void write_field(const std::string& prefix, const ScalarField& field, const json& header);

/// Reads a field written by write_field. Throws Error(Io) or Error(Config).
[[nodiscard]] ScalarField read_field(const std::string& prefix);

/// Contour level as {level, polylines} (2D) or {level, points} (3D).
[[nodiscard]] json contour_to_json(const ContourLevel& level, int dim);

[[nodiscard]] std::string format_double(double x);

/// Opens `path` for writing, creating missing parent directories.
[[nodiscard]] std::ofstream open_output(const std::string& path);

}  // namespace isostable::cli
