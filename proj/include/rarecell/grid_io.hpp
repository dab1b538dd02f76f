#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "rarecell/geometry.hpp"

namespace rarecell {

// In-memory form of an ESRI ASCII grid. NODATA cells are stored as NaN;
// `nodata` keeps the marker value used on disk so writes round-trip.
struct ascii_grid {
    grid_geometry geom;
    std::vector<double> values; // row-major, top row first; NaN = NODATA
    double nodata = -9999.0;

    double& at(int col, int row) { return values[geom.index(col, row)]; }
    double at(int col, int row) const { return values[geom.index(col, row)]; }
};

// Header keys accepted (case-insensitive): ncols, nrows, xllcorner,
// yllcorner, cellsize (or dx and dy), nodata_value. Data section must have
// exactly nrows lines of ncols whitespace-separated numbers, top row first.
// Throws parse_error naming line and column on malformed input.
ascii_grid read_ascii_grid(std::istream& in);
ascii_grid read_ascii_grid_file(const std::string& path);

void write_ascii_grid(std::ostream& out, const ascii_grid& grid);
void write_ascii_grid_file(const std::string& path, const ascii_grid& grid);

}
