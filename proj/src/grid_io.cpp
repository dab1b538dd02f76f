#include "rarecell/grid_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "rarecell/errors.hpp"
#include "rarecell/format.hpp"

namespace rarecell {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream iss(line);
    std::string tok;
    while (iss >> tok) out.push_back(tok);
    return out;
}

[[noreturn]] void fail(int line_no, int col_no, const std::string& what) {
    throw parse_error("line " + format_int(line_no) + ", column " + format_int(col_no) +
                      ": " + what);
}

[[noreturn]] void fail(int line_no, const std::string& what) {
    throw parse_error("line " + format_int(line_no) + ": " + what);
}

} // namespace

ascii_grid read_ascii_grid(std::istream& in) {
    ascii_grid grid;
    bool have_ncols = false, have_nrows = false, have_cellsize = false;
    bool have_dx = false, have_dy = false;
    double dx = 1.0, dy = 1.0;

    std::string line;
    int line_no = 0;
    std::string pending_data_line;
    int pending_line_no = 0;

    // Header: lines whose first token starts with a letter.
    while (std::getline(in, line)) {
        ++line_no;
        auto toks = split_ws(line);
        if (toks.empty())
            continue;
        if (!std::isalpha(static_cast<unsigned char>(toks[0][0]))) {
            pending_data_line = line;
            pending_line_no = line_no;
            break;
        }
        if (toks.size() != 2)
            fail(line_no, "header line must be 'key value', got '" + line + "'");
        const std::string key = lower(toks[0]);
        double value = 0.0;
        if (!parse_double(toks[1], value))
            fail(line_no, 2, "non-numeric header value '" + toks[1] + "'");
        if (key == "ncols") {
            if (value < 1 || value != std::floor(value))
                fail(line_no, 2, "ncols must be a positive integer");
            grid.geom.n_cols = static_cast<int>(value);
            have_ncols = true;
        } else if (key == "nrows") {
            if (value < 1 || value != std::floor(value))
                fail(line_no, 2, "nrows must be a positive integer");
            grid.geom.n_rows = static_cast<int>(value);
            have_nrows = true;
        } else if (key == "xllcorner") {
            grid.geom.x0 = value;
        } else if (key == "yllcorner") {
            grid.geom.y0 = value;
        } else if (key == "cellsize") {
            if (!(value > 0.0))
                fail(line_no, 2, "cellsize must be positive");
            dx = dy = value;
            have_cellsize = true;
        } else if (key == "dx") {
            if (!(value > 0.0))
                fail(line_no, 2, "dx must be positive");
            dx = value;
            have_dx = true;
        } else if (key == "dy") {
            if (!(value > 0.0))
                fail(line_no, 2, "dy must be positive");
            dy = value;
            have_dy = true;
        } else if (key == "nodata_value") {
            grid.nodata = value;
        } else {
            fail(line_no, 1, "unknown header key '" + toks[0] + "'");
        }
    }

    if (!have_ncols || !have_nrows)
        fail(line_no, "header must define ncols and nrows");
    if (!have_cellsize && !(have_dx && have_dy))
        fail(line_no, "header must define cellsize (or both dx and dy)");
    grid.geom.dx = dx;
    grid.geom.dy = dy;

    grid.values.assign(grid.geom.tiles(), 0.0);
    int rows_read = 0;
    bool have_line = pending_line_no != 0;
    while (rows_read < grid.geom.n_rows) {
        if (!have_line) {
            if (!std::getline(in, line)) {
                fail(line_no, "expected " + format_int(grid.geom.n_rows) +
                                  " data rows, got " + format_int(rows_read));
            }
            ++line_no;
        } else {
            line = pending_data_line;
            line_no = pending_line_no;
            have_line = false;
        }
        auto toks = split_ws(line);
        if (toks.empty())
            continue; // tolerate blank lines between rows
        if (static_cast<int>(toks.size()) != grid.geom.n_cols) {
            fail(line_no, static_cast<int>(toks.size()),
                 "row " + format_int(rows_read) + " has " + format_int(toks.size()) +
                     " values, expected " + format_int(grid.geom.n_cols));
        }
        for (int c = 0; c < grid.geom.n_cols; ++c) {
            double value = 0.0;
            if (!parse_double(toks[c], value))
                fail(line_no, c + 1, "non-numeric token '" + toks[c] + "'");
            if (value == grid.nodata) {
                value = std::numeric_limits<double>::quiet_NaN();
            } else if (!std::isfinite(value)) {
                fail(line_no, c + 1, "non-finite value '" + toks[c] + "'");
            }
            grid.values[grid.geom.index(c, rows_read)] = value;
        }
        ++rows_read;
    }

    // Anything but whitespace after the last row is a malformed grid.
    while (std::getline(in, line)) {
        ++line_no;
        if (!split_ws(line).empty())
            fail(line_no, 1, "unexpected extra data row");
    }
    return grid;
}

ascii_grid read_ascii_grid_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw data_error("cannot open grid file '" + path + "'");
    try {
        return read_ascii_grid(in);
    } catch (const parse_error& e) {
        throw parse_error(path + ": " + e.what());
    }
}

void write_ascii_grid(std::ostream& out, const ascii_grid& grid) {
    const auto& g = grid.geom;
    out << "ncols " << format_int(g.n_cols) << '\n';
    out << "nrows " << format_int(g.n_rows) << '\n';
    out << "xllcorner " << format_double(g.x0) << '\n';
    out << "yllcorner " << format_double(g.y0) << '\n';
    if (g.dx == g.dy) {
        out << "cellsize " << format_double(g.dx) << '\n';
    } else {
        out << "dx " << format_double(g.dx) << '\n';
        out << "dy " << format_double(g.dy) << '\n';
    }
    out << "nodata_value " << format_double(grid.nodata) << '\n';
    const std::string nodata_tok = format_double(grid.nodata);
    for (int r = 0; r < g.n_rows; ++r) {
        for (int c = 0; c < g.n_cols; ++c) {
            if (c)
                out << ' ';
            const double v = grid.values[g.index(c, r)];
            out << (std::isnan(v) ? nodata_tok : format_double(v));
        }
        out << '\n';
    }
}

void write_ascii_grid_file(const std::string& path, const ascii_grid& grid) {
    std::ofstream out(path, std::ios::binary); // LF line endings everywhere
    if (!out)
        throw data_error("cannot open '" + path + "' for writing");
    write_ascii_grid(out, grid);
    if (!out)
        throw data_error("write failed for '" + path + "'");
}

}
