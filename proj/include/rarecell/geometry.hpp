#pragma once

#include <cstdint>

namespace rarecell {

// Tile grid covering the simulation window. Values are stored row-major with
// row 0 at the top of the window, matching the on-disk grid layout; the
// origin (x0, y0) is the lower-left corner of the window.
struct grid_geometry {
    int n_cols = 0;
    int n_rows = 0;
    double dx = 1.0;
    double dy = 1.0;
    double x0 = 0.0;
    double y0 = 0.0;

    std::int64_t tiles() const { return static_cast<std::int64_t>(n_cols) * n_rows; }
    double tile_area() const { return dx * dy; }
    double width() const { return n_cols * dx; }
    double height() const { return n_rows * dy; }
    double area() const { return width() * height(); }

    std::int64_t index(int col, int row) const {
        return static_cast<std::int64_t>(row) * n_cols + col;
    }
    double center_x(int col) const { return x0 + (col + 0.5) * dx; }
    double center_y(int row) const { return y0 + (n_rows - row - 0.5) * dy; }

    bool valid() const {
        return n_cols >= 1 && n_rows >= 1 && dx > 0.0 && dy > 0.0;
    }

    bool operator==(const grid_geometry&) const = default;
};

}
