#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rarecell/geometry.hpp"
#include "rarecell/grid_io.hpp"

namespace rarecell {

// Per-tile path loss in dB; NaN marks NODATA (building) tiles.
using pathloss_grid = ascii_grid;

struct building_mask {
    grid_geometry geom;
    std::vector<std::uint8_t> blocked; // 1 = building tile
};

// Expected-user mass per tile before density scaling: tile area on free
// tiles, zero on blocked tiles.
struct intensity_measure {
    grid_geometry geom;
    std::vector<double> mass;
    double total_mass = 0.0;
};

// Immutable simulation window: geometry, building mask, per-tile path loss
// (dB and precomputed linear), intensity measure. Shareable across workers.
struct scenario {
    std::string name;
    grid_geometry geom;
    std::vector<double> loss_db;     // NaN on blocked tiles
    std::vector<double> loss_linear; // 0 on blocked tiles, never read there
    building_mask mask;
    intensity_measure intensity;
    double nodata = -9999.0;

    std::int64_t free_tiles() const {
        std::int64_t n = 0;
        for (auto b : mask.blocked) n += (b == 0);
        return n;
    }
};

struct load_warnings {
    std::int64_t positive_db_tiles = 0; // grids are relative, so warn, not fail
};

// Reads a path-loss grid; every non-NODATA value must be finite.
pathloss_grid load_pathloss_grid(std::istream& in);
pathloss_grid load_pathloss_grid_file(const std::string& path);

// Reads a 0/1 mask grid; any other value is a data error.
building_mask load_building_mask(std::istream& in);
building_mask load_building_mask_file(const std::string& path);

building_mask mask_from_nodata(const pathloss_grid& grid);

// mass_per_tile = dx*dy on free tiles, 0 on blocked; fails if everything is
// blocked (total mass zero).
intensity_measure build_intensity(const building_mask& mask);

// Assembles and validates a scenario. When a mask is supplied its geometry
// must match and NODATA <-> blocked must agree tile-for-tile; silent
// preference of one source would hide corrupt inputs.
scenario make_scenario(std::string name, const pathloss_grid& grid,
                       const std::optional<building_mask>& mask = std::nullopt,
                       load_warnings* warnings = nullptr);

// Axis-aligned obstacle rectangle in window coordinates.
struct obstacle_rect {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

// Synthetic scenario: base station at the window center, per-tile loss
// min{1, s^-alpha} evaluated at tile centers, obstacle tiles blocked.
// Obstacles must lie inside the window. A tile is blocked when its center
// falls inside an obstacle rectangle.
scenario generate_synthetic(int n_cols, int n_rows, double dx, double dy, double alpha,
                            const std::vector<obstacle_rect>& obstacles,
                            std::string name = "synthetic");

// Density-free threshold calibration: tau = 1/total_mass, linear scale.
double calibrated_tau(const intensity_measure& intensity);

// Serialization of scenario parts back to .asc grids.
ascii_grid pathloss_as_grid(const scenario& scn);
ascii_grid mask_as_grid(const scenario& scn);
ascii_grid intensity_as_grid(const scenario& scn);

}
