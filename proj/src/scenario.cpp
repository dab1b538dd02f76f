#include "rarecell/scenario.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <utility>

#include "rarecell/errors.hpp"
#include "rarecell/format.hpp"
#include "rarecell/pathloss.hpp"

namespace rarecell {

namespace {

std::ifstream open_or_throw(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw data_error("cannot open '" + path + "'");
    return in;
}

} // namespace

pathloss_grid load_pathloss_grid(std::istream& in) {
    return read_ascii_grid(in);
}

pathloss_grid load_pathloss_grid_file(const std::string& path) {
    auto in = open_or_throw(path);
    try {
        return load_pathloss_grid(in);
    } catch (const parse_error& e) {
        throw parse_error(path + ": " + e.what());
    }
}

building_mask load_building_mask(std::istream& in) {
    const ascii_grid grid = read_ascii_grid(in);
    building_mask mask;
    mask.geom = grid.geom;
    mask.blocked.assign(grid.values.size(), 0);
    for (std::size_t t = 0; t < grid.values.size(); ++t) {
        const double v = grid.values[t];
        if (v == 0.0) {
            mask.blocked[t] = 0;
        } else if (v == 1.0) {
            mask.blocked[t] = 1;
        } else {
            throw data_error("mask tile " + format_uint(t) + " has value " +
                             format_double(v) + "; masks must be 0 or 1 with no NODATA");
        }
    }
    return mask;
}

building_mask load_building_mask_file(const std::string& path) {
    auto in = open_or_throw(path);
    try {
        return load_building_mask(in);
    } catch (const parse_error& e) {
        throw parse_error(path + ": " + e.what());
    }
}

building_mask mask_from_nodata(const pathloss_grid& grid) {
    building_mask mask;
    mask.geom = grid.geom;
    mask.blocked.assign(grid.values.size(), 0);
    for (std::size_t t = 0; t < grid.values.size(); ++t)
        mask.blocked[t] = std::isnan(grid.values[t]) ? 1 : 0;
    return mask;
}

intensity_measure build_intensity(const building_mask& mask) {
    if (!mask.geom.valid())
        throw std::invalid_argument("build_intensity: invalid geometry");
    intensity_measure m;
    m.geom = mask.geom;
    m.mass.assign(mask.blocked.size(), 0.0);
    const double tile_area = mask.geom.tile_area();
    double total = 0.0;
    for (std::size_t t = 0; t < mask.blocked.size(); ++t) {
        if (!mask.blocked[t]) {
            m.mass[t] = tile_area;
            total += tile_area;
        }
    }
    m.total_mass = total;
    if (!(m.total_mass > 0.0))
        throw data_error("build_intensity: every tile is blocked, total mass is zero");
    return m;
}

scenario make_scenario(std::string name, const pathloss_grid& grid,
                       const std::optional<building_mask>& mask_opt,
                       load_warnings* warnings) {
    if (!grid.geom.valid())
        throw std::invalid_argument("make_scenario: invalid grid geometry");

    scenario scn;
    scn.name = std::move(name);
    scn.geom = grid.geom;
    scn.nodata = grid.nodata;
    scn.loss_db = grid.values;

    if (mask_opt) {
        if (mask_opt->geom != grid.geom)
            throw data_error("make_scenario: mask geometry differs from path-loss grid");
        for (std::size_t t = 0; t < grid.values.size(); ++t) {
            const bool nodata = std::isnan(grid.values[t]);
            const bool blocked = mask_opt->blocked[t] != 0;
            if (nodata != blocked)
                throw data_error("make_scenario: tile " + format_uint(t) +
                                 (nodata ? " is NODATA but unblocked in the mask"
                                         : " is blocked in the mask but has a path-loss value"));
        }
        scn.mask = *mask_opt;
    } else {
        scn.mask = mask_from_nodata(grid);
    }

    scn.loss_linear.assign(grid.values.size(), 0.0);
    std::int64_t positive = 0;
    for (std::size_t t = 0; t < grid.values.size(); ++t) {
        const double v = grid.values[t];
        if (std::isnan(v))
            continue;
        if (!std::isfinite(v))
            throw data_error("make_scenario: non-finite path loss at tile " + format_uint(t));
        if (v > 0.0)
            ++positive;
        const double lin = db_to_linear(v);
        if (!(lin > 0.0) || !std::isfinite(lin))
            throw data_error("make_scenario: path loss at tile " + format_uint(t) +
                             " is outside the positive finite range in linear scale");
        scn.loss_linear[t] = lin;
    }
    if (warnings)
        warnings->positive_db_tiles = positive;

    scn.intensity = build_intensity(scn.mask);
    return scn;
}

scenario generate_synthetic(int n_cols, int n_rows, double dx, double dy, double alpha,
                            const std::vector<obstacle_rect>& obstacles,
                            std::string name) {
    grid_geometry geom;
    geom.n_cols = n_cols;
    geom.n_rows = n_rows;
    geom.dx = dx;
    geom.dy = dy;
    if (!geom.valid())
        throw std::invalid_argument("generate_synthetic: invalid geometry");
    if (!(alpha > 0.0))
        throw std::invalid_argument("generate_synthetic: alpha must be positive");
    for (const auto& r : obstacles) {
        if (!(r.x0 < r.x1) || !(r.y0 < r.y1))
            throw std::invalid_argument("generate_synthetic: obstacle rectangle is empty");
        if (r.x0 < 0.0 || r.y0 < 0.0 || r.x1 > geom.width() || r.y1 > geom.height())
            throw std::invalid_argument("generate_synthetic: obstacle outside window");
    }

    pathloss_grid grid;
    grid.geom = geom;
    grid.values.assign(geom.tiles(), 0.0);
    const double cx = geom.width() / 2.0;
    const double cy = geom.height() / 2.0;
    for (int row = 0; row < n_rows; ++row) {
        for (int col = 0; col < n_cols; ++col) {
            const double x = geom.center_x(col);
            const double y = geom.center_y(row);
            bool blocked = false;
            for (const auto& r : obstacles) {
                if (x >= r.x0 && x <= r.x1 && y >= r.y0 && y <= r.y1) {
                    blocked = true;
                    break;
                }
            }
            const auto t = geom.index(col, row);
            if (blocked) {
                grid.values[t] = std::numeric_limits<double>::quiet_NaN();
            } else {
                const double s = std::hypot(x - cx, y - cy);
                grid.values[t] = linear_to_db(analytic_pathloss(s, alpha));
            }
        }
    }
    return make_scenario(std::move(name), grid);
}

double calibrated_tau(const intensity_measure& intensity) {
    if (!(intensity.total_mass > 0.0))
        throw std::invalid_argument("calibrated_tau: total mass must be positive");
    return 1.0 / intensity.total_mass;
}

ascii_grid pathloss_as_grid(const scenario& scn) {
    ascii_grid grid;
    grid.geom = scn.geom;
    grid.nodata = scn.nodata;
    grid.values = scn.loss_db;
    return grid;
}

ascii_grid mask_as_grid(const scenario& scn) {
    ascii_grid grid;
    grid.geom = scn.geom;
    grid.nodata = -9999.0;
    grid.values.assign(scn.mask.blocked.size(), 0.0);
    for (std::size_t t = 0; t < scn.mask.blocked.size(); ++t)
        grid.values[t] = scn.mask.blocked[t] ? 1.0 : 0.0;
    return grid;
}

ascii_grid intensity_as_grid(const scenario& scn) {
    ascii_grid grid;
    grid.geom = scn.geom;
    grid.nodata = -9999.0;
    grid.values = scn.intensity.mass;
    return grid;
}

}
