#include "navguard/map.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "navguard/errors.hpp"

namespace navguard {

namespace {

// 1D squared distance transform, lower envelope of parabolas.
void edt_1d(const std::vector<double>& f, std::vector<double>& d, int n,
            std::vector<int>& v, std::vector<double>& z) {
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = 1; q < n; q++) {
    double s;
    while (true) {
      s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
      if (s <= z[k]) {
        k--;
      } else {
        break;
      }
    }
    k++;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; q++) {
    while (z[k + 1] < q) k++;
    double dq = q - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

}  // namespace

std::vector<double> squared_edt(const std::vector<uint8_t>& grid, int width,
                                int height) {
  const double kInf = 1e18;
  std::vector<double> dist(static_cast<size_t>(width) * height);
  for (size_t i = 0; i < dist.size(); i++) dist[i] = grid[i] ? 0.0 : kInf;

  int n = std::max(width, height);
  std::vector<double> f(n), d(n), z(n + 1);
  std::vector<int> v(n);

  for (int x = 0; x < width; x++) {
    for (int y = 0; y < height; y++) f[y] = dist[static_cast<size_t>(y) * width + x];
    edt_1d(f, d, height, v, z);
    for (int y = 0; y < height; y++) dist[static_cast<size_t>(y) * width + x] = d[y];
  }
  for (int y = 0; y < height; y++) {
    for (int x = 0; x < width; x++) f[x] = dist[static_cast<size_t>(y) * width + x];
    edt_1d(f, d, width, v, z);
    for (int x = 0; x < width; x++) dist[static_cast<size_t>(y) * width + x] = d[x];
  }
  return dist;
}

OccupancyMap OccupancyMap::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open map file: " + path);
  OccupancyMap m;
  std::string line;
  bool in_grid = false;
  std::vector<std::string> grid_lines;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (in_grid) {
      if (!line.empty()) grid_lines.push_back(line);
      continue;
    }
    if (line.empty() || line[0] == '%') continue;
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key == "resolution") {
      ss >> m.resolution;
    } else if (key == "inflation_radius") {
      ss >> m.inflation_radius;
    } else if (key == "room") {
      Room r;
      ss >> r.name >> r.x0 >> r.y0 >> r.x1 >> r.y1;
      m.rooms.push_back(r);
    } else if (key == "grid") {
      in_grid = true;
    } else {
      throw ConfigError("unknown map header key '" + key + "' in " + path);
    }
  }
  if (grid_lines.empty()) throw ConfigError("map file has no grid: " + path);
  m.height = static_cast<int>(grid_lines.size());
  m.width = static_cast<int>(grid_lines[0].size());
  m.cells.assign(static_cast<size_t>(m.width) * m.height, 0);
  for (int j = 0; j < m.height; j++) {
    const std::string& row = grid_lines[j];
    if (static_cast<int>(row.size()) != m.width)
      throw ConfigError("ragged grid row in map file: " + path);
    for (int i = 0; i < m.width; i++) {
      char c = row[i];
      if (c == '#')
        m.cells[static_cast<size_t>(j) * m.width + i] = 1;
      else if (c != '.')
        throw ConfigError(std::string("bad grid character '") + c + "' in " + path);
    }
  }
  m.validate();
  return m;
}

void OccupancyMap::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write map file: " + path);
  out << "resolution " << resolution << "\n";
  out << "inflation_radius " << inflation_radius << "\n";
  for (const Room& r : rooms)
    out << "room " << r.name << " " << r.x0 << " " << r.y0 << " " << r.x1 << " "
        << r.y1 << "\n";
  out << "grid\n";
  for (int j = 0; j < height; j++) {
    for (int i = 0; i < width; i++)
      out << (cells[static_cast<size_t>(j) * width + i] ? '#' : '.');
    out << "\n";
  }
}

void OccupancyMap::validate() const {
  if (width <= 0 || height <= 0) throw ConfigError("map has empty grid");
  if (resolution <= 0.0) throw ConfigError("map resolution must be positive");
  if (cells.size() != static_cast<size_t>(width) * height)
    throw ConfigError("map cell count mismatch");
  for (int i = 0; i < width; i++)
    if (!occupied(i, 0) || !occupied(i, height - 1))
      throw ConfigError("map boundary must be occupied (closed world)");
  for (int j = 0; j < height; j++)
    if (!occupied(0, j) || !occupied(width - 1, j))
      throw ConfigError("map boundary must be occupied (closed world)");
}

const Room* OccupancyMap::find_room(const std::string& name) const {
  for (const Room& r : rooms)
    if (r.name == name) return &r;
  return nullptr;
}

const std::vector<double>& OccupancyMap::clearance_field() const {
  if (clearance_.empty()) {
    std::vector<double> d2 = squared_edt(cells, width, height);
    clearance_.resize(d2.size());
    for (size_t i = 0; i < d2.size(); i++)
      clearance_[i] = std::sqrt(d2[i]) * resolution;
  }
  return clearance_;
}

namespace {
double point_rect_distance(const Vec2& p, double x0, double y0, double x1,
                           double y1) {
  double dx = std::max({x0 - p.x, 0.0, p.x - x1});
  double dy = std::max({y0 - p.y, 0.0, p.y - y1});
  return std::hypot(dx, dy);
}
}  // namespace

double OccupancyMap::distance_to_occupied(const Vec2& p, Vec2* closest) const {
  // Upper bound from the clearance field at the containing cell, then exact
  // scan of the bounded neighborhood that can contain the minimizer.
  const std::vector<double>& cf = clearance_field();
  int ci = std::clamp(cell_x(p.x), 0, width - 1);
  int cj = std::clamp(cell_y(p.y), 0, height - 1);
  double half_diag = 0.5 * resolution * std::sqrt(2.0);
  // Center-to-center bound + offsets of p inside its cell and of the
  // boundary point inside the occupied cell.
  double ub = cf[static_cast<size_t>(cj) * width + ci] + 2.0 * half_diag;
  int radius_cells = static_cast<int>(std::ceil(ub / resolution)) + 1;
  int i0 = std::max(0, ci - radius_cells), i1 = std::min(width - 1, ci + radius_cells);
  int j0 = std::max(0, cj - radius_cells), j1 = std::min(height - 1, cj + radius_cells);
  double best = std::numeric_limits<double>::infinity();
  Vec2 best_pt{p.x, p.y};
  for (int j = j0; j <= j1; j++) {
    for (int i = i0; i <= i1; i++) {
      if (!cells[static_cast<size_t>(j) * width + i]) continue;
      double x0 = i * resolution, y0 = j * resolution;
      double d = point_rect_distance(p, x0, y0, x0 + resolution, y0 + resolution);
      if (d < best) {
        best = d;
        best_pt = {clampd(p.x, x0, x0 + resolution), clampd(p.y, y0, y0 + resolution)};
      }
    }
  }
  if (closest) *closest = best_pt;
  return best;
}

double OccupancyMap::distance_to_occupied(const Vec2& p) const {
  return distance_to_occupied(p, nullptr);
}

std::vector<uint8_t> OccupancyMap::inflated(double radius) const {
  const std::vector<double>& cf = clearance_field();
  std::vector<uint8_t> out(cells.size());
  for (size_t i = 0; i < cells.size(); i++) out[i] = cf[i] <= radius ? 1 : 0;
  return out;
}

}  // namespace navguard
