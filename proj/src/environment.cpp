#include "masq/environment.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace masq {

RewardField RewardField::grid_bilinear(int nx, int ny, double cell_size,
                                       std::vector<double> altitudes,
                                       double scale) {
  if (nx < 2 || ny < 2)
    throw std::invalid_argument("terrain grid needs at least 2x2 nodes");
  if (!(cell_size > 0.0))
    throw std::invalid_argument("terrain cell size must be positive");
  if (int(altitudes.size()) != nx * ny)
    throw std::invalid_argument("terrain altitude count mismatch");
  for (double a : altitudes)
    if (!std::isfinite(a))
      throw std::invalid_argument("terrain altitude not finite");
  RewardField f;
  f.kind_ = Kind::grid;
  f.nx_ = nx;
  f.ny_ = ny;
  f.cell_ = cell_size;
  f.alt_ = std::move(altitudes);
  f.scale_ = scale;
  return f;
}

RewardField RewardField::negative_distance(const Vec& target, double scale,
                                           double offset) {
  RewardField f;
  f.kind_ = Kind::negdist;
  f.target_ = target;
  f.scale_ = scale;
  f.offset_ = offset;
  return f;
}

double RewardField::operator()(const Vec& p) const {
  if (kind_ == Kind::negdist)
    return offset_ - scale_ * p.distance(target_);

  // Bilinear interpolation; queries outside the grid clamp to its edge.
  auto axis = [this](double x, int n, int& i0, double& frac) {
    double u = x / cell_;
    if (u < 0.0) u = 0.0;
    if (u > double(n - 1)) u = double(n - 1);
    i0 = std::min(int(u), n - 2);
    frac = u - double(i0);
  };
  int ix, iy;
  double fx, fy;
  axis(p[0], nx_, ix, fx);
  axis(p[1], ny_, iy, fy);
  auto at = [this](int x, int y) { return alt_[size_t(y) * size_t(nx_) + size_t(x)]; };
  const double v0 = at(ix, iy) * (1.0 - fx) + at(ix + 1, iy) * fx;
  const double v1 = at(ix, iy + 1) * (1.0 - fx) + at(ix + 1, iy + 1) * fx;
  return scale_ * (v0 * (1.0 - fy) + v1 * fy);
}

void EnvModel::validate() const {
  bounds.validate();
  if (bounds.dim() != dim) throw std::invalid_argument("env: bounds dim mismatch");
  if (actions.empty()) throw std::invalid_argument("env: no actions");
  for (const Vec& a : actions)
    if (a.dim != dim) throw std::invalid_argument("env: action dim mismatch");
  if (noise_var < 0.0) throw std::invalid_argument("env: negative noise variance");
  unsafe_joint.validate();
}

Vec EnvModel::apply_boundary(const Vec& p) const {
  return boundary == Boundary::wrap ? bounds.wrap(p) : bounds.clamp(p);
}

Vec EnvModel::nominal_next(const Vec& state, int action_index) const {
  if (action_index < 0 || action_index >= n_actions())
    throw std::out_of_range("invalid action index");
  return apply_boundary(state + actions[size_t(action_index)]);
}

Vec EnvModel::apply_noise(const Vec& nominal, const Vec& noise) const {
  return apply_boundary(nominal + noise);
}

Vec EnvModel::draw_noise(Rng& rng) const {
  Vec e = Vec::zero(dim);
  const double sd = std::sqrt(noise_var);
  for (int i = 0; i < dim; ++i) e[i] = sd * rng.gaussian();
  return e;
}

Vec EnvModel::sample_next(const Vec& state, int action_index, Rng& rng) const {
  return apply_noise(nominal_next(state, action_index), draw_noise(rng));
}

std::pair<JointState, std::vector<double>> EnvModel::step(
    const JointState& joint, std::span<const int> action_indices,
    Rng& rng) const {
  if (int(action_indices.size()) != joint.size())
    throw std::invalid_argument("step: one action per agent required");
  JointState next;
  next.pos.reserve(joint.pos.size());
  std::vector<double> obs;
  obs.reserve(joint.pos.size());
  for (int i = 0; i < joint.size(); ++i) {
    const Vec n = sample_next(joint.pos[size_t(i)], action_indices[size_t(i)], rng);
    next.pos.push_back(n);
    obs.push_back(reward_field(n) + obs_noise_std * rng.gaussian());
  }
  return {std::move(next), std::move(obs)};
}

bool EnvModel::is_jointly_unsafe(const JointState& joint) const {
  const int n = joint.size();
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double d = joint.pos[size_t(i)].distance(joint.pos[size_t(j)]);
      if (unsafe_joint.kind == JointUnsafeSpec::Kind::min_pairwise_distance) {
        if (d < unsafe_joint.threshold) return true;
      } else {
        if (d > unsafe_joint.threshold) return true;
      }
    }
  }
  return false;
}

double EnvModel::transition_density(const Vec& next, const Vec& cur,
                                    int action_index) const {
  const Vec nominal = nominal_next(cur, action_index);
  if (noise_var == 0.0) {
    // Point-mass convention: unit mass at the nominal target.
    if (next.squared_distance(nominal) <= 1e-24) return 1.0;
    throw std::domain_error(
        "transition_density: zero noise is a point mass at nominal_next");
  }
  const double inv_norm = 1.0 / std::sqrt(2.0 * std::numbers::pi * noise_var);
  double density = 1.0;
  for (int i = 0; i < dim; ++i) {
    const double d = next[i] - nominal[i];
    double axis = std::exp(-d * d / (2.0 * noise_var));
    if (boundary == Boundary::wrap) {
      const double w = bounds.extent(i);
      const double img = d - (d >= 0.0 ? w : -w);  // nearest periodic image
      axis += std::exp(-img * img / (2.0 * noise_var));
    }
    density *= inv_norm * axis;
  }
  return density;
}

RewardField load_terrain_stream(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "empty terrain file");
  std::istringstream header(line);
  int nx = 0, ny = 0;
  double cell = 0.0;
  if (!(header >> nx >> ny >> cell))
    throw ParseError(1, "expected header `nx ny cell_size`");
  std::string extra;
  if (header >> extra) throw ParseError(1, "trailing tokens after header");
  if (nx < 2 || ny < 2 || !(cell > 0.0))
    throw ParseError(1, "header values out of range");

  std::vector<double> alt;
  alt.reserve(size_t(nx) * size_t(ny));
  for (int iy = 0; iy < ny; ++iy) {
    const int line_no = 2 + iy;
    if (!std::getline(in, line))
      throw ParseError(line_no, "unexpected end of file");
    std::istringstream row(line);
    double v;
    int count = 0;
    while (row >> v) {
      alt.push_back(v);
      ++count;
    }
    if (!row.eof()) throw ParseError(line_no, "non-numeric altitude");
    if (count != nx)
      throw ParseError(line_no, "expected " + std::to_string(nx) +
                                    " altitudes, got " + std::to_string(count));
  }
  while (std::getline(in, line)) {
    std::istringstream rest(line);
    std::string tok;
    if (rest >> tok)
      throw ParseError(2 + ny, "grid is not rectangular: extra data row");
  }
  return RewardField::grid_bilinear(nx, ny, cell, std::move(alt));
}

RewardField load_terrain(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open terrain file: " + path);
  return load_terrain_stream(in);
}

void write_terrain(const std::string& path, const RewardField& field) {
  if (!field.is_grid())
    throw std::invalid_argument("write_terrain: field is not a grid");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write terrain file: " + path);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", field.cell_size());
  out << field.nx() << ' ' << field.ny() << ' ' << buf << '\n';
  for (int iy = 0; iy < field.ny(); ++iy) {
    for (int ix = 0; ix < field.nx(); ++ix) {
      std::snprintf(buf, sizeof buf, "%.17g",
                    field.altitudes()[size_t(iy) * size_t(field.nx()) + size_t(ix)]);
      out << (ix ? " " : "") << buf;
    }
    out << '\n';
  }
}

RewardField synthetic_terrain(std::uint64_t seed, double size_m,
                              double cell_size, int bumps) {
  Rng rng(mix_seed({seed, 0x7e44a13ull}));
  struct Bump {
    double cx, cy, width, amp;
  };
  std::vector<Bump> bs;
  for (int k = 0; k < bumps; ++k) {
    Bump b;
    if (k == 0) {
      // One dominant rise in the middle third of the map, so the
      // high-reward region is contested ground near typical start areas.
      b.cx = rng.uniform(size_m / 3.0, 2.0 * size_m / 3.0);
      b.cy = rng.uniform(size_m / 3.0, 2.0 * size_m / 3.0);
      b.amp = rng.uniform(1.0, 1.5);
    } else if (k == 1) {
      // At least one valley deep enough to be individually unsafe.
      b.cx = rng.uniform(0.0, size_m);
      b.cy = rng.uniform(0.0, size_m);
      b.amp = -rng.uniform(1.0, 1.5);
    } else {
      b.cx = rng.uniform(0.0, size_m);
      b.cy = rng.uniform(0.0, size_m);
      b.amp = rng.uniform(0.5, 1.5) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    }
    b.width = rng.uniform(size_m / 8.0, size_m / 4.0);
    bs.push_back(b);
  }
  const int n = int(std::lround(size_m / cell_size)) + 1;
  std::vector<double> alt(size_t(n) * size_t(n), 0.0);
  for (int iy = 0; iy < n; ++iy) {
    for (int ix = 0; ix < n; ++ix) {
      const double x = ix * cell_size, y = iy * cell_size;
      double v = 0.0;
      for (const Bump& b : bs) {
        const double dx = x - b.cx, dy = y - b.cy;
        v += b.amp * std::exp(-(dx * dx + dy * dy) / (2.0 * b.width * b.width));
      }
      alt[size_t(iy) * size_t(n) + size_t(ix)] = v;
    }
  }
  return RewardField::grid_bilinear(n, n, cell_size, std::move(alt));
}

}  // namespace masq
