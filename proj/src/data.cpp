#include "mtft/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <utility>

#include "mtft/rng.hpp"

namespace fs = std::filesystem;

namespace mtft {

namespace {

[[noreturn]] void fail(const std::string& msg) {
  throw std::runtime_error(msg);
}

struct FamilyWeight {
  std::string name;
  double weight = 1.0;
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<FamilyWeight> parse_mix(const std::string& mix) {
  static const char* known[] = {"cv", "ca", "lane", "turn"};
  std::vector<FamilyWeight> fams;
  double total = 0.0;
  for (const std::string& tok : split(mix, ',')) {
    if (tok.empty()) continue;
    FamilyWeight fw;
    auto eq = tok.find('=');
    if (eq == std::string::npos) {
      fw.name = tok;
    } else {
      fw.name = tok.substr(0, eq);
      try {
        fw.weight = std::stod(tok.substr(eq + 1));
      } catch (const std::exception&) {
        fail("synth: bad family weight in mix token '" + tok + "'");
      }
    }
    bool ok = false;
    for (const char* k : known) ok = ok || fw.name == k;
    if (!ok) fail("synth: unknown kinematic family '" + fw.name + "'");
    if (fw.weight < 0.0) fail("synth: negative weight for '" + fw.name + "'");
    total += fw.weight;
    fams.push_back(fw);
  }
  if (fams.empty() || total <= 0.0)
    fail("synth: kinematics mix selects nothing: '" + mix + "'");
  return fams;
}

const std::string& pick_family(const std::vector<FamilyWeight>& fams,
                               Rng& rng) {
  double total = 0.0;
  for (const FamilyWeight& f : fams) total += f.weight;
  double x = rng.uniform() * total;
  for (const FamilyWeight& f : fams) {
    x -= f.weight;
    if (x < 0.0) return f.name;
  }
  return fams.back().name;
}

/// Target path over t_h + t_f steps in a canonical frame: starts near the
/// origin heading +x. Challenge mode draws parameters strong enough to trip
/// the lateral/longitudinal filter.
Tensor target_path(const std::string& family, std::size_t steps, double dt,
                   bool challenging, Rng& rng) {
  Tensor p({steps, 2});
  if (family == "cv") {
    double v = rng.uniform(8.0, 25.0);
    double x = 0.0;
    for (std::size_t t = 0; t < steps; ++t) {
      p(t, 0) = x;
      p(t, 1) = 0.0;
      x += v * dt;
    }
  } else if (family == "ca") {
    double v0 = challenging ? rng.uniform(14.0, 25.0) : rng.uniform(10.0, 25.0);
    double mag = challenging ? rng.uniform(2.2, 3.5) : rng.uniform(1.2, 3.0);
    double a = rng.below(2) == 0 ? mag : -mag;
    double x = 0.0;
    for (std::size_t t = 0; t < steps; ++t) {
      p(t, 0) = x;
      p(t, 1) = 0.0;
      double v = v0 + a * static_cast<double>(t) * dt;
      if (v < 0.0) v = 0.0;
      x += v * dt;
    }
  } else if (family == "lane") {
    double v = rng.uniform(10.0, 25.0);
    double amp = challenging ? rng.uniform(6.0, 8.5) : rng.uniform(3.0, 5.5);
    if (rng.below(2) == 1) amp = -amp;
    double k = challenging ? rng.uniform(1.8, 3.5) : rng.uniform(1.5, 3.5);
    double span = static_cast<double>(steps) * dt;
    double t0 = challenging ? span * rng.uniform(0.55, 0.75)
                            : span * rng.uniform(0.3, 0.7);
    double x = 0.0;
    for (std::size_t t = 0; t < steps; ++t) {
      double tt = static_cast<double>(t) * dt;
      p(t, 0) = x;
      p(t, 1) = amp / (1.0 + std::exp(-k * (tt - t0)));
      x += v * dt;
    }
  } else {  // turn
    double v = rng.uniform(8.0, 20.0);
    double radius = challenging ? rng.uniform(10.0, 30.0) : rng.uniform(15.0, 60.0);
    double sgn = rng.below(2) == 0 ? 1.0 : -1.0;
    double omega = v / radius;
    for (std::size_t t = 0; t < steps; ++t) {
      double th = omega * static_cast<double>(t) * dt;
      p(t, 0) = radius * std::sin(th);
      p(t, 1) = sgn * radius * (1.0 - std::cos(th));
    }
  }
  return p;
}

TrajectoryScene make_scene(long scene_id, const SynthConfig& cfg,
                           const std::vector<FamilyWeight>& fams, Rng& rng) {
  std::size_t steps = cfg.t_h + cfg.t_f;
  double dt = 1.0 / cfg.hz;
  const std::string& family = pick_family(fams, rng);
  Tensor path = target_path(family, steps, dt, cfg.challenging, rng);

  TrajectoryScene scene;
  scene.scene_id = scene_id;
  scene.hz = cfg.hz;
  scene.target.vehicle_id = 0;
  scene.target.history = Tensor({cfg.t_h, 2});
  scene.target.observed.bits.assign(cfg.t_h, 1);
  scene.future = Tensor({cfg.t_f, 2});
  for (std::size_t t = 0; t < cfg.t_h; ++t) {
    scene.target.history(t, 0) = path(t, 0);
    scene.target.history(t, 1) = path(t, 1);
  }
  for (std::size_t t = 0; t < cfg.t_f; ++t) {
    scene.future(t, 0) = path(cfg.t_h + t, 0);
    scene.future(t, 1) = path(cfg.t_h + t, 1);
  }

  static const double lanes[] = {3.5, -3.5, 7.0, -7.0};
  std::size_t n_neighbors = 1 + rng.below(4);
  for (std::size_t k = 0; k < n_neighbors; ++k) {
    VehicleTrack nb;
    nb.vehicle_id = static_cast<int>(k) + 1;
    nb.observed.bits.assign(cfg.t_h, 1);
    nb.history = Tensor({cfg.t_h, 2});
    double lat = lanes[rng.below(4)];
    double x0 = rng.uniform(-15.0, 15.0);
    double v = rng.uniform(8.0, 25.0);
    double x = x0;
    for (std::size_t t = 0; t < cfg.t_h; ++t) {
      nb.history(t, 0) = x;
      nb.history(t, 1) = lat;
      x += v * dt;
    }
    scene.neighbors.push_back(std::move(nb));
  }

  if (cfg.noise_sigma > 0.0) {
    auto jitter = [&](Tensor& m) {
      for (std::size_t i = 0; i < m.size(); ++i)
        m[i] += rng.normal(0.0, cfg.noise_sigma);
    };
    jitter(scene.target.history);
    jitter(scene.future);
    for (VehicleTrack& nb : scene.neighbors) jitter(nb.history);
  }

  double theta = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
  double tx = rng.uniform(-500.0, 500.0);
  double ty = rng.uniform(-500.0, 500.0);
  double ct = std::cos(theta), st = std::sin(theta);
  auto rigid = [&](Tensor& m) {
    for (std::size_t r = 0; r < m.dim(0); ++r) {
      double x = m(r, 0), y = m(r, 1);
      m(r, 0) = ct * x - st * y + tx;
      m(r, 1) = st * x + ct * y + ty;
    }
  };
  rigid(scene.target.history);
  rigid(scene.future);
  for (VehicleTrack& nb : scene.neighbors) rigid(nb.history);
  return scene;
}

void heading_axes(const TrajectoryScene& s, int last, int prev, double& ux,
                  double& uy) {
  const Tensor& h = s.target.history;
  double hx = 0.0, hy = 0.0;
  if (prev >= 0) {
    hx = h(last, 0) - h(prev, 0);
    hy = h(last, 1) - h(prev, 1);
  }
  if (hx == 0.0 && hy == 0.0 && s.future.dim(0) >= 1) {
    hx = s.future(0, 0) - h(last, 0);
    hy = s.future(0, 1) - h(last, 1);
  }
  double norm = std::hypot(hx, hy);
  if (norm < 1e-12) {
    ux = 1.0;
    uy = 0.0;
  } else {
    ux = hx / norm;
    uy = hy / norm;
  }
}

}  // namespace

SceneDataset synth_generate(const SynthConfig& cfg) {
  if (cfg.count < 1) fail("synth: count must be >= 1");
  if (cfg.t_h < 2 || cfg.t_f < 1) fail("synth: need t_h >= 2 and t_f >= 1");
  if (cfg.hz <= 0.0) fail("synth: hz must be positive");
  std::vector<FamilyWeight> fams = parse_mix(cfg.mix);

  SceneDataset ds;
  ds.manifest.split = cfg.split;
  ds.manifest.t_h = cfg.t_h;
  ds.manifest.t_f = cfg.t_f;
  ds.manifest.hz = cfg.hz;
  ds.manifest.source = "synthetic";

  std::size_t max_attempts = cfg.count * 1000 + 1000;
  for (std::size_t attempt = 0;
       attempt < max_attempts && ds.scenes.size() < cfg.count; ++attempt) {
    Rng rng(Rng::mix(cfg.seed, attempt));
    TrajectoryScene scene =
        make_scene(static_cast<long>(attempt), cfg, fams, rng);
    if (cfg.challenging && !is_challenging(scene)) continue;
    ds.scenes.push_back(std::move(scene));
  }
  if (ds.scenes.size() < cfg.count)
    fail("synth: only " + std::to_string(ds.scenes.size()) + " of " +
         std::to_string(cfg.count) +
         " scenes passed the challenge filter; adjust the mix");
  ds.manifest.count = ds.scenes.size();
  return ds;
}

bool is_challenging(const TrajectoryScene& scene) {
  const Tensor& h = scene.target.history;
  const auto& bits = scene.target.observed.bits;
  int last = -1, prev = -1;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] == 1) {
      prev = last;
      last = static_cast<int>(i);
    }
  }
  if (last < 0 || scene.future.dim(0) < 1) return false;

  double ux, uy;
  heading_axes(scene, last, prev, ux, uy);
  double lx = -uy, ly = ux;
  double rx = h(last, 0), ry = h(last, 1);

  double max_lat = 0.0;
  for (std::size_t t = 0; t < scene.future.dim(0); ++t) {
    double d = (scene.future(t, 0) - rx) * lx + (scene.future(t, 1) - ry) * ly;
    max_lat = std::max(max_lat, std::fabs(d));
  }

  double vmin = std::numeric_limits<double>::infinity();
  double vmax = -vmin;
  for (std::size_t t = 1; t < scene.future.dim(0); ++t) {
    double v = ((scene.future(t, 0) - scene.future(t - 1, 0)) * ux +
                (scene.future(t, 1) - scene.future(t - 1, 1)) * uy) *
               scene.hz;
    vmin = std::min(vmin, v);
    vmax = std::max(vmax, v);
  }
  double dv = scene.future.dim(0) >= 2 ? vmax - vmin : 0.0;
  return max_lat > 5.0 || dv > 20.0 / 3.6;
}

SceneDataset filter_challenging(const SceneDataset& ds, bool require_missing) {
  SceneDataset out;
  out.manifest = ds.manifest;
  for (const TrajectoryScene& s : ds.scenes) {
    if (!is_challenging(s)) continue;
    if (require_missing &&
        s.target.observed.observed_count() ==
            static_cast<int>(s.target.observed.len()))
      continue;
    out.scenes.push_back(s);
  }
  out.manifest.count = out.scenes.size();
  return out;
}

void write_dataset(const SceneDataset& ds, const std::string& dir) {
  fs::create_directories(dir);
  std::ofstream csv(fs::path(dir) / "scenes.csv", std::ios::binary);
  if (!csv) fail(dir + "/scenes.csv: cannot open for writing");
  csv << "scene_id,vehicle_id,role,t_index,x,y,observed\n";
  auto row = [&](long sid, int vid, const char* role, std::size_t t, double x,
                 double y, int obs) {
    csv << sid << ',' << vid << ',' << role << ',' << t << ','
        << format_double(x) << ',' << format_double(y) << ',' << obs << '\n';
  };
  for (const TrajectoryScene& s : ds.scenes) {
    for (std::size_t t = 0; t < s.target.history.dim(0); ++t)
      row(s.scene_id, s.target.vehicle_id, "target", t, s.target.history(t, 0),
          s.target.history(t, 1), s.target.observed.bits[t]);
    for (std::size_t t = 0; t < s.future.dim(0); ++t)
      row(s.scene_id, s.target.vehicle_id, "target",
          s.target.history.dim(0) + t, s.future(t, 0), s.future(t, 1), 1);
    for (const VehicleTrack& nb : s.neighbors)
      for (std::size_t t = 0; t < nb.history.dim(0); ++t)
        row(s.scene_id, nb.vehicle_id, "neighbor", t, nb.history(t, 0),
            nb.history(t, 1), nb.observed.bits[t]);
  }
  if (!csv) fail(dir + "/scenes.csv: write failed");

  std::ofstream man(fs::path(dir) / "manifest.txt", std::ios::binary);
  if (!man) fail(dir + "/manifest.txt: cannot open for writing");
  man << "split=" << ds.manifest.split << "\n";
  man << "count=" << ds.manifest.count << "\n";
  man << "t_h=" << ds.manifest.t_h << "\n";
  man << "t_f=" << ds.manifest.t_f << "\n";
  man << "hz=" << format_double(ds.manifest.hz) << "\n";
  man << "interval_tag=" << ds.manifest.interval_tag << "\n";
  man << "source=" << ds.manifest.source << "\n";
  if (!man) fail(dir + "/manifest.txt: write failed");
}

SceneDataset read_dataset(const std::string& dir) {
  std::ifstream man(fs::path(dir) / "manifest.txt");
  if (!man) fail(dir + "/manifest.txt: cannot open");
  DatasetManifest m;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(man, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(dir + "/manifest.txt:" + std::to_string(lineno) +
           ": expected key=value, got '" + line + "'");
    std::string key = line.substr(0, eq), val = line.substr(eq + 1);
    try {
      if (key == "split") m.split = val;
      else if (key == "count") m.count = std::stoul(val);
      else if (key == "t_h") m.t_h = std::stoul(val);
      else if (key == "t_f") m.t_f = std::stoul(val);
      else if (key == "hz") m.hz = std::stod(val);
      else if (key == "interval_tag") m.interval_tag = val;
      else if (key == "source") m.source = val;
      else
        fail(dir + "/manifest.txt:" + std::to_string(lineno) +
             ": unknown key '" + key + "'");
    } catch (const std::invalid_argument&) {
      fail(dir + "/manifest.txt:" + std::to_string(lineno) +
           ": bad value for '" + key + "'");
    }
  }

  IngestConfig icfg;
  icfg.t_h = m.t_h;
  icfg.t_f = m.t_f;
  icfg.hz = m.hz;
  icfg.split = m.split;
  icfg.source = m.source;
  SceneDataset ds = ingest_csv((fs::path(dir) / "scenes.csv").string(), icfg);
  ds.manifest = m;
  if (ds.scenes.size() != m.count)
    fail(dir + ": manifest count " + std::to_string(m.count) +
         " does not match " + std::to_string(ds.scenes.size()) + " scenes");
  return ds;
}

SceneDataset ingest_csv(const std::string& path, const IngestConfig& cfg,
                        IngestLog* log) {
  std::ifstream in(path);
  if (!in) fail(path + ": cannot open");
  std::string line;
  if (!std::getline(in, line)) fail(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::unordered_map<std::string, std::size_t> col;
  {
    std::vector<std::string> names = split(line, ',');
    for (std::size_t i = 0; i < names.size(); ++i) col[names[i]] = i;
  }
  for (const char* need :
       {"scene_id", "vehicle_id", "role", "t_index", "x", "y"})
    if (!col.count(need))
      fail(path + ": header is missing column '" + std::string(need) + "'");
  bool has_observed = col.count("observed") != 0;

  struct Row {
    std::size_t t;
    double x, y;
    int obs;
    std::size_t lineno;
  };
  struct Veh {
    std::string role;
    std::vector<Row> rows;
  };
  struct SceneBuild {
    std::vector<int> vehicle_order;
    std::unordered_map<int, Veh> vehicles;
  };
  std::vector<long> scene_order;
  std::unordered_map<long, SceneBuild> builds;

  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f = split(line, ',');
    auto field = [&](const char* name) -> const std::string& {
      std::size_t i = col.at(name);
      if (i >= f.size())
        fail(path + ":" + std::to_string(lineno) + ": missing column '" +
             std::string(name) + "'");
      return f[i];
    };
    long sid;
    int vid;
    std::size_t t;
    double x, y;
    int obs = 1;
    try {
      sid = std::stol(field("scene_id"));
      vid = std::stoi(field("vehicle_id"));
      t = std::stoul(field("t_index"));
      x = std::stod(field("x"));
      y = std::stod(field("y"));
      if (has_observed) obs = std::stoi(field("observed"));
    } catch (const std::exception&) {
      fail(path + ":" + std::to_string(lineno) + ": malformed row '" + line +
           "'");
    }
    const std::string& role = field("role");
    if (role != "target" && role != "neighbor")
      fail(path + ":" + std::to_string(lineno) + ": unknown role '" + role +
           "'");
    if (obs != 0 && obs != 1)
      fail(path + ":" + std::to_string(lineno) +
           ": observed must be 0 or 1, got '" + field("observed") + "'");
    if (t >= cfg.t_h + cfg.t_f)
      fail(path + ":" + std::to_string(lineno) + ": t_index " +
           std::to_string(t) + " out of range for t_h=" +
           std::to_string(cfg.t_h) + ", t_f=" + std::to_string(cfg.t_f));

    if (!builds.count(sid)) scene_order.push_back(sid);
    SceneBuild& sb = builds[sid];
    if (!sb.vehicles.count(vid)) sb.vehicle_order.push_back(vid);
    Veh& veh = sb.vehicles[vid];
    if (veh.role.empty()) veh.role = role;
    else if (veh.role != role)
      fail(path + ":" + std::to_string(lineno) + ": vehicle " +
           std::to_string(vid) + " changes role");
    for (const Row& r : veh.rows)
      if (r.t == t)
        fail(path + ":" + std::to_string(lineno) + ": duplicate t_index " +
             std::to_string(t) + " for vehicle " + std::to_string(vid));
    veh.rows.push_back({t, x, y, obs, lineno});
  }

  auto warn = [&](const std::string& msg) {
    if (log) log->warnings.push_back(msg);
  };

  SceneDataset ds;
  ds.manifest.split = cfg.split;
  ds.manifest.t_h = cfg.t_h;
  ds.manifest.t_f = cfg.t_f;
  ds.manifest.hz = cfg.hz;
  ds.manifest.source = cfg.source;

  for (long sid : scene_order) {
    SceneBuild& sb = builds[sid];
    int target_id = 0;
    std::size_t n_targets = 0;
    for (int vid : sb.vehicle_order) {
      if (sb.vehicles[vid].role == "target") {
        target_id = vid;
        ++n_targets;
      }
    }
    if (n_targets != 1) {
      warn("scene " + std::to_string(sid) + ": " +
           std::to_string(n_targets) + " targets, skipped");
      if (log) ++log->skipped_scenes;
      continue;
    }

    auto build_history = [&](const Veh& veh, VehicleTrack& track) {
      track.history = Tensor::zeros({cfg.t_h, 2});
      track.observed.bits.assign(cfg.t_h, 0);
      for (const Row& r : veh.rows) {
        if (r.t >= cfg.t_h) continue;
        track.history(r.t, 0) = r.x;
        track.history(r.t, 1) = r.y;
        track.observed.bits[r.t] = r.obs;
      }
    };

    TrajectoryScene scene;
    scene.scene_id = sid;
    scene.hz = cfg.hz;
    const Veh& tveh = sb.vehicles[target_id];
    scene.target.vehicle_id = target_id;
    build_history(tveh, scene.target);
    if (!scene.target.observed.any_observed()) {
      warn("scene " + std::to_string(sid) +
           ": target history fully unobserved, skipped");
      if (log) ++log->skipped_scenes;
      continue;
    }

    scene.future = Tensor::zeros({cfg.t_f, 2});
    std::vector<int> seen(cfg.t_f, 0);
    bool future_ok = true;
    for (const Row& r : tveh.rows) {
      if (r.t < cfg.t_h) continue;
      std::size_t ft = r.t - cfg.t_h;
      scene.future(ft, 0) = r.x;
      scene.future(ft, 1) = r.y;
      seen[ft] = r.obs;
    }
    for (std::size_t ft = 0; ft < cfg.t_f; ++ft)
      if (seen[ft] != 1) future_ok = false;
    if (!future_ok) {
      warn("scene " + std::to_string(sid) +
           ": target future incomplete, skipped");
      if (log) ++log->skipped_scenes;
      continue;
    }

    bool ignored_neighbor_future = false;
    for (int vid : sb.vehicle_order) {
      if (vid == target_id) continue;
      const Veh& nveh = sb.vehicles[vid];
      for (const Row& r : nveh.rows)
        if (r.t >= cfg.t_h) ignored_neighbor_future = true;
      VehicleTrack nb;
      nb.vehicle_id = vid;
      build_history(nveh, nb);
      if (!nb.observed.any_observed()) {
        if (log) ++log->dropped_vehicles;
        continue;
      }
      scene.neighbors.push_back(std::move(nb));
    }
    if (ignored_neighbor_future)
      warn("scene " + std::to_string(sid) +
           ": neighbor rows beyond the history horizon ignored");

    ds.scenes.push_back(std::move(scene));
  }
  ds.manifest.count = ds.scenes.size();
  return ds;
}

namespace {

int last_observed_index(const VehicleTrack& track) {
  for (std::size_t i = track.observed.len(); i-- > 0;)
    if (track.observed.bits[i] == 1) return static_cast<int>(i);
  return -1;
}

void translate(Tensor& m, double dx, double dy) {
  for (std::size_t r = 0; r < m.dim(0); ++r) {
    m(r, 0) += dx;
    m(r, 1) += dy;
  }
}

}  // namespace

TrajectoryScene normalize_scene(const TrajectoryScene& scene) {
  int last = last_observed_index(scene.target);
  if (last < 0)
    throw std::invalid_argument(
        "normalize_scene: target has no observed history point");
  TrajectoryScene out = scene;
  double ox = out.target.history(last, 0);
  double oy = out.target.history(last, 1);
  translate(out.target.history, -ox, -oy);
  translate(out.future, -ox, -oy);
  for (VehicleTrack& nb : out.neighbors) translate(nb.history, -ox, -oy);
  out.norm_offset_x += ox;
  out.norm_offset_y += oy;
  return out;
}

TrajectoryScene denormalize_scene(const TrajectoryScene& scene) {
  TrajectoryScene out = scene;
  translate(out.target.history, out.norm_offset_x, out.norm_offset_y);
  translate(out.future, out.norm_offset_x, out.norm_offset_y);
  for (VehicleTrack& nb : out.neighbors)
    translate(nb.history, out.norm_offset_x, out.norm_offset_y);
  out.norm_offset_x = 0.0;
  out.norm_offset_y = 0.0;
  return out;
}

SceneView make_view(const TrajectoryScene& scene,
                    const std::vector<SequenceMask>& sampled_masks) {
  std::size_t n_vehicles = 1 + scene.neighbors.size();
  if (!sampled_masks.empty() && sampled_masks.size() != n_vehicles)
    throw std::invalid_argument(
        "make_view: expected " + std::to_string(n_vehicles) + " masks, got " +
        std::to_string(sampled_masks.size()));

  auto effective = [&](const VehicleTrack& track,
                       std::size_t slot) -> SequenceMask {
    SequenceMask eff = track.observed;
    if (!sampled_masks.empty()) {
      const SequenceMask& s = sampled_masks[slot];
      if (s.len() != eff.len())
        throw std::invalid_argument("make_view: mask length mismatch");
      for (std::size_t i = 0; i < eff.bits.size(); ++i)
        eff.bits[i] = eff.bits[i] & s.bits[i];
    }
    // A target with nothing left has no anchor point; keep its dataset mask.
    if (slot == 0 && !eff.any_observed()) eff = track.observed;
    return eff;
  };

  SceneView view;
  view.hz = scene.hz;
  view.scene_id = scene.scene_id;
  SequenceMask target_mask = effective(scene.target, 0);
  int last = -1;
  for (std::size_t i = target_mask.len(); i-- > 0;)
    if (target_mask.bits[i] == 1) {
      last = static_cast<int>(i);
      break;
    }
  if (last < 0)
    throw std::invalid_argument(
        "make_view: target has no observed history point");
  view.offset_x = scene.target.history(last, 0);
  view.offset_y = scene.target.history(last, 1);

  auto add_vehicle = [&](const VehicleTrack& track, std::size_t slot,
                         const SequenceMask& mask) {
    Tensor h = track.history;
    translate(h, -view.offset_x, -view.offset_y);
    view.masked.push_back(apply_sequence_mask(h, mask));
    view.masks.push_back(mask);
    (void)slot;
  };
  add_vehicle(scene.target, 0, target_mask);
  for (std::size_t k = 0; k < scene.neighbors.size(); ++k)
    add_vehicle(scene.neighbors[k], k + 1,
                effective(scene.neighbors[k], k + 1));

  view.future = scene.future;
  translate(view.future, -view.offset_x, -view.offset_y);
  return view;
}

}  // namespace mtft
