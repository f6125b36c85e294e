#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtft/masking.hpp"
#include "mtft/tensor.hpp"

namespace mtft {

struct VehicleTrack {
  int vehicle_id = 0;
  Tensor history;          // t_h x 2, raw coordinates
  SequenceMask observed;   // dataset-level observation bits
};

struct TrajectoryScene {
  long scene_id = 0;
  VehicleTrack target;
  std::vector<VehicleTrack> neighbors;
  Tensor future;           // t_f x 2 target ground truth (always complete)
  double hz = 10.0;
  double norm_offset_x = 0.0;  // translation removed so far
  double norm_offset_y = 0.0;
};

struct DatasetManifest {
  std::string split = "train";
  std::size_t count = 0;
  std::size_t t_h = 20;
  std::size_t t_f = 30;
  double hz = 10.0;
  std::string interval_tag = "none";
  std::string source = "synthetic";
};

struct SceneDataset {
  DatasetManifest manifest;
  std::vector<TrajectoryScene> scenes;
};

struct SynthConfig {
  std::size_t count = 100;
  std::size_t t_h = 20;
  std::size_t t_f = 30;
  double hz = 10.0;
  double noise_sigma = 0.1;
  std::string mix = "cv=1,ca=1,lane=1,turn=1";  // family weights
  bool challenging = false;  // keep only scenes passing the challenge filter
  std::uint64_t seed = 1;
  std::string split = "train";
};

/// Seeded synthetic scenes from four kinematic families (constant velocity,
/// constant acceleration, sigmoid lane change, constant-radius turn), with
/// parallel-lane neighbors, Gaussian position noise, and a random rigid
/// transform per scene. Fully observed; missingness gets injected later.
SceneDataset synth_generate(const SynthConfig& cfg);

/// True when the future horizon shows > 5 m lateral displacement or a
/// longitudinal speed change > 20 km/h, with axes taken from the target's
/// heading at its last observed history point.
bool is_challenging(const TrajectoryScene& scene);

/// Keeps only challenging scenes; with require_missing also demands that the
/// target history has at least one missing step.
SceneDataset filter_challenging(const SceneDataset& ds,
                                bool require_missing = false);

/// Directory layout: <dir>/scenes.csv + <dir>/manifest.txt. Byte-stable for
/// identical inputs.
void write_dataset(const SceneDataset& ds, const std::string& dir);
SceneDataset read_dataset(const std::string& dir);

struct IngestConfig {
  std::size_t t_h = 20;
  std::size_t t_f = 30;
  double hz = 10.0;
  std::string split = "train";
  std::string source = "csv";
};

struct IngestLog {
  std::size_t dropped_vehicles = 0;  // zero observed history points
  std::size_t skipped_scenes = 0;    // no target / incomplete target data
  std::vector<std::string> warnings;
};

/// Parses rows (scene_id, vehicle_id, role, t_index, x, y[, observed]) into
/// scenes. Rows with t_index >= t_h are the target's future. A missing
/// observed column means fully observed. Malformed rows raise errors naming
/// the line; recoverable problems (vehicle with no observed history, scene
/// without a usable target) are dropped and logged.
SceneDataset ingest_csv(const std::string& path, const IngestConfig& cfg,
                        IngestLog* log = nullptr);

/// Translates every coordinate so the target's last observed history
/// position (per the dataset mask) becomes the origin; accumulates the
/// removed translation on the scene. Idempotent.
TrajectoryScene normalize_scene(const TrajectoryScene& scene);
/// Restores the original frame by adding the accumulated translation back.
TrajectoryScene denormalize_scene(const TrajectoryScene& scene);

/// Model-ready view of one scene. Vehicle 0 is the target. Histories are
/// translated to the target's last observed position under the effective
/// mask (dataset AND sampled) and then zero-filled.
struct SceneView {
  std::vector<Tensor> masked;
  std::vector<SequenceMask> masks;
  Tensor future;  // normalized ground truth, t_f x 2
  double offset_x = 0.0, offset_y = 0.0;
  double hz = 10.0;
  long scene_id = 0;
};

/// sampled_masks: one mask per vehicle, target first; pass an empty vector
/// to use the dataset masks alone. If composing masks would leave the
/// target with no observed step, the sampled mask is ignored for it.
SceneView make_view(const TrajectoryScene& scene,
                    const std::vector<SequenceMask>& sampled_masks);

}  // namespace mtft
