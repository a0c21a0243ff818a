#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fploc/matrix.hpp"

namespace fploc {

// One surveyed location with known coordinates; one classification class.
struct RpEntry {
  double longitude = 0.0;  // projected planar meters
  double latitude = 0.0;
  int floor = 0;
  int building = 0;
};

inline constexpr double kMissingRssiDbm = -110.0;

// One RSSI observation: n_ap x n_s matrix of dBm values in [-110, 0] after
// ingestion, plus the ground-truth location.
struct FingerprintSample {
  Matrix rssi;  // n_ap x n_s
  double longitude = 0.0;
  double latitude = 0.0;
  int floor = 0;
  int building = 0;
  int rp_index = -1;  // class id, training samples only
  int space_id = 0;            // UJIIndoorLoc metadata, kept for the
  int relative_position = 0;   // space-id grouping fallback
};

enum class DatasetRole : std::uint8_t { Train = 0, Test = 1 };

struct FingerprintDataset {
  std::vector<FingerprintSample> samples;
  std::vector<RpEntry> rp_table;  // K rows, unique
  std::size_t n_ap = 0;
  std::size_t n_s = 1;
  DatasetRole role = DatasetRole::Train;
  // AP coordinates in meters, when known (synthetic scenarios). Enables the
  // inverse-distance adjacency.
  std::vector<std::array<double, 3>> ap_positions;
  std::string source_hash;  // content hash of the originating file

  std::size_t n_classes() const { return rp_table.size(); }
};

// --- UJIIndoorLoc ingestion -------------------------------------------------

// Parses the published CSV schema (WAP001..WAP520 then LONGITUDE, LATITUDE,
// FLOOR, BUILDINGID, SPACEID, RELATIVEPOSITION, USERID, PHONEID, TIMESTAMP).
// The +100 not-detected marker and any positive RSSI map to -110 dBm; row
// count is preserved. Throws ParseError (schema/cells) or IoError.
FingerprintDataset load_ujiindoorloc(const std::string& path,
                                     DatasetRole role);

enum class RpGrouping : std::uint8_t {
  ExactTuple = 0,  // unique (longitude, latitude, floor, building)
  SpaceId = 1,     // (building, floor, space, relative_position); centroid coords
};

// Builds the RP table from a training set and labels every sample with its
// class index. Ordering is lexicographic in the grouping key, so labels are
// invariant under sample shuffling.
void derive_rp_classes(FingerprintDataset& train,
                       RpGrouping grouping = RpGrouping::ExactTuple);

// Keeps only samples matching the given building/floor (negative = no
// filter). Clears rp_table/labels; re-derive afterwards for training sets.
void filter_building_floor(FingerprintDataset& ds, int building, int floor);

// --- Feature normalization ----------------------------------------------------

enum class NormScheme : std::uint8_t {
  None = 0,
  MinMax110 = 1,  // x -> (x + 110) / 110, [-110, 0] onto [0, 1]
};

double normalize_value(double rssi_dbm, NormScheme scheme);
double denormalize_value(double value, NormScheme scheme);
// Transformed copy; the scheme travels with the model artifact so inference
// applies the identical transform.
FingerprintDataset normalize_features(const FingerprintDataset& ds,
                                      NormScheme scheme);

const char* norm_scheme_name(NormScheme s);
NormScheme norm_scheme_from_name(const std::string& name);  // ConfigError

// --- Synthetic scenarios ------------------------------------------------------

// Log-distance path loss with Gaussian shadowing over a grid of RPs and a
// grid of APs. Self-contained stand-in for the real dataset.
struct SyntheticScenario {
  double area_width_m = 50.0;
  double area_height_m = 50.0;
  std::size_t rp_grid_nx = 10;
  std::size_t rp_grid_ny = 10;
  double rp_spacing_m = 5.0;
  std::size_t ap_grid_nx = 5;
  std::size_t ap_grid_ny = 5;
  double path_loss_exponent = 3.0;
  double ref_power_dbm = -40.0;  // at ref_distance_m
  double ref_distance_m = 1.0;
  double shadowing_sigma_db = 4.0;
  std::size_t train_samples_per_rp = 20;
  std::size_t test_samples_per_rp = 5;
  std::uint64_t seed = 1;
};

// Deterministic per seed; train and test share RP positions and draw
// independent noise. RSSI = P0 - 10 n log10(max(d, d0)) + N(0, sigma),
// clamped to [-110, 0].
std::pair<FingerprintDataset, FingerprintDataset> generate_synthetic(
    const SyntheticScenario& scenario);

// --- Dataset files ------------------------------------------------------------

// Compact binary container (magic FPDS, versioned, little-endian). Raw dBm
// values are stored; normalization happens at train/eval time.
void save_dataset(const std::string& path, const FingerprintDataset& ds);
FingerprintDataset load_dataset(const std::string& path);

}  // namespace fploc
