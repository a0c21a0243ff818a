#include "fploc/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "fploc/exceptions.hpp"
#include "fploc/hash.hpp"
#include "fploc/rng.hpp"

namespace fploc {

namespace {

constexpr std::size_t kUjiApCount = 520;
const char* const kUjiMetaColumns[] = {
    "LONGITUDE", "LATITUDE",  "FLOOR",  "BUILDINGID", "SPACEID",
    "RELATIVEPOSITION", "USERID", "PHONEID", "TIMESTAMP"};

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) {
    s.remove_suffix(1);
  }
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

double parse_cell(std::string_view cell, std::size_t row_number,
                  const std::string& column) {
  cell = trim(cell);
  double value = 0.0;
  const auto [ptr, ec] =
      std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) {
    throw ParseError("row " + std::to_string(row_number) + ", column " +
                     column + ": '" + std::string(cell) + "' is not numeric");
  }
  return value;
}

std::string read_whole_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

}  // namespace

FingerprintDataset load_ujiindoorloc(const std::string& path,
                                     DatasetRole role) {
  const std::string content = read_whole_file(path);
  const std::string source_hash = hash_hex(fnv1a64(content.data(), content.size()));

  std::size_t pos = 0;
  auto next_line = [&](std::string_view& line) -> bool {
    if (pos >= content.size()) return false;
    const std::size_t end = content.find('\n', pos);
    if (end == std::string::npos) {
      line = std::string_view(content).substr(pos);
      pos = content.size();
    } else {
      line = std::string_view(content).substr(pos, end - pos);
      pos = end + 1;
    }
    return true;
  };

  std::string_view header;
  if (!next_line(header) || trim(header).empty()) {
    throw ParseError("ujiindoorloc: empty file or missing header row: " + path);
  }

  const auto names = split_csv(header);
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < names.size(); ++i) {
    index.emplace(std::string(trim(names[i])), i);
  }

  std::vector<std::string> required;
  required.reserve(kUjiApCount + 9);
  for (std::size_t i = 1; i <= kUjiApCount; ++i) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "WAP%03zu", i);
    required.emplace_back(buf);
  }
  for (const char* c : kUjiMetaColumns) required.emplace_back(c);

  std::vector<std::string> missing;
  for (const auto& name : required) {
    if (!index.count(name)) missing.push_back(name);
  }
  if (!missing.empty()) {
    std::string msg = "ujiindoorloc schema: missing columns:";
    const std::size_t shown = std::min<std::size_t>(missing.size(), 8);
    for (std::size_t i = 0; i < shown; ++i) msg += " " + missing[i];
    if (missing.size() > shown) {
      msg += " (+" + std::to_string(missing.size() - shown) + " more)";
    }
    throw ParseError(msg);
  }

  std::vector<std::size_t> wap_cols(kUjiApCount);
  for (std::size_t i = 0; i < kUjiApCount; ++i) {
    wap_cols[i] = index.at(required[i]);
  }
  const std::size_t col_lon = index.at("LONGITUDE");
  const std::size_t col_lat = index.at("LATITUDE");
  const std::size_t col_floor = index.at("FLOOR");
  const std::size_t col_building = index.at("BUILDINGID");
  const std::size_t col_space = index.at("SPACEID");
  const std::size_t col_relpos = index.at("RELATIVEPOSITION");

  FingerprintDataset ds;
  ds.n_ap = kUjiApCount;
  ds.n_s = 1;
  ds.role = role;
  ds.source_hash = source_hash;

  std::string_view line;
  std::size_t row_number = 1;
  while (next_line(line)) {
    ++row_number;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() < names.size()) {
      throw ParseError("row " + std::to_string(row_number) + ": expected " +
                       std::to_string(names.size()) + " cells, got " +
                       std::to_string(cells.size()));
    }
    FingerprintSample s;
    s.rssi = Matrix(kUjiApCount, 1);
    for (std::size_t i = 0; i < kUjiApCount; ++i) {
      double v = parse_cell(cells[wap_cols[i]], row_number, required[i]);
      // +100 marks "not detected"; positive values are equally invalid dBm.
      if (v == 100.0 || v > 0.0) v = kMissingRssiDbm;
      if (v < kMissingRssiDbm) v = kMissingRssiDbm;
      s.rssi(i, 0) = v;
    }
    s.longitude = parse_cell(cells[col_lon], row_number, "LONGITUDE");
    s.latitude = parse_cell(cells[col_lat], row_number, "LATITUDE");
    s.floor = static_cast<int>(
        std::lround(parse_cell(cells[col_floor], row_number, "FLOOR")));
    s.building = static_cast<int>(std::lround(
        parse_cell(cells[col_building], row_number, "BUILDINGID")));
    s.space_id = static_cast<int>(
        std::lround(parse_cell(cells[col_space], row_number, "SPACEID")));
    s.relative_position = static_cast<int>(std::lround(
        parse_cell(cells[col_relpos], row_number, "RELATIVEPOSITION")));
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

void derive_rp_classes(FingerprintDataset& train, RpGrouping grouping) {
  if (train.role != DatasetRole::Train) {
    throw ValidationError("derive_rp_classes: dataset role must be train");
  }
  train.rp_table.clear();
  if (grouping == RpGrouping::ExactTuple) {
    using Key = std::tuple<double, double, int, int>;
    std::map<Key, int> classes;
    for (const auto& s : train.samples) {
      classes.emplace(Key{s.longitude, s.latitude, s.floor, s.building}, -1);
    }
    int next = 0;
    for (auto& [key, id] : classes) {
      id = next++;
      train.rp_table.push_back(RpEntry{std::get<0>(key), std::get<1>(key),
                                       std::get<2>(key), std::get<3>(key)});
    }
    for (auto& s : train.samples) {
      s.rp_index =
          classes.at(Key{s.longitude, s.latitude, s.floor, s.building});
    }
  } else {
    using Key = std::tuple<int, int, int, int>;
    struct Acc {
      double lon_sum = 0.0, lat_sum = 0.0;
      std::size_t count = 0;
      int id = -1;
    };
    std::map<Key, Acc> classes;
    for (const auto& s : train.samples) {
      auto& acc = classes[Key{s.building, s.floor, s.space_id,
                              s.relative_position}];
      acc.lon_sum += s.longitude;
      acc.lat_sum += s.latitude;
      ++acc.count;
    }
    int next = 0;
    for (auto& [key, acc] : classes) {
      acc.id = next++;
      train.rp_table.push_back(RpEntry{acc.lon_sum / acc.count,
                                       acc.lat_sum / acc.count,
                                       std::get<1>(key), std::get<0>(key)});
    }
    for (auto& s : train.samples) {
      s.rp_index = classes
                       .at(Key{s.building, s.floor, s.space_id,
                               s.relative_position})
                       .id;
    }
  }
}

void filter_building_floor(FingerprintDataset& ds, int building, int floor) {
  std::erase_if(ds.samples, [&](const FingerprintSample& s) {
    if (building >= 0 && s.building != building) return true;
    if (floor >= 0 && s.floor != floor) return true;
    return false;
  });
  ds.rp_table.clear();
  for (auto& s : ds.samples) s.rp_index = -1;
}

double normalize_value(double rssi_dbm, NormScheme scheme) {
  switch (scheme) {
    case NormScheme::None: return rssi_dbm;
    case NormScheme::MinMax110: return (rssi_dbm + 110.0) / 110.0;
  }
  throw ConfigError("unknown normalization scheme id");
}

double denormalize_value(double value, NormScheme scheme) {
  switch (scheme) {
    case NormScheme::None: return value;
    case NormScheme::MinMax110: return value * 110.0 - 110.0;
  }
  throw ConfigError("unknown normalization scheme id");
}

FingerprintDataset normalize_features(const FingerprintDataset& ds,
                                      NormScheme scheme) {
  FingerprintDataset out = ds;
  if (scheme == NormScheme::None) return out;
  for (auto& s : out.samples) {
    for (double& v : s.rssi.values()) v = normalize_value(v, scheme);
  }
  return out;
}

const char* norm_scheme_name(NormScheme s) {
  switch (s) {
    case NormScheme::None: return "none";
    case NormScheme::MinMax110: return "minmax110";
  }
  return "?";
}

NormScheme norm_scheme_from_name(const std::string& name) {
  if (name == "none") return NormScheme::None;
  if (name == "minmax110") return NormScheme::MinMax110;
  throw ConfigError("unknown normalization scheme '" + name +
                    "' (expected 'none' or 'minmax110')");
}

namespace {

void validate_scenario(const SyntheticScenario& sc) {
  if (sc.ap_grid_nx * sc.ap_grid_ny < 2) {
    throw ConfigError("synthetic scenario: need at least 2 APs");
  }
  if (sc.rp_grid_nx * sc.rp_grid_ny < 2) {
    throw ConfigError("synthetic scenario: need at least 2 RPs");
  }
  if (sc.shadowing_sigma_db < 0.0) {
    throw ConfigError("synthetic scenario: shadowing_sigma_db must be >= 0");
  }
  if (sc.area_width_m <= 0.0 || sc.area_height_m <= 0.0) {
    throw ConfigError("synthetic scenario: area dimensions must be positive");
  }
  if (sc.rp_spacing_m <= 0.0) {
    throw ConfigError("synthetic scenario: rp_spacing_m must be positive");
  }
  if (sc.ref_distance_m <= 0.0) {
    throw ConfigError("synthetic scenario: ref_distance_m must be positive");
  }
  if (sc.train_samples_per_rp < 1) {
    throw ConfigError("synthetic scenario: train_samples_per_rp must be >= 1");
  }
  const double ext_x = (sc.rp_grid_nx - 1) * sc.rp_spacing_m;
  const double ext_y = (sc.rp_grid_ny - 1) * sc.rp_spacing_m;
  if (ext_x > sc.area_width_m || ext_y > sc.area_height_m) {
    throw ConfigError("synthetic scenario: RP grid exceeds area bounds");
  }
}

double path_loss_rssi(const SyntheticScenario& sc, double d) {
  const double eff = std::max(d, sc.ref_distance_m);
  double rssi = sc.ref_power_dbm -
                10.0 * sc.path_loss_exponent * std::log10(eff / sc.ref_distance_m);
  return rssi;
}

}  // namespace

std::pair<FingerprintDataset, FingerprintDataset> generate_synthetic(
    const SyntheticScenario& sc) {
  validate_scenario(sc);

  std::vector<std::array<double, 3>> aps;
  for (std::size_t iy = 0; iy < sc.ap_grid_ny; ++iy) {
    for (std::size_t ix = 0; ix < sc.ap_grid_nx; ++ix) {
      aps.push_back({sc.area_width_m * (ix + 0.5) / sc.ap_grid_nx,
                     sc.area_height_m * (iy + 0.5) / sc.ap_grid_ny, 0.0});
    }
  }

  std::vector<RpEntry> rps;
  const double ox = (sc.area_width_m - (sc.rp_grid_nx - 1) * sc.rp_spacing_m) / 2.0;
  const double oy = (sc.area_height_m - (sc.rp_grid_ny - 1) * sc.rp_spacing_m) / 2.0;
  for (std::size_t iy = 0; iy < sc.rp_grid_ny; ++iy) {
    for (std::size_t ix = 0; ix < sc.rp_grid_nx; ++ix) {
      rps.push_back(RpEntry{ox + ix * sc.rp_spacing_m,
                            oy + iy * sc.rp_spacing_m, 0, 0});
    }
  }

  const std::size_t n_ap = aps.size();
  Rng rng(sc.seed);

  auto make_set = [&](std::size_t per_rp, DatasetRole role) {
    FingerprintDataset ds;
    ds.n_ap = n_ap;
    ds.n_s = 1;
    ds.role = role;
    ds.ap_positions = aps;
    ds.rp_table = rps;
    for (std::size_t k = 0; k < rps.size(); ++k) {
      for (std::size_t rep = 0; rep < per_rp; ++rep) {
        FingerprintSample s;
        s.rssi = Matrix(n_ap, 1);
        for (std::size_t a = 0; a < n_ap; ++a) {
          const double dx = rps[k].longitude - aps[a][0];
          const double dy = rps[k].latitude - aps[a][1];
          double v = path_loss_rssi(sc, std::sqrt(dx * dx + dy * dy));
          if (sc.shadowing_sigma_db > 0.0) {
            v += rng.normal(0.0, sc.shadowing_sigma_db);
          }
          s.rssi(a, 0) = std::clamp(v, -110.0, 0.0);
        }
        s.longitude = rps[k].longitude;
        s.latitude = rps[k].latitude;
        s.floor = 0;
        s.building = 0;
        s.rp_index = static_cast<int>(k);
        ds.samples.push_back(std::move(s));
      }
    }
    return ds;
  };

  auto train = make_set(sc.train_samples_per_rp, DatasetRole::Train);
  auto test = make_set(sc.test_samples_per_rp, DatasetRole::Test);
  return {std::move(train), std::move(test)};
}

// --- binary dataset container -------------------------------------------------

namespace {

constexpr char kDatasetMagic[4] = {'F', 'P', 'D', 'S'};
constexpr std::uint32_t kDatasetVersion = 1;

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const std::string& what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ParseError("dataset file: truncated reading " + what);
  return v;
}

void write_string(std::ostream& out, const std::string& s) {
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in, const std::string& what) {
  const auto len = read_pod<std::uint32_t>(in, what);
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw ParseError("dataset file: truncated reading " + what);
  return s;
}

}  // namespace

void save_dataset(const std::string& path, const FingerprintDataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write file: " + path);
  out.write(kDatasetMagic, 4);
  write_pod<std::uint32_t>(out, kDatasetVersion);
  write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(ds.role));
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(ds.n_ap));
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(ds.n_s));
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(ds.rp_table.size()));
  for (const auto& rp : ds.rp_table) {
    write_pod(out, rp.longitude);
    write_pod(out, rp.latitude);
    write_pod<std::int32_t>(out, rp.floor);
    write_pod<std::int32_t>(out, rp.building);
  }
  write_pod<std::uint32_t>(out,
                           static_cast<std::uint32_t>(ds.ap_positions.size()));
  for (const auto& ap : ds.ap_positions) {
    write_pod(out, ap[0]);
    write_pod(out, ap[1]);
    write_pod(out, ap[2]);
  }
  write_pod<std::uint64_t>(out, ds.samples.size());
  for (const auto& s : ds.samples) {
    out.write(reinterpret_cast<const char*>(s.rssi.data()),
              static_cast<std::streamsize>(s.rssi.size() * sizeof(double)));
    write_pod(out, s.longitude);
    write_pod(out, s.latitude);
    write_pod<std::int32_t>(out, s.floor);
    write_pod<std::int32_t>(out, s.building);
    write_pod<std::int32_t>(out, s.rp_index);
    write_pod<std::int32_t>(out, s.space_id);
    write_pod<std::int32_t>(out, s.relative_position);
  }
  write_string(out, ds.source_hash);
  if (!out) throw IoError("write failed: " + path);
}

FingerprintDataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kDatasetMagic, 4) != 0) {
    throw ParseError("dataset file: bad magic (not an FPDS file): " + path);
  }
  const auto version = read_pod<std::uint32_t>(in, "version");
  if (version != kDatasetVersion) {
    throw ParseError("dataset file: unsupported version " +
                     std::to_string(version));
  }
  FingerprintDataset ds;
  ds.role = static_cast<DatasetRole>(read_pod<std::uint8_t>(in, "role"));
  ds.n_ap = read_pod<std::uint32_t>(in, "n_ap");
  ds.n_s = read_pod<std::uint32_t>(in, "n_s");
  const auto n_rp = read_pod<std::uint32_t>(in, "rp count");
  ds.rp_table.reserve(n_rp);
  for (std::uint32_t i = 0; i < n_rp; ++i) {
    RpEntry rp;
    rp.longitude = read_pod<double>(in, "rp");
    rp.latitude = read_pod<double>(in, "rp");
    rp.floor = read_pod<std::int32_t>(in, "rp");
    rp.building = read_pod<std::int32_t>(in, "rp");
    ds.rp_table.push_back(rp);
  }
  const auto n_aps = read_pod<std::uint32_t>(in, "ap count");
  ds.ap_positions.reserve(n_aps);
  for (std::uint32_t i = 0; i < n_aps; ++i) {
    std::array<double, 3> ap{};
    ap[0] = read_pod<double>(in, "ap");
    ap[1] = read_pod<double>(in, "ap");
    ap[2] = read_pod<double>(in, "ap");
    ds.ap_positions.push_back(ap);
  }
  const auto n_samples = read_pod<std::uint64_t>(in, "sample count");
  ds.samples.reserve(n_samples);
  for (std::uint64_t i = 0; i < n_samples; ++i) {
    FingerprintSample s;
    s.rssi = Matrix(ds.n_ap, ds.n_s);
    in.read(reinterpret_cast<char*>(s.rssi.data()),
            static_cast<std::streamsize>(s.rssi.size() * sizeof(double)));
    if (!in) throw ParseError("dataset file: truncated sample block");
    s.longitude = read_pod<double>(in, "sample");
    s.latitude = read_pod<double>(in, "sample");
    s.floor = read_pod<std::int32_t>(in, "sample");
    s.building = read_pod<std::int32_t>(in, "sample");
    s.rp_index = read_pod<std::int32_t>(in, "sample");
    s.space_id = read_pod<std::int32_t>(in, "sample");
    s.relative_position = read_pod<std::int32_t>(in, "sample");
    ds.samples.push_back(std::move(s));
  }
  ds.source_hash = read_string(in, "source hash");
  return ds;
}

}  // namespace fploc
