#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nfsense/types.hpp"

namespace nfsense {

inline constexpr int kManifestVersion = 1;

enum class DType { F64, F32, C128, C64, U8 };

std::string_view to_string(DType dtype);
DType parse_dtype(std::string_view tag);
std::size_t element_bytes(DType dtype);
bool is_complex(DType dtype);

struct ArrayEntry {
  std::string file;
  DType dtype = DType::F64;
  std::vector<Index> shape; // first extent varies fastest
};

/// Contents of manifest.json.
struct DatasetManifest {
  int version = kManifestVersion;
  Grid grid;
  Index samples = 0;     // K
  Index coils = 0;       // Gamma
  Index field_terms = 0; // P, dynamic terms excluding time
  Index echoes = 0;      // N
  std::vector<double> echo_times_s;
  int harmonic_order = 1;
  bool global_term = false;
  std::string byte_order = "little";
  std::string element_order = "x-fastest";
  std::string b0_unit = "rad/s";
  std::string k_unit = "rad/m^n";
  std::map<std::string, ArrayEntry> arrays;

  /// Shape implied by the counts for the well-known array names, if any.
  std::optional<std::vector<Index>> expected_shape(std::string const& name) const;
};

/// A dataset directory: manifest.json plus raw little-endian arrays.
/// Arrays are read on demand; writes go straight to disk and update the
/// manifest.
class Dataset {
 public:
  static Dataset open(std::filesystem::path const& dir);
  static Dataset create(std::filesystem::path const& dir, DatasetManifest manifest);

  DatasetManifest const& manifest() const { return manifest_; }
  DatasetManifest& manifest() { return manifest_; }
  std::filesystem::path const& path() const { return dir_; }

  bool has(std::string const& name) const { return manifest_.arrays.count(name) != 0; }
  ArrayEntry const& entry(std::string const& name) const;

  RealMatrix read_real(std::string const& name) const;
  ComplexMatrix read_complex(std::string const& name) const;
  Mask read_mask(std::string const& name) const;
  PrescanData read_prescan() const;

  /// Writes `<name>.<dtype>` and records it in the manifest. Matrices are
  /// stored column-major, so the row index varies fastest on disk.
  void write_real(std::string const& name, RealMatrix const& values, DType storage = DType::F64);
  void write_complex(std::string const& name, ComplexMatrix const& values, DType storage = DType::C128);
  void write_mask(std::string const& name, Mask const& values);
  void write_prescan(PrescanData const& prescan, DType storage = DType::C128);

  void save_manifest() const;

 private:
  Dataset(std::filesystem::path dir, DatasetManifest manifest) : dir_(std::move(dir)), manifest_(std::move(manifest)) {}

  std::vector<char> read_bytes(ArrayEntry const& e) const;
  void write_entry(std::string const& name, ArrayEntry entry, std::vector<char> const& bytes);

  std::filesystem::path dir_;
  DatasetManifest manifest_;
};

std::string manifest_to_json(DatasetManifest const& manifest);
DatasetManifest manifest_from_json(std::string const& text);

/// Cross-checks entry shapes against counts and file lengths on disk.
void validate_manifest(DatasetManifest const& manifest, std::filesystem::path const& dir);

} // namespace nfsense
